"""Dirichlet-energy minimisation in a homotopy class of graph maps.

The target is treated through its universal cover: the energy
``sum m(e)^2 / alpha(e)`` is convex along geodesics there, so moving one
vertex at a time to its optimal position, together with an exact
least-squares polish inside the current combinatorial cell, reaches the
global minimum.  A vertex sitting on a target vertex leaves it exactly when
one gate's tension exceeds the sum of the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

import numpy as np

from .curves import ARC, LOOP, MultiCurve, curve_energy, edge_counts, enumerate_candidates, push_curve
from .graph_core import EdgeScalars, GraphValidationError, MarkedGraph, Vertex, edge_of, reverse, sign_of
from .graph_maps import (
    EdgePath,
    GraphMap,
    Point,
    Segment,
    compose,
    directions_at,
    point_along,
    realize,
    reduce_map,
    reduce_segments,
    start_fraction,
)

QP_TOL = 1e-12
CERT_TOL = 1e-8
SNAP = 1e-9


class HarmonicError(RuntimeError):
    pass


# ---------------------------------------------------------------- solver state

class _State:
    """Mutable vertex positions and reduced edge paths, in floating point."""

    def __init__(self, f: GraphMap, alpha: Mapping[str, float], ell: Mapping[str, float],
                 pinned: Iterable[str] = ()):
        self.dom, self.cod = f.domain, f.codomain
        self.alpha = {e: float(alpha[e]) for e in self.dom.edge_ids}
        self.ell = {e: float(ell[e]) for e in self.cod.edge_ids}
        self.pos: dict[str, Point] = {v: _float_point(p) for v, p in f.vertex_images.items()}
        self.paths: dict[str, list[Segment]] = {
            e: [Segment(s.oe, float(s.a), float(s.b)) for s in f.edge_path(e).segments()]
            for e in self.dom.edge_ids}
        pinned = set(pinned)
        self.free = [v for v in self.dom.vertex_ids if not self.dom.is_marked(v) and v not in pinned]
        self.incid = {v: [] for v in self.dom.vertex_ids}
        for e in self.dom.edge_ids:
            a, b = self.dom.ends(e)
            self.incid[a].append((e, 1))
            self.incid[b].append((e, -1))
        self.transitions = 0
        self.trail: list[float] = []  # energy after each descent step that changed cell
        self._seen = 0

    def m(self, e: str) -> float:
        return sum(s.span * self.ell[edge_of(s.oe)] for s in self.paths[e])

    def energy(self) -> float:
        return sum(self.m(e) ** 2 / self.alpha[e] for e in self.dom.edge_ids)

    def path_from(self, e: str, side: int) -> list[Segment]:
        segs = self.paths[e]
        return segs if side > 0 else [s.reversed() for s in reversed(segs)]

    def slopes(self, v: str, d: str) -> dict[str, int]:
        """Rate of change of each incident ``m(e)`` when ``v`` moves along ``d``."""
        k: dict[str, int] = {}
        for e, side in self.incid[v]:
            p = self.path_from(e, side)
            k[e] = k.get(e, 0) + (-1 if p and p[0].oe == d else 1)
            if not p and side < 0 and self.dom.ends(e)[0] == v:
                k[e] = 0  # a constant loop stays constant
        return k

    def derivative(self, v: str, d: str) -> float:
        return sum(2 * self.m(e) * k / self.alpha[e] for e, k in self.slopes(v, d).items())

    def limit(self, v: str, d: str) -> float:
        """How far (as a fraction of ``d``'s edge) ``v`` can move before a path changes shape."""
        stop = 1.0
        for e, side in self.incid[v]:
            p = self.path_from(e, side)
            if p and p[0].oe == d:
                stop = min(stop, p[0].b)
        return stop

    def move(self, v: str, d: str, frac: float) -> None:
        """Move ``v`` along ``d`` to fraction ``frac`` of the oriented edge ``d``."""
        y = self.pos[v]
        s0 = start_fraction(y, d)
        if frac <= s0:
            return
        if abs(frac - 1) <= SNAP * 1e-3:
            frac = 1.0
        back = Segment(reverse(d), 1 - frac, 1 - s0)
        for e in dict.fromkeys(e for e, _ in self.incid[v]):
            segs = self.paths[e]
            a, b = self.dom.ends(e)
            if a == v:
                segs = [back] + segs
            if b == v:
                segs = segs + [back.reversed()]
            self.paths[e] = reduce_segments(segs)
        was_vertex = y.is_vertex
        self.pos[v] = point_along(self.cod, d, frac)
        if was_vertex or self.pos[v].is_vertex:
            self.transitions += 1

    def record(self) -> None:
        if self.transitions != self._seen:
            self._seen = self.transitions
            self.trail.append(self.energy())

    # --------------------------------------------------------- single vertex

    def optimize_vertex(self, v: str, tol: float) -> float:
        """Exact minimisation over the position of ``v``; returns the distance moved."""
        moved = 0.0
        for _ in range(4 * (len(self.cod.edge_ids) + 2) + 20):
            y = self.pos[v]
            best, bd = None, 0.0
            scale = self._scale(v)
            for d in sorted(directions_at(self.cod, y)):
                if self.ell[edge_of(d)] <= 0:
                    continue
                der = self.derivative(v, d)
                if der < bd - tol * scale:
                    best, bd = d, der
            if best is None:
                return moved
            d = best
            s0 = start_fraction(y, d)
            stop = self.limit(v, d)
            L = self.ell[edge_of(d)]
            room = (stop - s0) * L
            num, den = 0.0, 0.0
            for e, k in self.slopes(v, d).items():
                num += k * self.m(e) / self.alpha[e]
                den += k * k / self.alpha[e]
            step = room if den <= 0 else min(room, max(0.0, -num / den))
            target = s0 + step / L
            if stop - target <= SNAP * 1e-3:
                target = stop
            self.move(v, d, target)
            moved += step
            if target < stop:
                return moved
        return moved

    def _scale(self, v: str) -> float:
        return max([self.m(e) / self.alpha[e] for e, _ in self.incid[v]] + [1e-300])

    # --------------------------------------------------------- cell polish

    def polish(self) -> bool:
        """Solve the quadratic problem inside the current cell; True if applied fully."""
        groups = self._groups()
        var = [g for g in groups if g["edge"] is not None]
        if not var:
            return True
        idx = {id(g): i for i, g in enumerate(var)}
        gof = {v: g for g in groups for v in g["members"]}
        edges = self.dom.edge_ids
        A = np.zeros((len(edges), len(var)))
        m0 = np.array([self.m(e) for e in edges])
        for r, e in enumerate(edges):
            p = self.paths[e]
            if not p:
                continue
            a, b = self.dom.ends(e)
            ga, gb = gof[a], gof[b]
            if ga["edge"] is not None:
                A[r, idx[id(ga)]] += -1.0 if p[0].oe == "+" + ga["edge"] else 1.0
            if gb["edge"] is not None:
                A[r, idx[id(gb)]] += 1.0 if p[-1].oe == "+" + gb["edge"] else -1.0
        w = np.array([1.0 / math.sqrt(self.alpha[e]) for e in edges])
        delta, *_ = np.linalg.lstsq(A * w[:, None], -m0 * w, rcond=None)
        t = self._feasible_fraction(var, idx, gof, A, delta)
        if t <= 0:
            return False
        self._apply(var, delta * t)
        return t >= 1.0

    def _groups(self) -> list[dict]:
        """Vertices glued by constant edges move together; marked or vertex-held groups are fixed."""
        parent = {v: v for v in self.dom.vertex_ids}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.dom.edge_ids:
            if not self.paths[e]:
                a, b = self.dom.ends(e)
                parent[find(a)] = find(b)
        comps: dict[str, list[str]] = {}
        for v in self.dom.vertex_ids:
            comps.setdefault(find(v), []).append(v)
        out = []
        for members in comps.values():
            p = self.pos[members[0]]
            fixed = p.is_vertex or any(self.dom.is_marked(v) for v in members)
            out.append({"members": members, "edge": None if fixed else p.edge,
                        "x": None if fixed else p.offset * self.ell[p.edge]})
        return out

    def _feasible_fraction(self, var, idx, gof, A, delta) -> float:
        t = 1.0
        for g in var:
            L = self.ell[g["edge"]]
            dx = delta[idx[id(g)]]
            if dx > 0:
                t = min(t, (L - g["x"]) / dx)
            elif dx < 0:
                t = min(t, -g["x"] / dx)
        for r, e in enumerate(self.dom.edge_ids):
            p = self.paths[e]
            if not p:
                continue
            a, b = self.dom.ends(e)
            ga, gb = gof[a], gof[b]
            first_rate = 0.0
            last_rate = 0.0
            if ga["edge"] is not None:
                first_rate = (-1.0 if p[0].oe == "+" + ga["edge"] else 1.0) * delta[idx[id(ga)]]
            if gb["edge"] is not None:
                last_rate = (1.0 if p[-1].oe == "+" + gb["edge"] else -1.0) * delta[idx[id(gb)]]
            if len(p) == 1:
                rate, room = first_rate + last_rate, p[0].span * self.ell[edge_of(p[0].oe)]
                if rate < 0:
                    t = min(t, room / -rate)
            else:
                if first_rate < 0:
                    t = min(t, p[0].span * self.ell[edge_of(p[0].oe)] / -first_rate)
                if last_rate < 0:
                    t = min(t, p[-1].span * self.ell[edge_of(p[-1].oe)] / -last_rate)
        return max(0.0, t)

    def _apply(self, var, delta) -> None:
        for g, dx in zip(var, (float(x) for x in delta)):
            if dx == 0:
                continue
            e = g["edge"]
            L = self.ell[e]
            d = "+" + e if dx > 0 else "-" + e
            for v in g["members"]:
                y = self.pos[v]
                frac = (y.offset * L + dx) / L if dx > 0 else ((1 - y.offset) * L - dx) / L
                frac = min(1.0, frac)
                if abs(frac - 1.0) < SNAP * 1e-3:
                    frac = 1.0
                self.move(v, d, frac)

    # --------------------------------------------------------- output

    def snap(self, eps: float = SNAP) -> None:
        for v in self.free:
            p = self.pos[v]
            if p.is_vertex:
                continue
            if p.offset < eps:
                self.move(v, "-" + p.edge, 1.0)
            elif p.offset > 1 - eps:
                self.move(v, "+" + p.edge, 1.0)

    def to_map(self, structure: EdgeScalars) -> GraphMap:
        paths = {e: EdgePath.from_segments(s) for e, s in self.paths.items()}
        return realize(self.dom, self.cod, dict(self.pos), paths, structure, check=False)

    def cell_key(self) -> tuple:
        pos = tuple(sorted((v, p.vertex if p.is_vertex else "~" + p.edge) for v, p in self.pos.items()))
        words = tuple(sorted((e, tuple(s.oe for s in p)) for e, p in self.paths.items()))
        return pos, words


def _float_point(p: Point) -> Point:
    return p if p.is_vertex else Point.on_edge(p.edge, float(p.offset))


# ---------------------------------------------------------------- results

@dataclass(frozen=True)
class GateReport:
    vertices: Mapping[str, dict]
    worst_slack: float
    scale: float
    passed: bool

    def to_json(self) -> dict:
        return {"vertices": self.vertices, "worst_slack": self.worst_slack,
                "scale": self.scale, "passed": self.passed}


@dataclass(frozen=True)
class HarmonicResult:
    map: GraphMap
    dirichlet: float
    tension: EdgeScalars
    pullback: EdgeScalars
    certificate: GateReport
    transitions: int = 0
    cell: tuple = field(default=(), compare=False)
    collapsed: Optional[object] = field(default=None, compare=False)
    null_domain_edges: tuple = ()
    energy_trail: tuple = field(default=(), compare=False)

    def to_json(self) -> dict:
        from .graph_maps import map_to_dict
        return {
            "dirichlet": self.dirichlet,
            "map": map_to_dict(self.map),
            "tension": {e: float(x) for e, x in sorted(self.tension.items())},
            "pullback": {e: float(x) for e, x in sorted(self.pullback.items())},
            "certificate": self.certificate.to_json(),
            "transitions": self.transitions,
        }


def harmonic_certificate(f: GraphMap, alpha: EdgeScalars, ell: EdgeScalars, tol: float = CERT_TOL) -> GateReport:
    """Gate tensions and triangle-inequality slack at every unmarked vertex.

    The map is taken as constant-speed, so the tension of ``e`` is its traced
    image length divided by ``alpha(e)``.  A vertex inside a target edge needs
    its two gates balanced; a vertex on a target vertex needs each gate to be
    at most the sum of the others.
    """
    if not f.constant_derivative:
        raise ValueError("certificate needs a constant-derivative map")
    from .graph_maps import pullback_lengths
    m = pullback_lengths(f, ell)
    tension = {e: float(m[e]) / float(alpha[e]) for e in f.domain.edge_ids}
    scale = max(tension.values(), default=0.0) or 1.0
    report = {}
    worst = math.inf
    paths = f.edge_paths
    for v in f.domain.vertex_ids:
        if f.domain.is_marked(v):
            continue
        gates: dict[str, list[str]] = {}
        tens: dict[str, float] = {}
        for d in f.domain.directions(v):
            e = edge_of(d)
            if tension[e] <= 0:
                continue
            p = paths[e] if sign_of(d) > 0 else paths[e].reversed()
            if not p.word:
                continue
            key = p.word[0]
            gates.setdefault(key, []).append(d)
            tens[key] = tens.get(key, 0.0) + tension[e]
        y = f.vertex_images[v]
        vals = list(tens.values())
        if not vals:
            slack = 0.0
        elif y.is_vertex:
            total = sum(vals)
            slack = min(total - 2 * x for x in vals)
        else:
            plus, minus = tens.get("+" + y.edge, 0.0), tens.get("-" + y.edge, 0.0)
            slack = -abs(plus - minus)
        worst = min(worst, slack)
        report[v] = {"image": y.to_json(), "gates": {k: sorted(g) for k, g in sorted(gates.items())},
                     "tensions": {k: t for k, t in sorted(tens.items())}, "slack": slack}
    if worst == math.inf:
        worst = 0.0
    return GateReport(report, worst, scale, worst >= -tol * scale)


def _result(st: _State, ell: EdgeScalars, alpha: EdgeScalars, tol: float) -> HarmonicResult:
    f = st.to_map(ell)
    m = {e: st.m(e) for e in st.dom.edge_ids}
    tension = EdgeScalars("weight", {e: m[e] / st.alpha[e] for e in m})
    cert = harmonic_certificate(f, alpha, ell, tol)
    return HarmonicResult(f, sum(m[e] ** 2 / st.alpha[e] for e in m), tension,
                          EdgeScalars("length", m), cert, st.transitions, st.cell_key(),
                          energy_trail=tuple(st.trail))


def harmonic_solve(f0: GraphMap, alpha: EdgeScalars, ell: EdgeScalars, tol: float = CERT_TOL,
                   max_transitions: int = 100000, max_sweeps: int = 100000,
                   pinned: Iterable[str] = ()) -> HarmonicResult:
    """Harmonic representative of the class of ``f0`` for elastic ``alpha`` and lengths ``ell``.

    Vertices in ``pinned`` keep their images like marked vertices.  The
    certificate still checks them, so it usually fails when any are given.
    """
    for e in f0.domain.edge_ids:
        if not float(alpha[e]) > 0:
            raise HarmonicError(f"non-positive elastic constant on {e!r}")
    if any(float(ell[e]) <= 0 for e in f0.codomain.edge_ids):
        return harmonic_solve_weak(f0, alpha, ell, tol)
    st = _State(f0 if pinned else reduce_map(f0), alpha, ell, pinned)
    _descend(st, tol, max_transitions, max_sweeps)
    st.snap()
    res = _result(st, ell, alpha, tol)
    if not res.certificate.passed:
        # snapping can disturb a delicate balance; polish again without it
        _descend(st, tol, max_transitions, max_sweeps)
        res = _result(st, ell, alpha, tol)
    return res


def _descend(st: _State, tol: float, max_transitions: int, max_sweeps: int) -> None:
    move_tol = QP_TOL
    last = math.inf
    for sweep in range(max_sweeps):
        moved = 0.0
        for v in st.free:
            moved += st.optimize_vertex(v, move_tol)
            st.record()
        if st.transitions > max_transitions:
            raise HarmonicError("too many cell transitions")
        if sweep % 3 == 2 or moved == 0.0:
            st.polish()
            st.record()
        e = st.energy()
        if moved == 0.0 and _stationary(st, move_tol):
            return
        if abs(last - e) <= 1e-16 * max(1.0, e) and moved < 1e-15:
            return
        last = e
    raise HarmonicError("harmonic solve did not converge")


def _stationary(st: _State, tol: float) -> bool:
    for v in st.free:
        scale = st._scale(v)
        for d in directions_at(st.cod, st.pos[v]):
            if st.ell[edge_of(d)] > 0 and st.derivative(v, d) < -tol * scale:
                return False
    return True


# ---------------------------------------------------------------- weak targets

@dataclass(frozen=True)
class CollapseData:
    target: MarkedGraph
    collapse_map: GraphMap
    null_edges: tuple


def collapse_map(k: MarkedGraph, null_edges) -> CollapseData:
    from .graph_core import collapse_subgraph
    col = collapse_subgraph(k, null_edges)
    vi = {v: Point.at_vertex(col.vertex_map[v]) for v in k.vertex_ids}
    paths = {e: (EdgePath(("+" + e,), Fraction(0), Fraction(1)) if e not in col.collapsed_edges
                 else EdgePath(())) for e in k.edge_ids}
    return CollapseData(col.graph, realize(k, col.graph, vi, paths), tuple(sorted(col.collapsed_edges)))


def harmonic_solve_weak(f0: GraphMap, alpha: EdgeScalars, ell: EdgeScalars, tol: float = CERT_TOL) -> HarmonicResult:
    """Harmonic map to the graph obtained by collapsing zero-length target edges."""
    null = [e for e in f0.codomain.edge_ids if float(ell[e]) <= 0]
    if not null:
        return harmonic_solve(f0, alpha, ell, tol)
    data = collapse_map(f0.codomain, null)
    g0 = compose(f0, data.collapse_map)
    ell_c = EdgeScalars("length", {e: ell[e] for e in data.target.edge_ids})
    g0 = realize(g0.domain, g0.codomain, g0.vertex_images, g0.edge_paths, ell_c, check=False)
    if not data.target.edge_ids:
        m = {e: 0.0 for e in f0.domain.edge_ids}
        cert = GateReport({}, 0.0, 1.0, True)
        res = HarmonicResult(g0, 0.0, EdgeScalars("weight", m), EdgeScalars("length", m), cert)
    else:
        res = harmonic_solve(g0, alpha, ell_c, tol)
    nulls = tuple(e for e in f0.domain.edge_ids if not res.map.edge_path(e).word)
    return HarmonicResult(res.map, res.dirichlet, res.tension, res.pullback, res.certificate,
                          res.transitions, res.cell, data, nulls)


# ---------------------------------------------------------------- Dir and H as functions of lengths

def dir_and_H_of_lengths(f: GraphMap, alpha: EdgeScalars, ell: EdgeScalars,
                         tol: float = CERT_TOL) -> tuple[float, dict[str, float]]:
    res = harmonic_solve(f, alpha, ell, tol)
    return res.dirichlet, {e: float(x) for e, x in res.pullback.items()}


@dataclass(frozen=True)
class RelaxedCheck:
    ok: bool
    worst_margin: float
    violated_by: Optional[MultiCurve]


def check_relaxed(r: Mapping[str, float], f: GraphMap, ell: EdgeScalars,
                  candidates: Optional[list] = None, tol: float = 1e-12) -> RelaxedCheck:
    """Whether ``sum n_c(e) r(e) >= length of f∘c`` for every weight-one candidate curve."""
    cands = candidates if candidates is not None else enumerate_candidates(f.domain)
    worst, bad = math.inf, None
    for c in cands:
        lhs = sum(float(x) * float(r[e]) for e, x in edge_counts(c).items())
        rhs = float(curve_energy(push_curve(c, f), ell))
        margin = lhs - rhs
        if margin < worst:
            worst, bad = margin, c
    if worst == math.inf:
        worst = 0.0
    scale = max([float(x) for x in r.values()] + [1.0])
    ok = worst >= -tol * scale
    return RelaxedCheck(ok, worst, None if ok else bad)


# ---------------------------------------------------------------- Lipschitz search

def _cell_lp(st: _State, ell_dom: Mapping[str, float], choice: dict[str, Optional[str]]):
    """Best Lipschitz constant with each free vertex moving along its chosen direction."""
    from scipy.optimize import linprog
    movers = [v for v in st.free if choice.get(v) is not None]
    edges = st.dom.edge_ids
    n = len(movers)
    A_ub, b_ub = [], []
    bounds = []
    coef = {e: np.zeros(n) for e in edges}
    for j, v in enumerate(movers):
        d = choice[v]
        y = st.pos[v]
        s0 = start_fraction(y, d)
        L = st.ell[edge_of(d)]
        bounds.append((0.0, (st.limit(v, d) - s0) * L))
        for e, k in st.slopes(v, d).items():
            coef[e][j] += k
    for e in edges:
        m0 = st.m(e)
        # m0 + coef.x <= t * ell_dom
        A_ub.append(list(coef[e]) + [-float(ell_dom[e])])
        b_ub.append(-m0)
        A_ub.append(list(-coef[e]) + [0.0])
        b_ub.append(m0)
    bounds.append((0.0, None))
    cvec = np.zeros(n + 1)
    cvec[-1] = 1.0
    res = linprog(cvec, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
    if not res.success:
        return None
    return res.fun, movers, res.x[:n]


def lipschitz_search(f0: GraphMap, ell_dom: EdgeScalars, ell_cod: EdgeScalars,
                     max_cells: int = 20000, tol: float = 1e-12) -> tuple[float, GraphMap]:
    """Constant-speed map minimising the Lipschitz constant, by local search over PL cells.

    In each round every free vertex either stays or moves along one of the
    directions at its image; each joint choice is a linear programme.  The
    Lipschitz constant is convex on the product of universal covers, so a
    choice-wise local minimum is global.
    """
    import itertools
    st = _State(reduce_map(f0), ell_dom, ell_cod)
    ld = {e: float(ell_dom[e]) for e in st.dom.edge_ids}

    def lip() -> float:
        return max((st.m(e) / ld[e] for e in st.dom.edge_ids), default=0.0)

    current = lip()
    for _ in range(1000):
        options = []
        for v in st.free:
            dirs = sorted(directions_at(st.cod, st.pos[v]))
            options.append([None] + dirs)
        best = None
        count = 0
        for combo in itertools.product(*options):
            count += 1
            if count > max_cells:
                break
            choice = dict(zip(st.free, combo))
            if all(c is None for c in combo):
                continue
            out = _cell_lp(st, ld, choice)
            if out is not None and out[0] < current - tol * max(1.0, current) and (best is None or out[0] < best[0]):
                best = (out[0], choice, out[1], out[2])
        if best is None:
            break
        _, choice, movers, steps = best
        for v, step in zip(movers, steps):
            d = choice[v]
            if step <= 0:
                continue
            s0 = start_fraction(st.pos[v], d)
            st.move(v, d, min(1.0, s0 + step / st.ell[edge_of(d)]))
        current = lip()
    return current, st.to_map(ell_cod)
