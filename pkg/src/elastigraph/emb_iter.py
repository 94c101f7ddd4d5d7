"""Embedding energy of a homotopy class by iterating harmonic maps and push-forwards.

One step takes lengths on the target, finds the harmonic representative,
converts its image lengths into tension weights, pushes them forward to the
target and turns them back into lengths.  The best ratio of Dirichlet
energies is reached at a projective fixed point; boundary fixed points are
split into a filling part and a smaller problem that is solved recursively.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .curves import MultiCurve, curve_energy, edge_counts, push_curve, sf_el_lower_bound
from .graph_core import Edge, EdgeScalars, MarkedGraph, Vertex, edge_of
from .graph_maps import (
    EdgePath,
    GraphMap,
    Piece,
    Point,
    cyclic_reduce_segments,
    energy,
    identity_map,
    make_map,
    multiplicity,
    realize,
    reduce_map,
    reduce_segments,
    same_point,
)
from .harmonic import HarmonicError, HarmonicResult, harmonic_solve
from .taut import TrainTrack, check_train_track, gates_from_map, make_taut, tt_to_multicurve

log = logging.getLogger(__name__)

ZERO_EPS = 1e-7
TINY_LENGTH = 1e-9
CYCLE_WINDOW = 64


class EmbError(RuntimeError):
    pass


# ---------------------------------------------------------------- duality

def duality(values: Mapping[str, object], alpha: Mapping[str, object], p=2, inverse: bool = False) -> dict:
    """Weights to lengths, ``alpha * w^(1/(p-1))``; ``inverse`` maps lengths back to weights."""
    p = Fraction(p) if not isinstance(p, float) else p
    if p <= 1:
        raise ValueError("duality needs p > 1")
    out = {}
    for e, x in values.items():
        a = alpha[e]
        if p == 2:
            out[e] = x / a if inverse else a * x
        elif inverse:
            out[e] = (float(x) / float(a)) ** float(p - 1)
        else:
            out[e] = float(a) * float(x) ** (1.0 / float(p - 1))
    return out


# ---------------------------------------------------------------- one step

@dataclass(frozen=True)
class StepRecord:
    lengths: Mapping[str, float]
    pullback: Mapping[str, float]
    weights: Mapping[str, float]
    pushforward: Mapping[str, float]
    next_lengths: Mapping[str, float]
    ratio: float
    cell: tuple
    harmonic: HarmonicResult = field(compare=False, repr=False)

    def to_json(self, step: int = 0) -> dict:
        return {"step": step, "lengths": dict(self.lengths), "pullback": dict(self.pullback),
                "weights": dict(self.weights), "pushforward": dict(self.pushforward),
                "ratio": self.ratio, "cell": str(hash(self.cell))}


def _floats(s) -> dict[str, float]:
    return {e: float(x) for e, x in s.items()}


def pushforward(res: HarmonicResult, weights: Mapping[str, float], phi: GraphMap) -> dict[str, float]:
    """Weighted preimage count of each target edge for the taut tension map."""
    edges = phi.codomain.edge_ids
    if res.collapsed is None:
        fn = multiplicity(res.map, EdgeScalars("weight", dict(weights)))
        return {e: _edge_average(fn, e) for e in edges}
    # zero-length edges: tautness is checked on the original target
    w = {e: Fraction(x) for e, x in weights.items()}
    g = make_taut(phi, w)
    fn = multiplicity(g, EdgeScalars("weight", w))
    return {e: _edge_average(fn, e) for e in edges}


def _edge_average(fn, e: str) -> float:
    xs, vs = fn.breakpoints[e], fn.values[e]
    return float(sum(float(xs[i + 1] - xs[i]) * float(v) for i, v in enumerate(vs)))


def iter_step(lengths: Mapping[str, float], phi: GraphMap, alpha1: EdgeScalars, alpha2: EdgeScalars,
              tol: float = 1e-8) -> StepRecord:
    ell = {e: float(lengths[e]) for e in phi.codomain.edge_ids}
    if all(x <= 0 for x in ell.values()):
        raise EmbError("lengths must not all vanish")
    res = harmonic_solve(phi, alpha1, EdgeScalars("length", ell), tol)
    m = _floats(res.pullback)
    m.update({e: 0.0 for e in phi.domain.edge_ids if e not in m})
    w = duality(m, _floats(alpha1), inverse=True)
    v = pushforward(res, w, phi)
    nxt = duality(v, _floats(alpha2))
    ratio = sum(nxt.values()) / sum(ell.values())
    return StepRecord(ell, m, w, v, nxt, ratio, res.cell, res)


def dirichlet_ratio(lengths: Mapping[str, float], phi: GraphMap, alpha1: EdgeScalars, alpha2: EdgeScalars,
                    tol: float = 1e-8) -> float:
    """Dirichlet energy of the class over that of the identity, for the same target lengths."""
    ell = EdgeScalars("length", {e: float(x) for e, x in lengths.items()})
    top = harmonic_solve(phi, alpha1, ell, tol).dirichlet
    bottom = harmonic_solve(identity_map(phi.codomain), alpha2, ell, tol).dirichlet
    return top / bottom if bottom > 0 else math.inf


# ---------------------------------------------------------------- iteration

@dataclass
class IterationTrace:
    steps: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    fixed: Optional[dict] = None
    multiplier: Optional[float] = None
    converged: bool = False
    exact_solves: int = 0

    def records(self) -> list[dict]:
        out = []
        for i, (s, dr) in enumerate(zip(self.steps, self.ratios)):
            rec = s.to_json(i)
            rec["dirichlet_ratio"] = dr
            out.append(rec)
        return out


def _normalize(x: Mapping[str, float]) -> dict[str, float]:
    total = sum(x.values())
    out = {e: v / total for e, v in x.items()}
    return {e: (0.0 if v < 1e-15 else v) for e, v in out.items()}


def iterate_to_fixed(ell0: Mapping[str, float], phi: GraphMap, alpha1: EdgeScalars, alpha2: EdgeScalars,
                     tol: float = 1e-10, max_iters: int = 2000, trace_ratios: bool = True) -> IterationTrace:
    """Projective iteration from ``ell0`` until the lengths stop moving."""
    tr = IterationTrace()
    ell = _normalize({e: float(x) for e, x in ell0.items()})
    history: list[tuple] = []
    next_try, wait = 0, 1
    for it in range(max_iters):
        step = iter_step(ell, phi, alpha1, alpha2)
        tr.steps.append(step)
        tr.ratios.append(dirichlet_ratio(ell, phi, alpha1, alpha2) if trace_ratios else step.ratio)
        nxt = _normalize(step.next_lengths)
        if max(abs(nxt[e] - ell[e]) for e in ell) < tol:
            tr.fixed, tr.multiplier, tr.converged = nxt, step.ratio, True
            return tr
        if it >= next_try and step.cell in history[-CYCLE_WINDOW:]:
            period = len(history) - max(i for i in range(max(0, len(history) - CYCLE_WINDOW), len(history))
                                        if history[i] == step.cell)
            exact = _fixed_ray_in_cell(ell, period, phi, alpha1, alpha2, tol)
            # failed attempts are expensive; retry less and less often
            next_try, wait = it + wait, wait * 2
            if exact is not None:
                tr.exact_solves += 1
                fixed, mult, last = exact
                tr.steps.append(last)
                tr.ratios.append(dirichlet_ratio(fixed, phi, alpha1, alpha2) if trace_ratios else mult)
                tr.fixed, tr.multiplier, tr.converged = fixed, mult, True
                return tr
        history.append(step.cell)
        ell = nxt
    tr.fixed, tr.multiplier = ell, tr.steps[-1].ratio if tr.steps else None
    return tr


def _run(ell, k, phi, alpha1, alpha2):
    cells, cur, last = [], dict(ell), None
    for _ in range(k):
        last = iter_step(cur, phi, alpha1, alpha2)
        cells.append(last.cell)
        cur = dict(last.next_lengths)
    return cur, cells, last


def _fixed_ray_in_cell(ell, period, phi, alpha1, alpha2, tol):
    """Solve the linear fixed-ray problem for ``period`` steps inside one cell of linearity."""
    edges = sorted(ell)
    live = [e for e in edges if ell[e] > 0]
    base, cells, _ = _run(ell, period, phi, alpha1, alpha2)
    h = 1e-6
    M = np.zeros((len(live), len(live)))
    for j, e in enumerate(live):
        bumped = dict(ell)
        bumped[e] += h
        out, c2, _ = _run(bumped, period, phi, alpha1, alpha2)
        if c2 != cells:
            return None
        M[:, j] = [(out[x] - base[x]) / h for x in live]
    vals, vecs = np.linalg.eig(M)
    order = np.argsort(-vals.real)
    for k in order:
        if abs(vals[k].imag) > 1e-9 or vals[k].real <= 0:
            continue
        vec = vecs[:, k].real
        vec = vec if vec.sum() > 0 else -vec
        if vec.min() < -1e-9:
            continue
        cand = {e: 0.0 for e in edges}
        cand.update({e: max(0.0, float(x)) for e, x in zip(live, vec)})
        cand = _normalize(cand)
        out, c2, last = _run(cand, period, phi, alpha1, alpha2)
        if c2 != cells:
            continue
        mult = sum(out.values())
        back = _normalize(out)
        if max(abs(back[e] - cand[e]) for e in edges) < tol:
            # one-step multiplier; for period > 1 the geometric mean
            return cand, mult ** (1.0 / period), last
    return None


# ---------------------------------------------------------------- boundary fixed points

@dataclass(frozen=True)
class Decomposition:
    delta1: tuple
    delta2: tuple
    sigma1: tuple
    sigma2: tuple
    lift: Optional[GraphMap]
    eps: float


def _essential_class(phi: GraphMap) -> tuple[GraphMap, tuple]:
    """Restrict the target to the edges a taut unit-weight representative covers."""
    g = make_taut(phi, {e: Fraction(1) for e in phi.domain.edge_ids})
    n = multiplicity(g)
    dead = tuple(e for e in phi.codomain.edge_ids if all(v == 0 for v in n.values[e]))
    if not dead:
        return phi, ()
    cod = phi.codomain
    keep = [e for e in cod.edge_ids if e not in dead]
    used = {x for e in keep for x in cod.ends(e)} | {p.vertex for p in g.vertex_images.values() if p.is_vertex}
    verts = tuple(v for v in cod.vertices if v.id in used or v.marked)
    sub = MarkedGraph(verts, tuple(ed for ed in cod.edges if ed.id in keep))
    restricted = make_map(phi.domain, sub, g.vertex_images, g.pieces, g.constant_derivative, check=False)
    return restricted, dead


def boundary_decompose(fixed: Mapping[str, float], phi: GraphMap, step: StepRecord,
                       eps: float = ZERO_EPS) -> Decomposition:
    """Split both graphs into the part carrying tension and the part that collapses."""
    for _ in range(30):
        top = max(fixed.values())
        sigma2 = tuple(sorted(e for e, x in fixed.items() if x <= eps * top))
        if not sigma2:
            return Decomposition(tuple(phi.domain.edge_ids), tuple(phi.codomain.edge_ids), (), (), None, eps)
        wmax = max(step.weights.values())
        w = {e: (Fraction(x) if x > eps * wmax else Fraction(0)) for e, x in step.weights.items()}
        sigma1 = tuple(sorted(e for e, x in w.items() if x == 0))
        lift = make_taut(phi, w)
        if _splits(lift, sigma1, sigma2):
            delta1 = tuple(e for e in phi.domain.edge_ids if e not in sigma1)
            delta2 = tuple(e for e in phi.codomain.edge_ids if e not in sigma2)
            return Decomposition(delta1, delta2, sigma1, sigma2, lift, eps)
        eps /= 2
    raise EmbError("inconsistent boundary decomposition")


def _splits(lift: GraphMap, sigma1, sigma2) -> bool:
    """Collapsing domain edges map into the collapsing target and the rest avoid it."""
    for e in lift.domain.edge_ids:
        letters = {edge_of(oe) for oe in lift.edge_path(e).word}
        if e in sigma1 and not letters <= set(sigma2):
            return False
        if e not in sigma1 and letters & set(sigma2):
            return False
    return True


def _settle_tense_part(dec: Decomposition, fixed: Mapping[str, float], alpha1: EdgeScalars,
                       alpha2: EdgeScalars) -> GraphMap:
    """Move the vertices that only touch tense edges to their harmonic positions.

    Taut lifts are not unique, and the filling map is realized from the lift,
    so the tense part has to be harmonic for the lengths ``fixed``.  Collapsing
    target edges get a tiny length so the solve stays in the original target.
    """
    lift = dec.lift
    dom = lift.domain
    pinned = {x for e in dec.sigma1 for x in dom.ends(e)}
    if all(dom.is_marked(v) or v in pinned for v in dom.vertex_ids):
        return lift
    top = max(fixed.values())
    ell = EdgeScalars("length", {e: (TINY_LENGTH * top if e in dec.sigma2 else float(x))
                                 for e, x in fixed.items()})
    try:
        res = harmonic_solve(lift, alpha1, ell, pinned=pinned)
    except HarmonicError:
        return lift
    moved = res.map
    if any(not same_point(moved.vertex_images[v], lift.vertex_images[v]) for v in pinned):
        return lift
    return moved


def _subgraph(g: MarkedGraph, edges: Sequence[str], extra_marks: set[str]) -> MarkedGraph:
    used = {x for e in edges for x in g.ends(e)}
    verts = tuple(Vertex(v.id, v.marked or v.id in extra_marks) for v in g.vertices if v.id in used)
    return MarkedGraph(verts, tuple(ed for ed in g.edges if ed.id in set(edges)))


def restricted_class(dec: Decomposition, phi: GraphMap) -> Optional[GraphMap]:
    """The lift restricted to the collapsing parts, with the junction vertices marked."""
    if not dec.sigma1:
        return None
    dom, cod, lift = phi.domain, phi.codomain, dec.lift
    live1 = [e for e in dec.sigma1 if lift.edge_path(e).word]
    if not live1:
        return None
    touch1 = {x for e in dec.delta1 for x in dom.ends(e)}
    touch2 = {x for e in dec.delta2 for x in cod.ends(e)}
    s1 = _subgraph(dom, dec.sigma1, touch1)
    images = {v: lift.vertex_images[v] for v in s1.vertex_ids}
    extra2 = set(touch2) | {images[v].vertex for v in s1.marked if images[v].is_vertex}
    s2_edges = sorted(set(dec.sigma2) | {edge_of(oe) for e in dec.sigma1 for oe in lift.edge_path(e).word})
    s2 = _subgraph(cod, s2_edges, extra2)
    for v, p in images.items():
        if p.is_vertex and not s2.has_vertex(p.vertex):
            s2 = MarkedGraph(s2.vertices + (Vertex(p.vertex, True),), s2.edges)
    return realize(s1, s2, images, {e: lift.edge_path(e) for e in s1.edge_ids}, check=False)


# ---------------------------------------------------------------- witnesses

@dataclass
class EmbCertificate:
    value: float
    psi: Optional[GraphMap]
    delta1: tuple
    delta2: tuple
    curve: Optional[MultiCurve]
    lengths: Mapping[str, float]
    report: dict
    converged: bool
    lower: float
    upper: float
    trace: Optional[IterationTrace] = None
    restarts: int = 0
    depth: int = 0

    def to_json(self) -> dict:
        from .graph_maps import map_to_dict
        return {
            "value": self.value,
            "converged": self.converged,
            "bounds": {"lower": self.lower, "upper": self.upper},
            "filling": {"domain": list(self.delta1), "target": list(self.delta2)},
            "lengths": dict(sorted(self.lengths.items())),
            "curve": self.curve.to_json() if self.curve is not None else None,
            "map": map_to_dict(self.psi) if self.psi is not None else None,
            "report": self.report,
            "restarts": self.restarts,
            "depth": self.depth,
        }


def _exact_weights(t_graph: MarkedGraph, weights: Mapping[str, float], gates, rel: float = 1e-9) -> dict:
    """Rational weights near ``weights`` satisfying the gate equalities that hold numerically."""
    edges = list(t_graph.edge_ids)
    idx = {e: i for i, e in enumerate(edges)}
    wr = [Fraction(weights[e]).limit_denominator(10 ** 9) for e in edges]
    scale = max((float(x) for x in weights.values()), default=1.0) or 1.0
    rows = []
    for v in t_graph.vertex_ids:
        if t_graph.is_marked(v):
            continue
        gs = gates[v]
        gw = [sum(float(weights[edge_of(d)]) for d in g) for g in gs]
        total = sum(gw)
        for k, x in enumerate(gw):
            if abs(total - 2 * x) < rel * scale * 10 + 1e-12:
                row = [Fraction(0)] * len(edges)
                for j, g in enumerate(gs):
                    for d in g:
                        row[idx[edge_of(d)]] += 1 if j == k else -1
                rows.append(row)
    if not rows:
        return dict(zip(edges, wr))
    A = _independent_rows(rows)
    # w' = wr - A^T (A A^T)^{-1} A wr, computed exactly
    AAT = [[sum(a * b for a, b in zip(r1, r2)) for r2 in A] for r1 in A]
    rhs = [sum(a * b for a, b in zip(r, wr)) for r in A]
    y = _solve_exact(AAT, rhs)
    out = [wr[i] - sum(A[k][i] * y[k] for k in range(len(A))) for i in range(len(edges))]
    return {e: max(Fraction(0), x) for e, x in zip(edges, out)}


def _independent_rows(rows):
    basis, red = [], []
    for r in rows:
        v = list(r)
        for b, piv in red:
            if v[piv] != 0:
                c = v[piv] / b[piv]
                v = [x - c * y for x, y in zip(v, b)]
        piv = next((i for i, x in enumerate(v) if x != 0), None)
        if piv is not None:
            basis.append(r)
            red.append((v, piv))
    return basis


def _solve_exact(A, b):
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        p = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[p] = M[p], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def build_witnesses(step: StepRecord, lengths: Mapping[str, float], alpha1: EdgeScalars,
                    alpha2: EdgeScalars, dec: Decomposition, phi: GraphMap,
                    sub: Optional["EmbCertificate"] = None) -> tuple[GraphMap, Optional[MultiCurve]]:
    """The filling map and a saturating weighted multi-curve on the tension train track."""
    res = step.harmonic
    ell = EdgeScalars("length", {e: float(x) for e, x in lengths.items()})
    if dec.lift is None:
        psi = realize(phi.domain, phi.codomain, res.map.vertex_images, res.map.edge_paths, ell, check=False)
    else:
        psi = _assemble(dec, phi, ell, sub)
    gates = gates_from_map(res.map if dec.lift is None else dec.lift, dec.delta1)
    tg = _subgraph(phi.domain, [e for e in dec.delta1 if step.weights[e] > 0], set())
    if not tg.edge_ids:
        return psi, None
    tg_gates = {v: tuple(frozenset(d for d in g if edge_of(d) in set(tg.edge_ids)) for g in gates[v])
                for v in tg.vertex_ids}
    tg_gates = {v: tuple(g for g in gs if g) for v, gs in tg_gates.items()}
    w = _exact_weights(tg, step.weights, tg_gates)
    t = TrainTrack(tg, w, tg_gates)
    if check_train_track(t):
        return psi, None
    try:
        c = tt_to_multicurve(t)
        smallest = min(comp.weight for comp in c.components)
        return psi, c.scaled(1 / smallest) if smallest > 0 else c
    except (AssertionError, ValueError) as exc:
        log.warning("multi-curve extraction failed: %s", exc)
        return psi, None


def _assemble(dec: Decomposition, phi: GraphMap, ell: EdgeScalars, sub: Optional["EmbCertificate"]) -> GraphMap:
    lift = dec.lift
    pieces = {}
    flat = {e: (ell[e] if ell[e] > 0 else 0.0) for e in phi.codomain.edge_ids}
    base = realize(phi.domain, phi.codomain, lift.vertex_images, lift.edge_paths,
                   EdgeScalars("length", flat), check=False)
    for e in phi.domain.edge_ids:
        pieces[e] = base.pieces[e]
    if sub is not None and sub.psi is not None:
        for e, ps in sub.psi.pieces.items():
            pieces[e] = ps
    return make_map(phi.domain, phi.codomain, lift.vertex_images, pieces, False, check=False)


def _image_length(c: MultiCurve, f: GraphMap, lengths: Mapping[str, float]) -> float:
    total = 0.0
    for comp in c.components:
        segs = []
        for oe in comp.word:
            segs.extend(f.image_of_oriented(oe))
        red = cyclic_reduce_segments(segs) if comp.kind == "loop" else reduce_segments(segs)
        total += float(comp.weight) * sum(float(s.span) * float(lengths[edge_of(s.oe)]) for s in red)
    return total


def verify_tight(curve: MultiCurve, psi: GraphMap, alpha1: EdgeScalars, alpha2: EdgeScalars,
                 lengths: Mapping[str, float], tol: float = 1e-6) -> dict:
    """Multiplicativity checks for curve -> domain -> target -> (target with ``lengths``)."""
    el_c = float(curve_energy(curve, alpha1))
    emb = float(energy(psi, alpha1, alpha2, 2, 2))
    dir_f = sum(float(lengths[e]) ** 2 / float(alpha2[e]) for e in psi.codomain.edge_ids)
    image = _image_length(curve, psi, lengths)
    el_image = float(curve_energy(push_curve(curve, psi), alpha2))
    chain = math.sqrt(el_c * emb * dir_f)
    first = el_c * emb
    second = el_image * dir_f
    rel = lambda a, b: abs(a - b) / max(1.0, abs(a), abs(b))
    report = {
        "el_curve": el_c, "emb_map": emb, "dir_target": dir_f, "image_length": image,
        "el_image": el_image,
        "chain_gap": rel(chain, image),
        "curve_map_gap": rel(first, el_image),
        "map_target_gap": rel(second, image * image),
    }
    report["tight"] = all(report[k] <= tol for k in ("chain_gap", "curve_map_gap", "map_target_gap"))
    return report


# ---------------------------------------------------------------- driver

def compute_emb(phi: GraphMap, alpha1: EdgeScalars, alpha2: EdgeScalars, tol: float = 1e-10,
                max_iters: int = 2000, seed: Optional[int] = None, depth: int = 0,
                trace_ratios: bool = False, ell0: Optional[Mapping[str, float]] = None) -> EmbCertificate:
    """Embedding energy of the class of ``phi`` with a filling map and a witness curve."""
    if depth > len(phi.domain.edge_ids) + 1:
        raise EmbError("recursion too deep")
    phi, dead = _essential_class(reduce_map(phi))
    if not phi.codomain.edge_ids:
        return EmbCertificate(0.0, phi, (), (), None, {}, {"trivial": True}, True, 0.0, 0.0, depth=depth)
    a2 = EdgeScalars("alpha", {e: alpha2[e] for e in phi.codomain.edge_ids})
    start = ell0
    ell0 = {e: 1.0 for e in phi.codomain.edge_ids}
    if start is not None:
        ell0 = {e: float(start.get(e, 0.0)) for e in ell0}
    elif seed is not None:
        rng = np.random.default_rng(seed)
        ell0 = {e: float(x) for e, x in zip(ell0, rng.uniform(0.5, 1.5, len(ell0)))}
    restarts = 0
    best_value = -math.inf
    while True:
        tr = iterate_to_fixed(ell0, phi, alpha1, a2, tol, max_iters, trace_ratios)
        fixed = tr.fixed
        step = iter_step(fixed, phi, alpha1, a2)
        value = step.ratio
        dec = boundary_decompose(fixed, phi, step)
        if dec.sigma2:
            # re-evaluate exactly on the boundary face
            fixed = {e: (0.0 if e in dec.sigma2 else x) for e, x in fixed.items()}
            fixed = _normalize(fixed)
            step = iter_step(fixed, phi, alpha1, a2)
            value = step.ratio
            dec = boundary_decompose(fixed, phi, step)
        sub = None
        if dec.lift is not None:
            dec = replace(dec, lift=_settle_tense_part(dec, fixed, alpha1, a2))
            cls = restricted_class(dec, phi)
            if cls is not None:
                s_a1 = EdgeScalars("alpha", {e: alpha1[e] for e in cls.domain.edge_ids})
                s_a2 = EdgeScalars("alpha", {e: a2[e] for e in cls.codomain.edge_ids})
                sub = compute_emb(cls, s_a1, s_a2, tol, max_iters, seed, depth + 1)
                if sub.value >= value - 1e-9 and restarts < 2 * len(phi.codomain.edge_ids) + 2:
                    # the fixed point is not a maximum; nudge toward the smaller problem's lengths
                    nudge = {e: 0.0 for e in fixed}
                    nudge.update({e: float(x) for e, x in sub.lengths.items() if e in nudge})
                    total = sum(nudge.values()) or 1.0
                    ell0 = {e: fixed[e] + 1e-3 * nudge[e] / total for e in fixed}
                    restarts += 1
                    if value <= best_value + 1e-12:
                        log.warning("restart did not increase the value")
                    best_value = max(best_value, value)
                    continue
        break
    psi, curve = build_witnesses(step, fixed, alpha1, a2, dec, phi, sub)
    upper = float(energy(psi, alpha1, a2, 2, 2))
    lower = 0.0
    report: dict = {"dead_target_edges": list(dead), "exact_solves": tr.exact_solves,
                    "iterations": len(tr.steps), "sigma_value": sub.value if sub else None}
    if curve is not None:
        el_c = float(curve_energy(curve, alpha1))
        lower = float(curve_energy(push_curve(curve, psi), a2)) / el_c if el_c else 0.0
        report["tight"] = verify_tight(curve, psi, alpha1, a2, fixed)
    converged = tr.converged and abs(upper - value) <= 1e-6 * max(1.0, value) and \
        (curve is None or abs(lower - value) <= 1e-6 * max(1.0, value))
    if not converged:
        lb, _ = sf_el_lower_bound(psi, alpha1, a2) if curve is None else (lower, curve)
        lower = max(lower, float(lb))
    return EmbCertificate(value, psi, dec.delta1, dec.delta2, curve, fixed, report, converged,
                          lower, upper, tr, restarts, depth)
