"""Exact cut, flow and train-track computations on weighted marked graphs.

All arithmetic is done with :class:`fractions.Fraction`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .curves import ARC, LOOP, Component, MultiCurve, edge_counts, enumerate_candidates, push_curve
from .graph_core import (
    Edge,
    EdgeScalars,
    GraphValidationError,
    MarkedGraph,
    Vertex,
    edge_of,
    reverse,
    sign_of,
)
from .graph_maps import (
    EdgePath,
    GraphMap,
    Point,
    Segment,
    multiplicity,
    point_along,
    realize,
    reduce_map,
    start_fraction,
)


def _w(w: Mapping[str, Fraction] | EdgeScalars, e: str) -> Fraction:
    return Fraction(w[e])


# ---------------------------------------------------------------- max flow

def max_flow(g: MarkedGraph, w, sources: Iterable[str], sinks: Iterable[str]) -> tuple[Fraction, set[str], dict]:
    """Augmenting-path max flow on the undirected graph ``g`` with capacities ``w``.

    Returns the flow value, the set of vertices reachable from the sources in
    the residual graph (the minimal cut closest to the sources), and the flow
    on each edge (positive in the ``+e`` direction).
    """
    src, snk = set(sources), set(sinks)
    if src & snk:
        raise ValueError("sources and sinks overlap")
    flow = {e: Fraction(0) for e in g.edge_ids}
    adj: dict[str, list[tuple[str, str]]] = {v: [] for v in g.vertex_ids}
    for e in sorted(g.edge_ids):
        a, b = g.ends(e)
        if a == b:
            continue
        adj[a].append(("+" + e, b))
        adj[b].append(("-" + e, a))

    def residual(oe: str) -> Fraction:
        e = oe[1:]
        return _w(w, e) - flow[e] if oe[0] == "+" else _w(w, e) + flow[e]

    def bfs():
        prev: dict[str, Optional[tuple[str, str]]] = {s: None for s in sorted(src)}
        q = deque(sorted(src))
        while q:
            v = q.popleft()
            for oe, u in adj[v]:
                if u not in prev and residual(oe) > 0:
                    prev[u] = (v, oe)
                    if u in snk:
                        return prev, u
                    q.append(u)
        return prev, None

    total = Fraction(0)
    while snk:
        prev, t = bfs()
        if t is None:
            break
        path = []
        v = t
        while prev[v] is not None:
            u, oe = prev[v]
            path.append(oe)
            v = u
        amount = min(residual(oe) for oe in path)
        for oe in path:
            flow[oe[1:]] += amount if oe[0] == "+" else -amount
        total += amount
    prev, _ = bfs()
    return total, set(prev), flow


# ---------------------------------------------------------------- cuts

@dataclass(frozen=True)
class Cut:
    vertices: frozenset
    edges: tuple[str, ...]
    weight: Fraction
    mark: Optional[str] = None

    def to_json(self) -> dict:
        return {"mark": self.mark, "vertices": sorted(self.vertices), "edges": list(self.edges),
                "weight": _fmt(self.weight)}


def _fmt(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def cut_edges(g: MarkedGraph, s: Iterable[str]) -> tuple[str, ...]:
    s = set(s)
    return tuple(e for e in g.edge_ids if (g.ends(e)[0] in s) != (g.ends(e)[1] in s))


def cut_weight(g: MarkedGraph, w, s: Iterable[str]) -> Fraction:
    return sum((_w(w, e) for e in cut_edges(g, s)), Fraction(0))


def make_cut(g: MarkedGraph, w, s: Iterable[str], mark: Optional[str] = None) -> Cut:
    s = frozenset(s)
    return Cut(s, cut_edges(g, s), cut_weight(g, w, s), mark)


def _mark_of(g: MarkedGraph, i) -> str:
    marks = g.marked
    if isinstance(i, int):
        if not 0 <= i < len(marks):
            raise ValueError(f"node index {i} out of range")
        return marks[i]
    if i not in marks:
        raise ValueError(f"{i!r} is not a marked vertex")
    return i


def min_vertex_cut(g: MarkedGraph, w, i, force_in: Iterable[str] = (), force_out: Iterable[str] = ()) -> Cut:
    """Minimal cut containing mark ``i`` and no other mark; the one closest to ``i``."""
    m = _mark_of(g, i)
    others = set(g.marked) - {m}
    _, side, _ = max_flow(g, w, {m, *force_in}, others | set(force_out))
    return make_cut(g, w, side, m)


def mincut_values(g: MarkedGraph, w) -> dict[str, Fraction]:
    return {m: min_vertex_cut(g, w, m).weight for m in g.marked}


def is_nested(a: Cut, b: Cut) -> bool:
    x, y = a.vertices, b.vertices
    return not (x & y) or x <= y or y <= x


# ---------------------------------------------------------------- stars

def star_graph(marks: Sequence[str]) -> MarkedGraph:
    verts = [Vertex("center", False)] + [Vertex(f"s_{m}", True) for m in marks]
    edges = [Edge(f"leg_{m}", (f"s_{m}", "center")) for m in marks]
    return MarkedGraph(tuple(verts), tuple(edges))


def _star_path(pa: str, pb: str) -> tuple[str, ...]:
    """Reduced word in the star from vertex ``pa`` to ``pb``."""
    if pa == pb:
        return ()
    word = []
    if pa != "center":
        word.append("+leg_" + pa[2:])
    if pb != "center":
        word.append("-leg_" + pb[2:])
    return tuple(word)


def star_cuts(g: MarkedGraph, w) -> dict[str, Cut]:
    """Disjoint minimal cuts ``S_i' = S_i minus the other S_j``."""
    closest = {m: min_vertex_cut(g, w, m) for m in g.marked}
    out = {}
    for m, c in closest.items():
        rest = set().union(*(closest[o].vertices for o in closest if o != m)) if len(closest) > 1 else set()
        s = c.vertices - rest
        cut = make_cut(g, w, s, m)
        if cut.weight != c.weight:
            raise AssertionError("difference of minimal cuts is not minimal")
        out[m] = cut
    return out


def taut_to_star(g: MarkedGraph, w) -> GraphMap:
    """Taut map from a ``k``-marked weighted graph to the ``k``-leg star."""
    star = star_graph(g.marked)
    cuts = star_cuts(g, w)
    where = {v: "center" for v in g.vertex_ids}
    for m, c in cuts.items():
        for v in c.vertices:
            where[v] = f"s_{m}"
    vi = {v: Point.at_vertex(p) for v, p in where.items()}
    paths = {}
    for e in g.edge_ids:
        a, b = g.ends(e)
        paths[e] = EdgePath(_star_path(where[a], where[b]), Fraction(0), Fraction(1))
    return realize(g, star, vi, paths)


# ---------------------------------------------------------------- minimal weights / nested cuts

def minimize_weights(g: MarkedGraph, w) -> dict[str, Fraction]:
    """Lower each edge weight as far as possible without changing any ``mincut_i``."""
    w0 = {e: _w(w, e) for e in g.edge_ids}
    target = mincut_values(g, w0)
    for e in sorted(g.edge_ids):
        if w0[e] == 0:
            continue
        a, b = g.ends(e)
        if a == b:
            w0[e] = Fraction(0)
            continue
        trial = dict(w0)
        trial[e] = Fraction(0)
        need = Fraction(0)
        for m, val in target.items():
            drop = val - min_vertex_cut(g, trial, m).weight
            need = max(need, drop)
        w0[e] = min(w0[e], need)
    return w0


def is_minimal(g: MarkedGraph, w) -> bool:
    return all(_w(w, e) == 0 or _cut_through(g, w, e) is not None for e in g.edge_ids)


def _cut_through(g: MarkedGraph, w, e: str, marks: Optional[Iterable[str]] = None) -> Optional[Cut]:
    """Some minimal vertex cut whose cut-set contains ``e``."""
    a, b = g.ends(e)
    if a == b:
        return None
    for m in (marks if marks is not None else g.marked):
        best = min_vertex_cut(g, w, m).weight
        others = set(g.marked) - {m}
        for x, y in ((a, b), (b, a)):
            if x in others or y == m:
                continue
            c = min_vertex_cut(g, w, m, force_in={x}, force_out={y})
            if c.weight == best:
                return c
    return None


def complete_nested_cuts(g: MarkedGraph, w, seed: Sequence[Cut] = ()) -> list[Cut]:
    """Extend a nested family of minimal cuts until every positive edge is cut.

    Nesting is repaired in insertion order; for cuts of different marks the
    difference move is tried first, then (same mark) intersection or union.
    """
    if not is_minimal(g, w):
        raise ValueError("weights are not minimal")
    family = list(seed)
    minimum = mincut_values(g, w)
    for c in family:
        if c.weight != minimum[c.mark]:
            raise ValueError("seed contains a non-minimal cut")
    for e in sorted(g.edge_ids):
        if _w(w, e) == 0 or any(e in c.edges for c in family):
            continue
        cand = _nested_cut_through(g, w, e, family, minimum)
        if cand is None:
            raise AssertionError(f"could not find a nested minimal cut through {e!r}")
        family.append(cand)
    return family


def _nested_cut_through(g, w, e, family, minimum) -> Optional[Cut]:
    start = _cut_through(g, w, e)
    if start is None:
        return None
    queue = [start]
    seen = set()
    while queue:
        c = queue.pop(0)
        key = (c.mark, c.vertices)
        if key in seen:
            continue
        seen.add(key)
        bad = next((t for t in family if not is_nested(c, t)), None)
        if bad is None:
            return c
        moves = []
        if bad.mark != c.mark:
            moves.append((c.mark, c.vertices - bad.vertices))
            moves.append((bad.mark, bad.vertices - c.vertices))
        else:
            moves.append((c.mark, c.vertices & bad.vertices))
            moves.append((c.mark, c.vertices | bad.vertices))
        for mark, verts in moves:
            cand = make_cut(g, w, verts, mark)
            if cand.weight == minimum[mark] and e in cand.edges:
                queue.append(cand)
        if len(seen) > 10000:
            break
    return None


# ---------------------------------------------------------------- train tracks

@dataclass(frozen=True)
class TrainTrack:
    """Weighted graph with a partition of the directions at each vertex into gates."""

    graph: MarkedGraph
    weights: Mapping[str, Fraction]
    gates: Mapping[str, tuple[frozenset, ...]]

    def gate_of(self, d: str) -> int:
        v = self.graph.tail(d)
        for k, gate in enumerate(self.gates[v]):
            if d in gate:
                return k
        raise KeyError(d)

    def gate_weights(self, v: str, w: Optional[Mapping[str, Fraction]] = None) -> list[Fraction]:
        w = self.weights if w is None else w
        return [sum((w[edge_of(d)] for d in gate), Fraction(0)) for gate in self.gates[v]]


def triangle_slack(weights: Sequence) -> Fraction:
    """Minimum over gates of (sum of the other gates) - (this gate)."""
    total = sum(weights, Fraction(0) if not weights or isinstance(weights[0], Fraction) else 0.0)
    return min((total - 2 * x for x in weights), default=Fraction(0))


def check_train_track(t: TrainTrack) -> list[str]:
    errs = []
    g = t.graph
    for v in g.vertex_ids:
        gates = t.gates.get(v, ())
        dirs = [d for gate in gates for d in gate]
        if sorted(dirs) != sorted(g.directions(v)):
            errs.append(f"gates at {v!r} do not partition its directions")
            continue
        if g.is_marked(v):
            continue
        gw = t.gate_weights(v)
        if any(x != 0 for x in gw):
            if sum(1 for x in gw if x > 0) < 2:
                errs.append(f"vertex {v!r} has fewer than two weighted gates")
            elif triangle_slack(gw) < 0:
                errs.append(f"triangle inequality fails at {v!r}")
    for e, x in t.weights.items():
        if x < 0:
            errs.append(f"negative weight on {e!r}")
    return errs


def _legal_partition(t: TrainTrack, w: Mapping[str, Fraction], v: str) -> Optional[list[set[str]]]:
    """Effective gates at ``v`` after dropping zero edges and smoothing a dominating gate."""
    gates = [{d for d in gate if w[edge_of(d)] > 0} for gate in t.gates[v]]
    gates = [x for x in gates if x]
    gw = [sum((w[edge_of(d)] for d in gate), Fraction(0)) for gate in gates]
    total = sum(gw, Fraction(0))
    for k, x in enumerate(gw):
        if 2 * x == total and len(gates) > 2:
            return [gates[k], set().union(*(gates[j] for j in range(len(gates)) if j != k))]
    return gates


def tt_to_multicurve(t: TrainTrack) -> MultiCurve:
    """Weighted multi-curve carried by ``t`` whose crossing counts equal the weights."""
    errs = check_train_track(t)
    if errs:
        raise GraphValidationError(errs)
    g = t.graph
    w = {e: Fraction(t.weights.get(e, 0)) for e in g.edge_ids}
    comps: list[Component] = []
    for _ in range(10 * (len(g.edge_ids) + len(g.vertex_ids)) ** 2 + 100):
        if all(x == 0 for x in w.values()):
            break
        parts = {v: _legal_partition(t, w, v) for v in g.vertex_ids if not g.is_marked(v)}
        kind, word = _follow(g, w, parts)
        counts: dict[str, int] = {}
        for oe in word:
            counts[edge_of(oe)] = counts.get(edge_of(oe), 0) + 1
        eps = min(w[e] / n for e, n in counts.items())
        # keep the triangle inequalities at every unmarked vertex
        passes = _gate_passes(t, word, kind)
        for v, used in passes.items():
            gw = t.gate_weights(v, w)
            total_w, total_u = sum(gw, Fraction(0)), sum(used, 0)
            for x, u in zip(gw, used):
                slack = total_w - 2 * x
                rate = total_u - 2 * u
                if rate > 0:
                    eps = min(eps, slack / rate)
        if eps <= 0:
            raise AssertionError("peeling made no progress")
        for e, n in counts.items():
            w[e] -= eps * n
        comps.append(Component(kind, tuple(word), eps))
    else:
        raise AssertionError("peeling did not terminate")
    return _merge(comps)


def _follow(g: MarkedGraph, w, parts) -> tuple[str, list[str]]:
    start = None
    for v in g.vertex_ids:
        if g.is_marked(v):
            start = next((d for d in sorted(g.directions(v)) if w[edge_of(d)] > 0), None)
            if start is not None:
                break
    if start is None:
        start = next(d for d in sorted(g.oriented_edges()) if w[edge_of(d)] > 0)
    word = [start]
    seen = {start: 0}
    while True:
        last = word[-1]
        v = g.head(last)
        if g.is_marked(v):
            return ARC, word
        back = reverse(last)
        gates = parts[v]
        mine = next(k for k, gate in enumerate(gates) if back in gate)
        nxt = min(d for k, gate in enumerate(gates) if k != mine for d in gate)
        if nxt in seen:
            return LOOP, word[seen[nxt]:]
        seen[nxt] = len(word)
        word.append(nxt)


def _gate_passes(t: TrainTrack, word: list[str], kind: str) -> dict[str, list[int]]:
    g = t.graph
    out: dict[str, list[int]] = {}
    turns = list(zip(word, word[1:]))
    if kind == LOOP:
        turns.append((word[-1], word[0]))
    for a, b in turns:
        v = g.head(a)
        if g.is_marked(v):
            continue
        used = out.setdefault(v, [0] * len(t.gates[v]))
        used[t.gate_of(reverse(a))] += 1
        used[t.gate_of(b)] += 1
    return out


def _merge(comps: list[Component]) -> MultiCurve:
    from .curves import canonical_arc, canonical_loop
    acc: dict[tuple, Fraction] = {}
    order = []
    for c in comps:
        key = (c.kind, canonical_loop(c.word) if c.kind == LOOP else canonical_arc(c.word))
        if key not in acc:
            order.append(key)
            acc[key] = Fraction(0)
        acc[key] += c.weight
    return MultiCurve(tuple(Component(k, word, acc[(k, word)]) for k, word in order))


def max_crossings(c: MultiCurve) -> int:
    worst = 0
    for comp in c.components:
        counts: dict[str, int] = {}
        for oe in comp.word:
            counts[edge_of(oe)] = counts.get(edge_of(oe), 0) + 1
        worst = max(worst, max(counts.values(), default=0))
    return worst


def gates_from_map(f: GraphMap, edges: Optional[Iterable[str]] = None) -> dict[str, tuple[frozenset, ...]]:
    """Group the directions at each domain vertex by their image direction.

    Directions along edges with constant image (or outside ``edges``) each form
    their own singleton gate.
    """
    keep = set(f.domain.edge_ids if edges is None else edges)
    gates: dict[str, tuple[frozenset, ...]] = {}
    for v in f.domain.vertex_ids:
        groups: dict[str, set[str]] = {}
        singles = []
        for d in f.domain.directions(v):
            segs = f.image_of_oriented(d) if edge_of(d) in keep else []
            path = EdgePath.from_segments(_reduce(segs))
            if path.word:
                groups.setdefault(path.word[0], set()).add(d)
            else:
                singles.append(frozenset({d}))
        gates[v] = tuple(frozenset(s) for _, s in sorted(groups.items())) + tuple(singles)
    return gates


def _reduce(segs):
    from .graph_maps import reduce_segments
    return reduce_segments(segs)


# ---------------------------------------------------------------- flows

@dataclass(frozen=True)
class FlowDecomposition:
    flows: Mapping[tuple[str, str], MultiCurve]
    cuts: Mapping[str, Cut]
    weights: Mapping[str, Fraction] = field(default_factory=dict)

    def flow_value(self, i: str, j: str) -> Fraction:
        key = (i, j) if (i, j) in self.flows else (j, i)
        c = self.flows.get(key)
        return sum((x.weight for x in c.components), Fraction(0)) if c else Fraction(0)

    def to_json(self) -> dict:
        return {
            "flows": [{"pair": list(k), "value": _fmt(self.flow_value(*k)),
                       "arcs": [{"word": list(x.word), "weight": _fmt(x.weight)} for x in c.components]}
                      for k, c in sorted(self.flows.items())],
            "cuts": {m: c.to_json() for m, c in sorted(self.cuts.items())},
        }


def _subgraph(g: MarkedGraph, edges: Iterable[str]) -> MarkedGraph:
    keep = set(edges)
    return MarkedGraph(g.vertices, tuple(e for e in g.edges if e.id in keep))


def vertex_flows(g: MarkedGraph, w) -> FlowDecomposition:
    """Flows between marks carried by ``w`` whose totals equal the minimal cut weights."""
    w = {e: _w(w, e) for e in g.edge_ids}
    marks = g.marked
    star = star_cuts(g, w)
    w0 = minimize_weights(g, w)
    support = [e for e in g.edge_ids if w0[e] > 0]
    sub = _subgraph(g, support)
    w0s = {e: w0[e] for e in support}
    seed = [make_cut(sub, w0s, c.vertices, c.mark) for c in star.values()]
    mins = mincut_values(sub, w0s)
    seed = [c for c in seed if c.weight == mins[c.mark]]
    seed = [c for k, c in enumerate(seed) if all(is_nested(c, d) for d in seed[:k])]
    family = complete_nested_cuts(sub, w0s, seed)
    tt = _train_track_from_cuts(sub, w0s, family)
    curve = tt_to_multicurve(tt)
    flows: dict[tuple[str, str], list[Component]] = {}
    for comp in curve.components:
        if comp.kind != ARC:
            continue
        a, b = sub.tail(comp.word[0]), sub.head(comp.word[-1])
        key = (a, b) if marks.index(a) <= marks.index(b) else (b, a)
        word = comp.word if key[0] == a else tuple(reverse(x) for x in reversed(comp.word))
        flows.setdefault(key, []).append(Component(ARC, word, comp.weight))
    return FlowDecomposition({k: MultiCurve(tuple(v)) for k, v in flows.items()},
                             {m: min_vertex_cut(g, w, m) for m in marks}, w)


def _train_track_from_cuts(g: MarkedGraph, w, family: list[Cut]) -> TrainTrack:
    """Train track from a complete nested family of minimal cuts (star-map construction)."""
    marks = g.marked
    level: dict[str, tuple[str, int]] = {}
    chains: dict[str, list[frozenset]] = {}
    for m in marks:
        sets = sorted({c.vertices for c in family if c.mark == m} | {frozenset({m})}, key=len)
        chains[m] = sets
    for v in g.vertex_ids:
        level[v] = ("center", 0)
        for m in marks:
            for j, s in enumerate(chains[m]):
                if v in s:
                    level[v] = (m, len(chains[m]) - j)
                    break
            if level[v][0] != "center":
                break
    # position along a single path through the star: (leg, height) with height
    # counted from the center; images of edges determine gates
    gates: dict[str, tuple[frozenset, ...]] = {}
    for v in g.vertex_ids:
        groups: dict[tuple, set[str]] = {}
        for d in g.directions(v):
            u = g.head(d)
            groups.setdefault(_star_direction(level[v], level[u]), set()).add(d)
        gates[v] = tuple(frozenset(s) for _, s in sorted(groups.items(), key=lambda kv: str(kv[0])))
    return TrainTrack(g, dict(w), gates)


def _star_direction(here: tuple[str, int], there: tuple[str, int]) -> tuple:
    """Initial direction in the star of the reduced path from ``here`` to ``there``."""
    leg, h = here
    leg2, h2 = there
    if leg == "center":
        return ("out", leg2) if leg2 != "center" else ("stay",)
    if leg2 == leg:
        if h2 > h:
            return ("out",)
        if h2 < h:
            return ("in",)
        return ("stay",)
    return ("in",)


def check_flows(g: MarkedGraph, w, fd: FlowDecomposition) -> list[str]:
    """Verify the carrying constraint and the flow/cut identity exactly."""
    errs = []
    total: dict[str, Fraction] = {e: Fraction(0) for e in g.edge_ids}
    for c in fd.flows.values():
        for e, x in edge_counts(c).items():
            total[e] += x
    for e in g.edge_ids:
        if total[e] > _w(w, e):
            errs.append(f"edge {e!r} carries {total[e]} > {_w(w, e)}")
    for m in g.marked:
        s = sum((fd.flow_value(m, o) for o in g.marked if o != m), Fraction(0))
        if s != fd.cuts[m].weight:
            errs.append(f"flow out of {m!r} is {s}, cut weight {fd.cuts[m].weight}")
    return errs


# ---------------------------------------------------------------- taut maps to general targets

def _point_key(p: Point) -> tuple:
    return ("v", p.vertex) if p.is_vertex else ("e", p.edge, p.offset)


def _local_model(f: GraphMap, y: Point, w) -> tuple[MarkedGraph, dict, dict[str, Fraction]]:
    """Weighted graph of strand germs at the value ``y``; marks are the directions at ``y``."""
    from .graph_maps import directions_at, same_point
    cod = f.codomain
    dirs = directions_at(cod, y)
    fixed = "@fixed"
    here = [v for v in f.domain.vertex_ids if same_point(f.vertex_images[v], y)]
    node = {v: (fixed if f.domain.is_marked(v) else v) for v in here}
    edges: list[tuple[str, str, Fraction]] = []
    paths = f.edge_paths
    for e in f.domain.edge_ids:
        a, b = f.domain.ends(e)
        p = paths[e]
        we = _w(w, e)
        if not p.word:
            if a in node and b in node and node[a] != node[b]:
                edges.append((node[a], node[b], we))
            continue
        if a in node:
            edges.append((node[a], "d" + p.word[0], we))
        if b in node:
            edges.append((node[b], "d" + p.reversed().word[0], we))
        segs = p.segments()
        for s1, s2 in zip(segs, segs[1:]):
            if y.is_vertex and cod.head(s1.oe) == y.vertex:
                edges.append(("d" + reverse(s1.oe), "d" + s2.oe, we))
        if not y.is_vertex:
            for s in segs:
                if edge_of(s.oe) != y.edge:
                    continue
                pos = y.offset if sign_of(s.oe) > 0 else 1 - y.offset
                if s.a < pos < s.b:
                    edges.append(("d" + reverse(s.oe), "d" + s.oe, we))
    verts = sorted({x for a, b, _ in edges for x in (a, b)} | {"d" + d for d in dirs} | set(node.values()))
    marks = {"d" + d for d in dirs} | ({fixed} if fixed in node.values() else set())
    vs = tuple(Vertex(v, v in marks) for v in verts)
    es = tuple(Edge(f"l{k}", (a, b)) for k, (a, b, _) in enumerate(edges))
    lw = {f"l{k}": x for k, (_, _, x) in enumerate(edges)}
    return MarkedGraph(vs, es), node, lw


def _untaut_group(f: GraphMap, y: Point, w) -> Optional[tuple[set[str], str]]:
    local, node, lw = _local_model(f, y, w)
    for m in sorted(x for x in local.marked if x.startswith("d")):
        current = sum((lw[e] for e in local.edge_ids if m in local.ends(e) and local.ends(e)[0] != local.ends(e)[1]),
                      Fraction(0))
        cut = min_vertex_cut(local, lw, m)
        if cut.weight < current:
            group = {v for v, n in node.items() if n in cut.vertices and n != "@fixed"}
            if group:
                return group, m[1:]
    return None


def _move_group(f: GraphMap, group: set[str], d: str) -> GraphMap:
    """Slide the images of ``group`` along direction ``d`` to the next singular value."""
    from .graph_maps import reduce_segments
    cod = f.codomain
    y = f.vertex_images[next(iter(group))]
    s0 = start_fraction(y, d)
    stop = Fraction(1)
    paths = f.edge_paths
    for v in group:
        for oe in f.domain.directions(v):
            p = paths[edge_of(oe)]
            if sign_of(oe) < 0:
                p = p.reversed()
            if p.word and p.word[0] == d:
                stop = min(stop, p.segments()[0].b)
    e = edge_of(d)
    for u, p in f.vertex_images.items():
        if not p.is_vertex and p.edge == e and u not in group:
            pos = p.offset if sign_of(d) > 0 else 1 - p.offset
            if s0 < pos < stop:
                stop = pos
    newpt = point_along(cod, d, stop)
    back = Segment(reverse(d), 1 - stop, 1 - s0)
    vi = dict(f.vertex_images)
    for v in group:
        vi[v] = newpt
    new_paths = {}
    for ed in f.domain.edge_ids:
        a, b = f.domain.ends(ed)
        segs = paths[ed].segments()
        if a in group:
            segs = [back] + segs
        if b in group:
            segs = segs + [back.reversed()]
        new_paths[ed] = EdgePath.from_segments(reduce_segments(segs))
    return realize(f.domain, cod, vi, new_paths, f.param_structure, check=False)


def make_taut(f: GraphMap, w, max_moves: int = 10000) -> GraphMap:
    """A taut map in the homotopy class of ``f`` for the domain weights ``w``.

    Every singular value is examined through its local star model; when the
    local map is not taut, the vertices of a minimal cut are slid into that
    leg until the next singular value.  Stops when all local models are taut.
    """
    g = reduce_map(f)
    for _ in range(max_moves):
        values = {}
        for p in g.vertex_images.values():
            values.setdefault(_point_key(p), p)
        for key in sorted(values, key=str):
            found = _untaut_group(g, values[key], w)
            if found is not None:
                g = _move_group(g, *found)
                break
        else:
            return g
    raise RuntimeError("make_taut did not converge")


def is_taut(f: GraphMap, w) -> bool:
    values = {_point_key(p): p for p in f.vertex_images.values()}
    return all(_untaut_group(f, p, w) is None for p in values.values())


# ---------------------------------------------------------------- strongly reduced

@dataclass(frozen=True)
class StrongReduction:
    verdict: bool
    witnesses: Mapping[str, Optional[MultiCurve]]


def _image_is_reduced(c: MultiCurve, f: GraphMap) -> bool:
    from .graph_maps import cyclic_reduce_segments, reduce_segments
    comp = c.components[0]
    segs = []
    for oe in comp.word:
        segs.extend(f.image_of_oriented(oe))
    raw = sum((s.span for s in segs), Fraction(0))
    red = cyclic_reduce_segments(segs) if comp.kind == LOOP else reduce_segments(segs)
    return sum((s.span for s in red), Fraction(0)) == raw and raw > 0


def is_strongly_reduced(f: GraphMap, candidates: Optional[list[MultiCurve]] = None) -> StrongReduction:
    """Each non-constant edge needs a curve through it whose image stays reduced."""
    cands = candidates if candidates is not None else enumerate_candidates(f.domain)
    witnesses: dict[str, Optional[MultiCurve]] = {}
    for e in f.domain.edge_ids:
        if not f.edge_path(e).word:
            continue
        witnesses[e] = next((c for c in cands
                             if any(edge_of(x) == e for x in c.components[0].word) and _image_is_reduced(c, f)),
                            None)
    return StrongReduction(all(c is not None for c in witnesses.values()), witnesses)
