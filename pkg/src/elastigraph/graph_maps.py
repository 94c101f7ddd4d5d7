"""Piecewise-linear maps between marked graphs and their energies.

A map is stored as an explicit PL map: every domain edge, parametrised by
``[0, 1]``, is cut into consecutive *pieces*, each of which is either
constant or runs linearly along one oriented target edge from fraction
``a`` to fraction ``b`` (``0 <= a < b <= 1`` in the orientation of that
oriented edge).  Constant-speed maps are built from edge paths with
:func:`realize`, which spreads the domain parameter proportionally to the
image length under a chosen codomain structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .graph_core import (
    EdgeScalars,
    GraphValidationError,
    MarkedGraph,
    Number,
    edge_of,
    number_to_json,
    reverse,
    sign_of,
    to_number,
)

FLOAT_EPS = 1e-12
INF = float("inf")


def close(a: Number, b: Number) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(a - b) <= FLOAT_EPS


def is_zero(a: Number) -> bool:
    return close(a, 0)


# ---------------------------------------------------------------- points

@dataclass(frozen=True)
class Point:
    """A vertex, or an interior point of an edge at ``offset`` along ``+edge``."""

    vertex: Optional[str] = None
    edge: Optional[str] = None
    offset: Optional[Number] = None

    @classmethod
    def at_vertex(cls, v: str) -> "Point":
        return cls(vertex=v)

    @classmethod
    def on_edge(cls, e: str, offset: Number) -> "Point":
        return cls(edge=e, offset=offset)

    @property
    def is_vertex(self) -> bool:
        return self.vertex is not None

    def to_json(self):
        if self.is_vertex:
            return self.vertex
        return {"edge": self.edge, "offset": number_to_json(self.offset)}


def point_along(g: MarkedGraph, oe: str, frac: Number) -> Point:
    """The point at fraction ``frac`` along oriented edge ``oe`` (snapping ends to vertices)."""
    if is_zero(frac):
        return Point.at_vertex(g.tail(oe))
    if close(frac, 1):
        return Point.at_vertex(g.head(oe))
    e = edge_of(oe)
    return Point.on_edge(e, frac if sign_of(oe) > 0 else 1 - frac)


def same_point(p: Point, q: Point) -> bool:
    if p.is_vertex or q.is_vertex:
        return p.vertex == q.vertex
    return p.edge == q.edge and close(p.offset, q.offset)


def position_on(p: Point, oe: str) -> Number:
    """Fraction along ``oe`` of an interior point of ``edge_of(oe)``."""
    return p.offset if sign_of(oe) > 0 else 1 - p.offset


def directions_at(g: MarkedGraph, p: Point) -> tuple[str, ...]:
    """Oriented edges leaving ``p``; at an interior point these are ``+e`` and ``-e``."""
    if p.is_vertex:
        return g.directions(p.vertex)
    return ("+" + p.edge, "-" + p.edge)


def start_fraction(p: Point, oe: str) -> Number:
    return 0 if p.is_vertex else position_on(p, oe)


# ---------------------------------------------------------------- path elements

@dataclass(frozen=True)
class Segment:
    """Traversal of oriented edge ``oe`` from fraction ``a`` to ``b`` (``a < b``)."""

    oe: str
    a: Number
    b: Number

    def reversed(self) -> "Segment":
        return Segment(reverse(self.oe), 1 - self.b, 1 - self.a)

    @property
    def span(self) -> Number:
        return self.b - self.a


class _Stack:
    """Free reduction of a chain of segments (homotopy rel endpoints)."""

    def __init__(self):
        self.items: list[Segment] = []

    def push(self, x: Segment) -> None:
        while True:
            if not self.items:
                self.items.append(x)
                return
            y = self.items[-1]
            if y.oe == x.oe and close(y.b, x.a) and not close(y.b, 1):
                self.items.pop()
                x = Segment(x.oe, y.a, x.b)
                continue
            if y.oe == reverse(x.oe) and close(1 - y.b, x.a):
                self.items.pop()
                end = 1 - x.b  # where x stops, in y's coordinates
                if close(end, y.a):
                    return
                if end > y.a:
                    x = Segment(y.oe, y.a, end)
                else:
                    x = Segment(x.oe, 1 - y.a, x.b)
                continue
            self.items.append(x)
            return


def reduce_segments(segs: Iterable[Segment]) -> list[Segment]:
    st = _Stack()
    for s in segs:
        if not close(s.a, s.b):
            st.push(s)
    return st.items


def cyclic_reduce_segments(segs: Sequence[Segment]) -> list[Segment]:
    """Reduce a closed chain up to free homotopy; result is a cyclic list of full letters."""
    lin = reduce_segments(segs)
    if not lin:
        return []
    if not is_zero(lin[0].a):
        # starts at an interior point: rotate so the loop starts at a vertex
        lin = reduce_segments(list(lin[1:]) + [lin[0]])
    word = list(lin)
    while len(word) >= 2 and word[0].oe == reverse(word[-1].oe):
        word = word[1:-1]
    return word


# ---------------------------------------------------------------- edge paths

@dataclass(frozen=True)
class EdgePath:
    """Reduced oriented-edge word with fractional first/last letters; empty when constant."""

    word: tuple[str, ...]
    start_offset: Number = Fraction(0)
    end_offset: Number = Fraction(1)

    def segments(self) -> list[Segment]:
        n = len(self.word)
        out = []
        for i, oe in enumerate(self.word):
            a = self.start_offset if i == 0 else Fraction(0)
            b = self.end_offset if i == n - 1 else Fraction(1)
            out.append(Segment(oe, a, b))
        return out

    @classmethod
    def from_segments(cls, segs: Sequence[Segment]) -> "EdgePath":
        if not segs:
            return cls(())
        return cls(tuple(s.oe for s in segs), segs[0].a, segs[-1].b)

    def length(self, s: EdgeScalars) -> Number:
        return sum((x.span * s[edge_of(x.oe)] for x in self.segments()), Fraction(0))

    def reversed(self) -> "EdgePath":
        return EdgePath.from_segments([x.reversed() for x in reversed(self.segments())])

    def to_json(self) -> dict:
        return {
            "word": list(self.word),
            "start_offset": number_to_json(self.start_offset),
            "end_offset": number_to_json(self.end_offset),
        }


# ---------------------------------------------------------------- maps

@dataclass(frozen=True)
class Piece:
    """``dom`` is the share of the domain edge; ``seg`` is None for a constant piece."""

    dom: Number
    seg: Optional[Segment]


@dataclass(frozen=True)
class GraphMap:
    domain: MarkedGraph
    codomain: MarkedGraph
    vertex_images: Mapping[str, Point]
    pieces: Mapping[str, tuple[Piece, ...]]
    constant_derivative: bool = True
    param_structure: Optional[EdgeScalars] = field(default=None, compare=False)

    def edge_path(self, e: str) -> EdgePath:
        """Reduced path homotopic rel endpoints to the image of ``e``."""
        segs = [p.seg for p in self.pieces[e] if p.seg is not None]
        return EdgePath.from_segments(reduce_segments(segs))

    @property
    def edge_paths(self) -> dict[str, EdgePath]:
        return {e: self.edge_path(e) for e in self.domain.edge_ids}

    def image_of_oriented(self, oe: str) -> list[Segment]:
        segs = [p.seg for p in self.pieces[edge_of(oe)] if p.seg is not None]
        if sign_of(oe) < 0:
            segs = [s.reversed() for s in reversed(segs)]
        return segs

    def tail_image(self, oe: str) -> Point:
        return self.vertex_images[self.domain.tail(oe)]

    def evaluate(self, e: str, t: Number) -> Point:
        """Image of the point at parameter ``t`` along ``+e``."""
        if is_zero(t):
            return self.vertex_images[self.domain.ends(e)[0]]
        if close(t, 1):
            return self.vertex_images[self.domain.ends(e)[1]]
        pos = Fraction(0) if not isinstance(t, float) else 0.0
        for p in self.pieces[e]:
            nxt = pos + p.dom
            if t <= nxt or p is self.pieces[e][-1]:
                if p.seg is None:
                    return self._piece_start(e, p)
                u = (t - pos) / p.dom if p.dom else 0
                return point_along(self.codomain, p.seg.oe, p.seg.a + (p.seg.b - p.seg.a) * u)
            pos = nxt
        raise AssertionError("unreachable")

    def _piece_start(self, e: str, piece: Piece) -> Point:
        cur = self.vertex_images[self.domain.ends(e)[0]]
        for p in self.pieces[e]:
            if p is piece:
                return cur
            if p.seg is not None:
                cur = point_along(self.codomain, p.seg.oe, p.seg.b)
        return cur


def _check_map(f: GraphMap) -> None:
    errors = []
    dom, cod = f.domain, f.codomain
    for v in dom.vertex_ids:
        if v not in f.vertex_images:
            errors.append(f"vertex {v!r} has no image")
            continue
        p = f.vertex_images[v]
        if p.is_vertex:
            if not cod.has_vertex(p.vertex):
                errors.append(f"vertex {v!r} maps to unknown vertex {p.vertex!r}")
            elif dom.is_marked(v) and not cod.is_marked(p.vertex):
                errors.append(f"marked vertex {v!r} must map to a marked vertex")
        else:
            if not cod.has_edge(p.edge):
                errors.append(f"vertex {v!r} maps to unknown edge {p.edge!r}")
            elif not 0 < p.offset < 1:
                errors.append(f"vertex {v!r}: offset must be interior")
            if dom.is_marked(v):
                errors.append(f"marked vertex {v!r} must map to a marked vertex")
    if errors:
        raise GraphValidationError(errors)
    for e in dom.edge_ids:
        if e not in f.pieces:
            errors.append(f"edge {e!r} has no image path")
            continue
        a, b = dom.ends(e)
        cur = f.vertex_images[a]
        for p in f.pieces[e]:
            if p.seg is None:
                continue
            if not cod.has_edge(edge_of(p.seg.oe)):
                errors.append(f"edge {e!r} path uses unknown edge {p.seg.oe!r}")
                break
            if not (0 <= p.seg.a < p.seg.b <= 1):
                errors.append(f"edge {e!r}: bad offsets on {p.seg.oe!r}")
                break
            start = point_along(cod, p.seg.oe, p.seg.a)
            if not same_point(start, cur):
                errors.append(f"edge {e!r}: path is not connected at {p.seg.oe!r}")
                break
            cur = point_along(cod, p.seg.oe, p.seg.b)
        else:
            if not same_point(cur, f.vertex_images[b]):
                errors.append(f"edge {e!r}: path does not end at the image of {b!r}")
    if errors:
        raise GraphValidationError(errors)


def make_map(domain: MarkedGraph, codomain: MarkedGraph, vertex_images: Mapping[str, Point],
             pieces: Mapping[str, Sequence[Piece]], constant_derivative: bool = False,
             param_structure: Optional[EdgeScalars] = None, check: bool = True) -> GraphMap:
    f = GraphMap(domain, codomain, dict(vertex_images),
                 {e: tuple(ps) for e, ps in pieces.items()}, constant_derivative, param_structure)
    if check:
        _check_map(f)
    return f


def realize(domain: MarkedGraph, codomain: MarkedGraph, vertex_images: Mapping[str, Point],
            edge_paths: Mapping[str, EdgePath], structure: Optional[EdgeScalars] = None,
            check: bool = True) -> GraphMap:
    """Constant-speed map with the given paths; speed measured by ``structure`` on the codomain.

    Without a structure every codomain edge counts as length 1.  Segments on
    zero-length edges share the domain parameter by their fractional span.
    """
    pieces = {}
    for e in domain.edge_ids:
        path = edge_paths.get(e, EdgePath(()))
        segs = path.segments()
        if not segs:
            pieces[e] = (Piece(Fraction(1), None),)
            continue
        lens = [s.span * (structure[edge_of(s.oe)] if structure is not None else 1) for s in segs]
        total = sum(lens)
        if is_zero(total):
            lens = [s.span for s in segs]
            total = sum(lens)
        pieces[e] = tuple(Piece(x / total, s) for x, s in zip(lens, segs))
    return make_map(domain, codomain, vertex_images, pieces, True, structure, check)


def identity_map(g: MarkedGraph, structure: Optional[EdgeScalars] = None) -> GraphMap:
    vi = {v: Point.at_vertex(v) for v in g.vertex_ids}
    paths = {e: EdgePath(("+" + e,), Fraction(0), Fraction(1)) for e in g.edge_ids}
    return realize(g, g, vi, paths, structure)


def straighten(f: GraphMap, structure: Optional[EdgeScalars] = None) -> GraphMap:
    """Constant-speed representative with the same vertex images and reduced paths."""
    s = structure if structure is not None else f.param_structure
    return realize(f.domain, f.codomain, f.vertex_images, f.edge_paths, s, check=False)


# ---------------------------------------------------------------- composition

def _restrict(g: GraphMap, seg: Segment, dom: Number) -> list[Piece]:
    """Pieces of ``g`` along ``seg`` (a part of a domain edge of g), rescaled to total ``dom``."""
    e = edge_of(seg.oe)
    if sign_of(seg.oe) > 0:
        lo, hi, flip = seg.a, seg.b, False
    else:
        lo, hi, flip = 1 - seg.b, 1 - seg.a, True
    out = []
    pos = 0
    width = hi - lo
    for p in g.pieces[e]:
        p0, p1 = pos, pos + p.dom
        pos = p1
        x0, x1 = max(p0, lo), min(p1, hi)
        if x1 <= x0 or close(x0, x1):
            continue
        share = (x1 - x0) / width * dom
        if p.seg is None:
            out.append(Piece(share, None))
            continue
        u0 = (x0 - p0) / p.dom
        u1 = (x1 - p0) / p.dom
        s = p.seg
        out.append(Piece(share, Segment(s.oe, s.a + s.span * u0, s.a + s.span * u1)))
    if flip:
        out = [Piece(p.dom, p.seg.reversed() if p.seg else None) for p in reversed(out)]
    return out


def _point_image(g: GraphMap, p: Point) -> Point:
    if p.is_vertex:
        return g.vertex_images[p.vertex]
    return g.evaluate(p.edge, p.offset)


def compose(f: GraphMap, g: GraphMap) -> GraphMap:
    """The PL map ``g ∘ f`` (first f, then g)."""
    if f.codomain is not g.domain and f.codomain != g.domain:
        raise GraphValidationError(["mismatched graphs: codomain of f is not the domain of g"])
    vi = {v: _point_image(g, p) for v, p in f.vertex_images.items()}
    pieces = {}
    for e, ps in f.pieces.items():
        out: list[Piece] = []
        for p in ps:
            if p.seg is None:
                out.append(Piece(p.dom, None))
            else:
                out.extend(_restrict(g, p.seg, p.dom))
        pieces[e] = tuple(out) if out else (Piece(Fraction(1), None),)
    return make_map(f.domain, g.codomain, vi, pieces, False, None, check=False)


# ---------------------------------------------------------------- reduction

def _first_direction(path: EdgePath) -> Optional[str]:
    return path.word[0] if path.word else None


def _tighten(f: GraphMap, vertex_images: Mapping[str, Point], paths: Mapping[str, EdgePath]) -> GraphMap:
    return realize(f.domain, f.codomain, vertex_images, paths, f.param_structure, check=False)


def find_dead_end(f: GraphMap) -> Optional[tuple[set[str], str]]:
    """A dead end ``(Z, d)`` of an edge-reduced map, or None."""
    dom = f.domain
    paths = f.edge_paths
    const = [e for e in dom.edge_ids if not paths[e].word]
    comps = dom.components(const)
    for comp in comps:
        if any(dom.is_marked(v) for v in comp):
            continue
        dirs = set()
        for v in comp:
            for oe in dom.directions(v):
                e = edge_of(oe)
                if not paths[e].word:
                    continue
                p = paths[e] if sign_of(oe) > 0 else paths[e].reversed()
                dirs.add(p.word[0])
        if len(dirs) == 1:
            return comp, dirs.pop()
    return None


def reduce_map(f: GraphMap, max_steps: int = 100000) -> GraphMap:
    """Tighten edge paths and remove dead ends by pulling them along their unique direction."""
    vi = dict(f.vertex_images)
    paths = dict(f.edge_paths)
    g = _tighten(f, vi, paths)
    for _ in range(max_steps):
        dead = find_dead_end(g)
        if dead is None:
            return g
        comp, d = dead
        p0 = vi[next(iter(comp))]
        s0 = start_fraction(p0, d)
        stop = Fraction(1) if not isinstance(s0, float) else 1.0
        touching = []
        for v in comp:
            for oe in g.domain.directions(v):
                e = edge_of(oe)
                if not paths[e].word:
                    continue
                p = paths[e] if sign_of(oe) > 0 else paths[e].reversed()
                first = p.segments()[0]
                stop = min(stop, first.b)
                touching.append(oe)
        newpt = point_along(g.codomain, d, stop)
        for v in comp:
            vi[v] = newpt
        for e in sorted({edge_of(oe) for oe in touching}):
            a, b = g.domain.ends(e)
            segs = paths[e].segments()
            if a in comp:
                segs = _trim_front(segs, d, stop)
            if b in comp:
                rs = _trim_front([s.reversed() for s in reversed(segs)], d, stop)
                segs = [s.reversed() for s in reversed(rs)]
            paths[e] = EdgePath.from_segments(reduce_segments(segs))
        g = _tighten(g, vi, paths)
        paths = dict(g.edge_paths)
    raise RuntimeError("reduction did not terminate")


def _trim_front(segs: list[Segment], d: str, stop: Number) -> list[Segment]:
    if not segs:
        return segs
    first = segs[0]
    assert first.oe == d
    if close(stop, first.b):
        return segs[1:]
    return [Segment(d, stop, first.b)] + segs[1:]


# ---------------------------------------------------------------- segment functions

@dataclass(frozen=True)
class SegmentFunction:
    """Per codomain edge: breakpoints ``0 = x0 < ... < xk = 1`` and the value on each gap."""

    breakpoints: Mapping[str, tuple]
    values: Mapping[str, tuple]

    def max(self) -> Number:
        vals = [v for vs in self.values.values() for v in vs]
        return max(vals) if vals else 0

    def is_constant_on_edges(self) -> bool:
        return all(all(close(v, vs[0]) for v in vs) for vs in self.values.values() if vs)

    def edge_value(self, e: str) -> Number:
        vs = self.values[e]
        if not all(close(v, vs[0]) for v in vs):
            raise ValueError(f"not constant on edge {e!r}")
        return vs[0]

    def integrate(self, measure: EdgeScalars, power=1) -> Number:
        total = Fraction(0)
        for e, xs in self.breakpoints.items():
            vs = self.values[e]
            for i, v in enumerate(vs):
                if v == 0:
                    continue
                total = total + (xs[i + 1] - xs[i]) * measure[e] * (v ** power)
        return total

    def to_json(self) -> dict:
        return {e: {"breakpoints": [number_to_json(x) for x in xs],
                    "values": [number_to_json(v) for v in self.values[e]]}
                for e, xs in sorted(self.breakpoints.items())}


def _segment_function(codomain: MarkedGraph, contribs: list[tuple[str, Number, Number, Number]]) -> SegmentFunction:
    """Sum contributions ``(edge, lo, hi, value)`` into a piecewise-constant function."""
    per: dict[str, list] = {e: [] for e in codomain.edge_ids}
    for e, lo, hi, val in contribs:
        per[e].append((lo, hi, val))
    bps, vals = {}, {}
    for e, items in per.items():
        xs = sorted({Fraction(0), Fraction(1), *(x for lo, hi, _ in items for x in (lo, hi))})
        merged = [xs[0]]
        for x in xs[1:]:
            if not close(x, merged[-1]):
                merged.append(x)
        merged[-1] = Fraction(1)
        out = []
        for i in range(len(merged) - 1):
            mid = (merged[i] + merged[i + 1]) / 2
            out.append(sum((v for lo, hi, v in items if lo < mid < hi), Fraction(0)))
        bps[e], vals[e] = tuple(merged), tuple(out)
    return SegmentFunction(bps, vals)


def _on_plus(seg: Segment) -> tuple[str, Number, Number]:
    e = edge_of(seg.oe)
    if sign_of(seg.oe) > 0:
        return e, seg.a, seg.b
    return e, 1 - seg.b, 1 - seg.a


def speeds(f: GraphMap, dom_struct: EdgeScalars, cod_struct: EdgeScalars) -> list[tuple[str, Segment, Number, Number]]:
    """``(domain edge, segment, |f'|, domain measure)`` for each non-constant piece."""
    out = []
    for e, ps in f.pieces.items():
        for p in ps:
            if p.seg is None:
                continue
            dm = p.dom * dom_struct[e]
            im = p.seg.span * cod_struct[edge_of(p.seg.oe)]
            out.append((e, p.seg, (im / dm) if dm else INF, dm))
    return out


def multiplicity(f: GraphMap, w: Optional[EdgeScalars] = None) -> SegmentFunction:
    """Weighted count of preimages of each regular value; ``w`` defaults to 1."""
    contribs = []
    for e, ps in f.pieces.items():
        we = w[e] if w is not None else Fraction(1)
        for p in ps:
            if p.seg is not None:
                contribs.append((*_on_plus(p.seg), we))
    return _segment_function(f.codomain, contribs)


def fill_function(f: GraphMap, dom_struct: EdgeScalars, cod_struct: EdgeScalars, p=2) -> SegmentFunction:
    """Sum over preimage strands of ``|f'|^(p-1)``; ``p=2`` gives the usual Fill."""
    contribs = []
    for _, seg, sp, _ in speeds(f, dom_struct, cod_struct):
        val = sp if p == 2 else sp ** (p - 1)
        contribs.append((*_on_plus(seg), val))
    return _segment_function(f.codomain, contribs)


def pullback_lengths(f: GraphMap, lengths: EdgeScalars) -> EdgeScalars:
    """Total length traced by the image of each domain edge."""
    vals = {}
    for e, ps in f.pieces.items():
        vals[e] = sum((p.seg.span * lengths[edge_of(p.seg.oe)] for p in ps if p.seg is not None), Fraction(0))
    return EdgeScalars("length", vals)


# ---------------------------------------------------------------- energies

def _parse_exponent(p) -> Number:
    if isinstance(p, str):
        return to_number(p)
    if isinstance(p, float) and math.isinf(p):
        return INF
    return to_number(p) if not isinstance(p, float) else p


def energy(f: GraphMap, dom_struct: Optional[EdgeScalars], cod_struct: Optional[EdgeScalars], p, q) -> Number:
    """Energy of ``f`` for exponents ``1 <= p <= q <= inf``.

    The six classical cases return WR ``(1,1)``, EL ``(1,2)``, length
    ``(1,inf)``, Emb ``(2,2)``, Dir ``(2,inf)`` and Lip ``(inf,inf)``; EL, Emb
    and Dir are *not* square-rooted (see :func:`energy_E`).  Other exponent
    pairs return ``E^p_q`` in floating point.
    """
    p, q = _parse_exponent(p), _parse_exponent(q)
    if p < 1 or q < 1 or p > q:
        raise ValueError(f"need 1 <= p <= q, got p={p}, q={q}")
    if p == 1:
        if dom_struct is None:
            dom_struct = EdgeScalars("weight", {e: Fraction(1) for e in f.domain.edge_ids})
        if cod_struct is None:
            raise ValueError("missing codomain structure")
        n = multiplicity(f, dom_struct)
        if q == 1:
            ratios = [v / cod_struct[e] if cod_struct[e] else (INF if v else 0)
                      for e, vs in n.values.items() for v in vs]
            return max(ratios, default=Fraction(0))
        if q == INF:
            return n.integrate(cod_struct, 1)
        if q == 2:
            return n.integrate(cod_struct, 2)
        return float(n.integrate(cod_struct, q / (q - 1))) ** ((q - 1) / q)
    if dom_struct is None or cod_struct is None:
        raise ValueError("missing structure")
    if p == INF:
        return max((sp for _, _, sp, _ in speeds(f, dom_struct, cod_struct)), default=Fraction(0))
    if p == 2 and q == INF:
        return sum((sp * sp * dm for _, _, sp, dm in speeds(f, dom_struct, cod_struct)), Fraction(0))
    if p == 2 and q == 2:
        return fill_function(f, dom_struct, cod_struct).max()
    return energy_E(f, dom_struct, cod_struct, p, q)


def energy_E(f: GraphMap, dom_struct, cod_struct, p, q) -> float:
    """``E^p_q`` with the uniform normalisation (square roots of EL, Emb, Dir)."""
    p, q = _parse_exponent(p), _parse_exponent(q)
    if (p == 1 and q != 2) or p == INF:
        return float(energy(f, dom_struct, cod_struct, p, q))
    if q == 2 or (p == 2 and q == INF):
        return math.sqrt(energy(f, dom_struct, cod_struct, p, q))
    pf, qf = float(p), float(q)
    fill = fill_function(f, dom_struct.as_float(), cod_struct.as_float(), pf)
    if q == p:
        return float(fill.max()) ** (1 / pf)
    if q == INF:
        return float(fill.integrate(cod_struct.as_float(), 1)) ** (1 / pf)
    r = qf / (qf - pf)
    return float(fill.integrate(cod_struct.as_float(), r)) ** ((1 / pf) - (1 / qf))


def sqrt_energy(value: Number) -> float:
    return math.sqrt(value)


# ---------------------------------------------------------------- JSON

def _parse_point(data, codomain: MarkedGraph) -> Point:
    if isinstance(data, str):
        return Point.at_vertex(data)
    if isinstance(data, dict) and "vertex" in data:
        return Point.at_vertex(str(data["vertex"]))
    if isinstance(data, dict) and "edge" in data:
        off = to_number(data["offset"])
        if not 0 < off < 1:
            if off == 0:
                return Point.at_vertex(codomain.ends(data["edge"])[0])
            if off == 1:
                return Point.at_vertex(codomain.ends(data["edge"])[1])
            raise GraphValidationError([f"offset {off} outside [0,1]"])
        return Point.on_edge(str(data["edge"]), off)
    raise GraphValidationError([f"malformed point {data!r}"])


def map_from_dict(data: dict, domain: MarkedGraph, codomain: MarkedGraph,
                  structure: Optional[EdgeScalars] = None) -> GraphMap:
    """Parse a map; paths are realised at constant speed with respect to ``structure``."""
    try:
        vi = {str(v): _parse_point(p, codomain) for v, p in data["vertex_images"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphValidationError([f"malformed vertex_images: {exc}"]) from exc
    for v in vi:
        if not domain.has_vertex(v):
            raise GraphValidationError([f"vertex_images names unknown vertex {v!r}"])
    for p in vi.values():
        if not p.is_vertex and not codomain.has_edge(p.edge):
            raise GraphValidationError([f"unknown codomain edge {p.edge!r}"])
        if p.is_vertex and not codomain.has_vertex(p.vertex):
            raise GraphValidationError([f"unknown codomain vertex {p.vertex!r}"])
    paths = {}
    raw = data.get("edge_paths", {})
    for e in raw:
        if not domain.has_edge(e):
            raise GraphValidationError([f"edge_paths names unknown edge {e!r}"])
    for e in domain.edge_ids:
        if e not in raw:
            raise GraphValidationError([f"missing edge path for {e!r}"])
        rec = raw[e]
        word = tuple(rec.get("word", ()))
        for oe in word:
            if len(oe) < 2 or oe[0] not in "+-" or not codomain.has_edge(oe[1:]):
                raise GraphValidationError([f"edge {e!r}: unknown oriented edge {oe!r}"])
        if word:
            start = to_number(rec.get("start_offset", "0"))
            end = to_number(rec.get("end_offset", "1"))
        else:
            start, end = Fraction(0), Fraction(0)
        paths[e] = EdgePath(word, start, end)
    return realize(domain, codomain, vi, paths, structure)


def map_to_dict(f: GraphMap) -> dict:
    out = {
        "vertex_images": {v: p.to_json() for v, p in sorted(f.vertex_images.items())},
        "edge_paths": {e: f.edge_path(e).to_json() for e in f.domain.edge_ids},
    }
    if not f.constant_derivative:
        out["pieces"] = {
            e: [{"share": number_to_json(p.dom),
                 "segment": None if p.seg is None else
                 {"oe": p.seg.oe, "from": number_to_json(p.seg.a), "to": number_to_json(p.seg.b)}}
                for p in ps]
            for e, ps in f.pieces.items()
        }
    return out
