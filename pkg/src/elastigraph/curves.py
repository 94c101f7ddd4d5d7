"""Weighted multi-curves on marked graphs.

Loops are cyclic words of oriented edges; arcs are linear words between
marked vertices.  Curve energies, push-forward through maps, candidate
enumeration and the two stretch-factor lower bounds live here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph_core import (
    EdgeScalars,
    GraphValidationError,
    MarkedGraph,
    Number,
    edge_of,
    number_to_json,
    reverse,
    reverse_word,
    to_number,
)
from .graph_maps import GraphMap, Segment, close, cyclic_reduce_segments, reduce_segments

log = logging.getLogger(__name__)

LOOP, ARC = "loop", "arc"


@dataclass(frozen=True)
class Component:
    kind: str
    word: tuple[str, ...]
    weight: Number = Fraction(1)


@dataclass(frozen=True)
class MultiCurve:
    components: tuple[Component, ...]
    dropped: tuple[Component, ...] = field(default=(), compare=False)

    @classmethod
    def single(cls, kind: str, word: Sequence[str], weight: Number = Fraction(1)) -> "MultiCurve":
        return cls((Component(kind, tuple(word), weight),))

    def __add__(self, other: "MultiCurve") -> "MultiCurve":
        return MultiCurve(self.components + other.components)

    def scaled(self, t: Number) -> "MultiCurve":
        return MultiCurve(tuple(Component(c.kind, c.word, c.weight * t) for c in self.components))

    def to_json(self) -> dict:
        return {"components": [{"kind": c.kind, "word": list(c.word), "weight": number_to_json(c.weight)}
                               for c in self.components]}


def curve_from_dict(data: dict) -> MultiCurve:
    comps = []
    for rec in data.get("components", []):
        kind = rec.get("kind", LOOP)
        if kind not in (LOOP, ARC):
            raise GraphValidationError([f"unknown component kind {kind!r}"])
        w = to_number(rec.get("weight", "1"))
        if not w > 0:
            raise GraphValidationError(["component weight must be positive"])
        comps.append(Component(kind, tuple(rec["word"]), w))
    return MultiCurve(tuple(comps))


def check_curve(c: MultiCurve, g: MarkedGraph) -> None:
    errors = []
    for i, comp in enumerate(c.components):
        w = comp.word
        for oe in w:
            if len(oe) < 2 or oe[0] not in "+-" or not g.has_edge(oe[1:]):
                errors.append(f"component {i}: unknown oriented edge {oe!r}")
        if errors:
            continue
        for x, y in zip(w, w[1:]):
            if g.head(x) != g.tail(y):
                errors.append(f"component {i}: {x} and {y} are not incident")
        if comp.kind == LOOP and w and g.head(w[-1]) != g.tail(w[0]):
            errors.append(f"component {i}: loop does not close up")
        if comp.kind == ARC and w and not (g.is_marked(g.tail(w[0])) and g.is_marked(g.head(w[-1]))):
            errors.append(f"component {i}: arc endpoints must be marked")
    if errors:
        raise GraphValidationError(errors)


# ---------------------------------------------------------------- words

def free_reduce(word: Iterable[str]) -> tuple[str, ...]:
    out: list[str] = []
    for x in word:
        if out and out[-1] == reverse(x):
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(word: Iterable[str]) -> tuple[str, ...]:
    w = list(free_reduce(word))
    while len(w) >= 2 and w[0] == reverse(w[-1]):
        w = w[1:-1]
    return tuple(w)


def is_proper_power(word: Sequence[str]) -> bool:
    n = len(word)
    for d in range(1, n):
        if n % d == 0 and tuple(word[:d]) * (n // d) == tuple(word):
            return True
    return False


def canonical_loop(word: Sequence[str]) -> tuple[str, ...]:
    """Least rotation of the word or its reverse."""
    best = None
    for w in (tuple(word), reverse_word(word)):
        for i in range(max(len(w), 1)):
            r = w[i:] + w[:i]
            if best is None or r < best:
                best = r
    return best or ()


def canonical_arc(word: Sequence[str]) -> tuple[str, ...]:
    return min(tuple(word), reverse_word(word))


def reduce_curve(c: MultiCurve) -> MultiCurve:
    """Cancel backtracks; trivial components are dropped and listed in ``dropped``."""
    comps, dropped = [], []
    for comp in c.components:
        w = cyclic_reduce(comp.word) if comp.kind == LOOP else free_reduce(comp.word)
        if w:
            comps.append(Component(comp.kind, w, comp.weight))
        else:
            dropped.append(comp)
    if dropped:
        log.info("dropped %d trivial component(s)", len(dropped))
    return MultiCurve(tuple(comps), tuple(dropped))


def edge_counts(c: MultiCurve) -> dict[str, Number]:
    """Weighted crossing count ``n_c(e)`` (curves are assumed reduced)."""
    n: dict[str, Number] = {}
    for comp in c.components:
        for oe in comp.word:
            e = edge_of(oe)
            n[e] = n.get(e, 0) + comp.weight
    return n


def curve_energy(c: MultiCurve, s: EdgeScalars) -> Number:
    """EL for ``alpha``, total length for ``length``, weight ratio for ``weight``."""
    n = edge_counts(c)
    if s.kind == "alpha":
        return sum((s[e] * x * x for e, x in n.items()), Fraction(0))
    if s.kind == "length":
        return sum((s[e] * x for e, x in n.items()), Fraction(0))
    ratios = []
    for e, x in n.items():
        ratios.append(x / s[e] if s[e] else float("inf"))
    return max(ratios, default=Fraction(0))


def push_curve(c: MultiCurve, f: GraphMap) -> MultiCurve:
    """Image of ``c`` under ``f``, reduced in its homotopy class."""
    comps, dropped = [], []
    for comp in c.components:
        segs: list[Segment] = []
        for x, y in zip(comp.word, comp.word[1:]):
            if f.domain.head(x) != f.domain.tail(y):
                raise GraphValidationError([f"incidence mismatch between {x} and {y}"])
        for oe in comp.word:
            if not f.domain.has_edge(edge_of(oe)):
                raise GraphValidationError([f"unknown oriented edge {oe!r}"])
            segs.extend(f.image_of_oriented(oe))
        red = cyclic_reduce_segments(segs) if comp.kind == LOOP else reduce_segments(segs)
        for s in red:
            if not (close(s.a, 0) and close(s.b, 1)):
                raise GraphValidationError(["pushed curve does not run vertex to vertex"])
        word = tuple(s.oe for s in red)
        if word:
            comps.append(Component(comp.kind, word, comp.weight))
        else:
            dropped.append(comp)
    return MultiCurve(tuple(comps), tuple(dropped))


# ---------------------------------------------------------------- enumeration

class EnumerationLimit(RuntimeError):
    pass


def enumerate_candidates(g: MarkedGraph, bound: int = 2, limit: int = 10**6,
                         first_edges: Optional[Iterable[str]] = None) -> list[MultiCurve]:
    """All reduced loops and marked arcs using each edge at most ``bound`` times.

    Loops are deduplicated by rotation and reversal (proper powers skipped);
    arcs by reversal.  ``first_edges`` restricts the starting oriented edge,
    which partitions the work deterministically.
    """
    loops: set[tuple[str, ...]] = set()
    arcs: set[tuple[str, ...]] = set()
    usage = {e: 0 for e in g.edge_ids}
    starts = list(first_edges) if first_edges is not None else sorted(g.oriented_edges())
    visited = 0

    def dfs(word: list[str]):
        nonlocal visited
        visited += 1
        if visited > limit:
            raise EnumerationLimit(f"more than {limit} partial curves")
        first, last = word[0], word[-1]
        start_v, cur = g.tail(first), g.head(last)
        if cur == start_v and last != reverse(first) and not is_proper_power(word):
            loops.add(canonical_loop(word))
        if g.is_marked(start_v) and g.is_marked(cur):
            arcs.add(canonical_arc(word))
        for oe in g.directions(cur):
            if oe == reverse(last):
                continue
            e = edge_of(oe)
            if usage[e] >= bound:
                continue
            usage[e] += 1
            word.append(oe)
            dfs(word)
            word.pop()
            usage[e] -= 1

    for oe in starts:
        usage[edge_of(oe)] += 1
        dfs([oe])
        usage[edge_of(oe)] -= 1
    out = [MultiCurve.single(LOOP, w) for w in sorted(loops)]
    out += [MultiCurve.single(ARC, w) for w in sorted(arcs)]
    return out


# ---------------------------------------------------------------- stretch factors

def lipschitz_stretch(f: GraphMap, len_dom: EdgeScalars, len_cod: EdgeScalars,
                      candidates: Optional[list[MultiCurve]] = None) -> tuple[Number, MultiCurve]:
    """Largest length ratio over candidate curves, with the maximising curve."""
    cands = candidates if candidates is not None else enumerate_candidates(f.domain)
    best, witness = None, None
    for c in cands:
        den = curve_energy(c, len_dom)
        if den == 0:
            raise ValueError("candidate curve of zero length in the domain")
        r = curve_energy(push_curve(c, f), len_cod) / den
        if best is None or r > best:
            best, witness = r, c
    if best is None:
        return Fraction(0), MultiCurve(())
    return best, witness


def el_ratio(c: MultiCurve, f: GraphMap, a_dom: EdgeScalars, a_cod: EdgeScalars) -> Number:
    den = curve_energy(c, a_dom)
    return curve_energy(push_curve(c, f), a_cod) / den if den else Fraction(0)


def _count_matrix(curves: Sequence[MultiCurve], edges: Sequence[str]) -> np.ndarray:
    idx = {e: i for i, e in enumerate(edges)}
    m = np.zeros((len(edges), len(curves)))
    for j, c in enumerate(curves):
        for e, x in edge_counts(c).items():
            m[idx[e], j] += float(x)
    return m


def _combine(curves: Sequence[MultiCurve], weights: Sequence[Number]) -> MultiCurve:
    comps = []
    for c, w in zip(curves, weights):
        if w:
            comps.extend(Component(k.kind, k.word, k.weight * w) for k in c.components)
    return MultiCurve(tuple(comps))


def sf_el_lower_bound(f: GraphMap, a_dom: EdgeScalars, a_cod: EdgeScalars,
                      candidates: Optional[list[MultiCurve]] = None,
                      iterations: int = 3000) -> tuple[Number, MultiCurve]:
    """Certified lower bound for the extremal-length stretch factor.

    Single candidates are scored exactly.  Weighted combinations are then
    searched by exponentiated-gradient ascent of the Rayleigh-type quotient
    ``EL(f∘c)/EL(c)`` over the simplex of candidate weights; the resulting
    weights are rounded to rationals and the multi-curve is re-scored exactly,
    so the returned value is always attained by the returned witness.
    """
    cands = candidates if candidates is not None else enumerate_candidates(f.domain)
    if not cands:
        return Fraction(0), MultiCurve(())
    pushed = [push_curve(c, f) for c in cands]
    ratios = []
    for c, p in zip(cands, pushed):
        den = curve_energy(c, a_dom)
        ratios.append(curve_energy(p, a_cod) / den if den else Fraction(0))
    j = max(range(len(cands)), key=lambda i: ratios[i])
    best, witness = ratios[j], cands[j]
    if len(cands) == 1:
        return best, witness

    e1, e2 = f.domain.edge_ids, f.codomain.edge_ids
    n1, n2 = _count_matrix(cands, e1), _count_matrix(pushed, e2)
    w1 = np.array([float(a_dom[e]) for e in e1])
    w2 = np.array([float(a_cod[e]) for e in e2])

    def quotient(x):
        y1, y2 = n1 @ x, n2 @ x
        den = float(w1 @ (y1 * y1))
        num = float(w2 @ (y2 * y2))
        g = 2 * (n2.T @ (w2 * y2) - (num / den) * (n1.T @ (w1 * y1))) / den
        return num / den, g

    order = sorted(range(len(cands)), key=lambda i: -ratios[i])
    starts = [np.full(len(cands), 1.0 / len(cands))]
    for i in order[:3]:
        x = np.full(len(cands), 0.1 / len(cands))
        x[i] += 0.9
        starts.append(x)
    exact1 = [edge_counts(c) for c in cands]
    exact2 = [edge_counts(p) for p in pushed]

    def exact_ratio(ws):
        def el(counts, alpha):
            tot: dict[str, Fraction] = {}
            for w, cnt in zip(ws, counts):
                if w:
                    for e, x in cnt.items():
                        tot[e] = tot.get(e, Fraction(0)) + w * x
            return sum((alpha[e] * x * x for e, x in tot.items()), Fraction(0))
        den = el(exact1, a_dom)
        return el(exact2, a_cod) / den if den else Fraction(0)

    for x in starts:
        eta = 1.0
        r, g = quotient(x)
        stalled = 0
        for _ in range(iterations):
            scale = max(1e-12, float(np.max(np.abs(g))))
            y = x * np.exp(np.clip(eta * g / scale, -30, 30))
            y /= y.sum()
            r2, g2 = quotient(y)
            if r2 >= r - 1e-15:
                stalled = stalled + 1 if r2 - r <= 1e-14 * max(1.0, r) else 0
                x, r, g = y, r2, g2
                eta = min(eta * 1.2, 50.0)
                if stalled >= 50:
                    break
            else:
                eta *= 0.5
                if eta < 1e-9:
                    break
        top = x.max()
        for denom in (12, 60, 1000, 10**6):
            ws = [Fraction(xi / top).limit_denominator(denom) if xi > 1e-9 * top else Fraction(0) for xi in x]
            val = exact_ratio(ws)
            # larger denominators must earn their keep
            if val > best * (1 + Fraction(1, 10**12)):
                best, witness = val, _combine(cands, ws)
    return best, witness
