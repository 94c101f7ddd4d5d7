"""Marked graphs with per-edge scalar structures.

A graph is a finite set of vertices, some of them marked, and undirected
edges given by an ordered pair of endpoints.  Self-loops and multi-edges
are allowed.  Each edge ``e`` has two orientations, written ``"+e"``
(from ``ends[0]`` to ``ends[1]``) and ``"-e"``; an oriented edge is also a
direction (half-edge germ) at its tail.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[Fraction, float]

SCALAR_KINDS = ("weight", "alpha", "length")


class GraphValidationError(ValueError):
    """Raised when a graph or map violates its structural invariants."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def to_number(x) -> Number:
    """Parse ``"p/q"``, decimal strings, ints and Fractions exactly; floats stay floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ValueError(f"not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        s = x.strip()
        if s.lower() in ("inf", "infinity", "+inf"):
            return float("inf")
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational literal: {x!r}") from exc
    raise ValueError(f"not a number: {x!r}")


def number_to_json(x: Number) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


# ---------------------------------------------------------------- oriented edges

def oriented(edge: str, sign: int = 1) -> str:
    return ("+" if sign > 0 else "-") + edge


def edge_of(oe: str) -> str:
    return oe[1:]


def sign_of(oe: str) -> int:
    return 1 if oe[0] == "+" else -1


def reverse(oe: str) -> str:
    return ("-" if oe[0] == "+" else "+") + oe[1:]


def reverse_word(word: Iterable[str]) -> tuple[str, ...]:
    return tuple(reverse(x) for x in reversed(tuple(word)))


# ---------------------------------------------------------------- graph

@dataclass(frozen=True)
class Vertex:
    id: str
    marked: bool = False


@dataclass(frozen=True)
class Edge:
    id: str
    ends: tuple[str, str]


@dataclass(frozen=True)
class MarkedGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    _vindex: dict = field(init=False, repr=False, compare=False, hash=False)
    _eindex: dict = field(init=False, repr=False, compare=False, hash=False)
    _dirs: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(Edge(e.id, tuple(e.ends)) for e in self.edges))
        object.__setattr__(self, "_vindex", {v.id: v for v in self.vertices})
        object.__setattr__(self, "_eindex", {e.id: e for e in self.edges})
        dirs: dict[str, list[str]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            a, b = e.ends
            dirs.setdefault(a, []).append("+" + e.id)
            dirs.setdefault(b, []).append("-" + e.id)
        object.__setattr__(self, "_dirs", {k: tuple(v) for k, v in dirs.items()})

    @classmethod
    def build(cls, vertices: Iterable, edges: Iterable, marked: Iterable[str] = ()) -> "MarkedGraph":
        """Convenience constructor: ``vertices`` are ids, ``edges`` are ``(id, a, b)``."""
        marked = set(marked)
        vs = tuple(Vertex(v, v in marked) for v in vertices)
        es = tuple(Edge(e, (a, b)) for e, a, b in edges)
        g = cls(vs, es)
        validate_graph(g)
        return g

    @property
    def vertex_ids(self) -> list[str]:
        return [v.id for v in self.vertices]

    @property
    def edge_ids(self) -> list[str]:
        return [e.id for e in self.edges]

    @property
    def marked(self) -> list[str]:
        return [v.id for v in self.vertices if v.marked]

    def has_vertex(self, v: str) -> bool:
        return v in self._vindex

    def has_edge(self, e: str) -> bool:
        return e in self._eindex

    def is_marked(self, v: str) -> bool:
        return self._vindex[v].marked

    def ends(self, e: str) -> tuple[str, str]:
        return self._eindex[e].ends

    def tail(self, oe: str) -> str:
        a, b = self._eindex[oe[1:]].ends
        return a if oe[0] == "+" else b

    def head(self, oe: str) -> str:
        a, b = self._eindex[oe[1:]].ends
        return b if oe[0] == "+" else a

    def directions(self, v: str) -> tuple[str, ...]:
        """Oriented edges leaving ``v``; a self-loop contributes both orientations."""
        return self._dirs.get(v, ())

    def degree(self, v: str) -> int:
        return len(self.directions(v))

    def oriented_edges(self) -> list[str]:
        return [s + e.id for e in self.edges for s in "+-"]

    def components(self, edge_subset: Iterable[str] | None = None,
                   vertex_subset: Iterable[str] | None = None) -> list[set[str]]:
        """Vertex sets of connected components of the subgraph spanned by the given edges."""
        edges = self.edge_ids if edge_subset is None else list(edge_subset)
        verts = set(self.vertex_ids if vertex_subset is None else vertex_subset)
        for e in edges:
            verts.update(self.ends(e))
        parent = {v: v for v in verts}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in edges:
            a, b = self.ends(e)
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        comps: dict[str, set[str]] = {}
        for v in verts:
            comps.setdefault(find(v), set()).add(v)
        order = {v: i for i, v in enumerate(self.vertex_ids)}
        return sorted(comps.values(), key=lambda c: min(order.get(v, 0) for v in c))

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges)


def validate_graph(g: MarkedGraph) -> None:
    """Raise :class:`GraphValidationError` listing every violated invariant."""
    errors = []
    seen: set[str] = set()
    for v in g.vertices:
        if v.id in seen:
            errors.append(f"duplicate id: vertex {v.id!r}")
        seen.add(v.id)
    seen_e: set[str] = set()
    for e in g.edges:
        if e.id in seen_e:
            errors.append(f"duplicate id: edge {e.id!r}")
        seen_e.add(e.id)
        if len(e.ends) != 2:
            errors.append(f"edge {e.id!r} must have exactly two ends")
            continue
        for x in e.ends:
            if x not in seen:
                errors.append(f"dangling endpoint: edge {e.id!r} references missing vertex {x!r}")
    if errors:
        raise GraphValidationError(errors)


# ---------------------------------------------------------------- scalars

@dataclass(frozen=True)
class EdgeScalars:
    """Per-edge values of one kind: ``weight``, ``alpha`` or ``length``."""

    kind: str
    values: Mapping[str, Number]

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS:
            raise ValueError(f"unknown scalar kind {self.kind!r}")
        object.__setattr__(self, "values", dict(self.values))

    def __getitem__(self, e: str) -> Number:
        return self.values[e]

    def get(self, e: str, default=None):
        return self.values.get(e, default)

    def items(self):
        return self.values.items()

    def as_float(self) -> "EdgeScalars":
        return EdgeScalars(self.kind, {k: float(v) for k, v in self.values.items()})

    def check(self, g: MarkedGraph, allow_zero: bool = True) -> None:
        errors = []
        for e in g.edge_ids:
            if e not in self.values:
                errors.append(f"missing {self.kind} on edge {e!r}")
                continue
            x = self.values[e]
            if self.kind == "alpha" and not x > 0:
                errors.append(f"alpha must be positive on edge {e!r}")
            elif x < 0 or (not allow_zero and x == 0):
                errors.append(f"invalid {self.kind} {x} on edge {e!r}")
        if errors:
            raise GraphValidationError(errors)


def scalars(kind: str, values: Mapping[str, object]) -> EdgeScalars:
    return EdgeScalars(kind, {k: to_number(v) for k, v in values.items()})


# ---------------------------------------------------------------- collapse / subdivide

@dataclass(frozen=True)
class Collapse:
    graph: MarkedGraph
    vertex_map: dict   # old vertex -> new vertex
    edge_map: dict     # kept old edge -> new edge (identical ids)
    collapsed_edges: frozenset


def collapse_subgraph(g: MarkedGraph, null_edges: Iterable[str]) -> Collapse:
    """Contract each component of the subgraph spanned by ``null_edges`` to a vertex."""
    null = set(null_edges)
    for e in null:
        if not g.has_edge(e):
            raise GraphValidationError([f"unknown edge {e!r} in subgraph"])
    vmap = {v: v for v in g.vertex_ids}
    order = {v: i for i, v in enumerate(g.vertex_ids)}
    for comp in g.components(sorted(null), vertex_subset=()):
        rep = min(comp, key=order.get)
        for v in comp:
            vmap[v] = rep
    new_vertices = []
    for v in g.vertices:
        if vmap[v.id] == v.id:
            marked = any(g.is_marked(u) for u in g.vertex_ids if vmap[u] == v.id)
            new_vertices.append(Vertex(v.id, marked))
    new_edges = [Edge(e.id, (vmap[e.ends[0]], vmap[e.ends[1]])) for e in g.edges if e.id not in null]
    h = MarkedGraph(tuple(new_vertices), tuple(new_edges))
    return Collapse(h, vmap, {e.id: e.id for e in new_edges}, frozenset(null))


@dataclass(frozen=True)
class Subdivision:
    graph: MarkedGraph
    scalars: tuple
    first: str
    second: str
    vertex: str


def subdivide_edge(g: MarkedGraph, e: str, t, structures: Iterable[EdgeScalars] = ()) -> Subdivision:
    """Split ``e`` at parameter ``t``; alpha and length split ``t : 1-t``, weights copied."""
    t = to_number(t)
    if not 0 < t < 1:
        raise ValueError(f"subdivision parameter must lie in (0,1), got {t}")
    if not g.has_edge(e):
        raise GraphValidationError([f"unknown edge {e!r}"])
    a, b = g.ends(e)
    taken = set(g.vertex_ids) | set(g.edge_ids)
    base = e
    mid, e1, e2 = f"{base}.m", f"{base}.a", f"{base}.b"
    k = 1
    while mid in taken or e1 in taken or e2 in taken:
        k += 1
        mid, e1, e2 = f"{base}.m{k}", f"{base}.a{k}", f"{base}.b{k}"
    verts = g.vertices + (Vertex(mid, False),)
    edges = []
    for ed in g.edges:
        if ed.id == e:
            edges.append(Edge(e1, (a, mid)))
            edges.append(Edge(e2, (mid, b)))
        else:
            edges.append(ed)
    out = []
    for s in structures:
        vals = {k2: v for k2, v in s.values.items() if k2 != e}
        x = s.values[e]
        if s.kind == "weight":
            vals[e1] = x
            vals[e2] = x
        else:
            vals[e1] = x * t
            vals[e2] = x * (1 - t)
        out.append(EdgeScalars(s.kind, vals))
    return Subdivision(MarkedGraph(verts, tuple(edges)), tuple(out), e1, e2, mid)


# ---------------------------------------------------------------- JSON

_JSON_FIELDS = {"alpha": "alpha", "length": "length", "weight": "weight"}


def graph_from_dict(data: dict) -> tuple[MarkedGraph, dict[str, EdgeScalars]]:
    """Build a graph and whichever scalar structures are present in ``data``."""
    if not isinstance(data, dict) or "vertices" not in data or "edges" not in data:
        raise GraphValidationError(["graph JSON needs 'vertices' and 'edges'"])
    try:
        vs = tuple(Vertex(str(v["id"]), bool(v.get("marked", False))) for v in data["vertices"])
        es = tuple(Edge(str(e["id"]), tuple(str(x) for x in e["ends"])) for e in data["edges"])
    except (KeyError, TypeError) as exc:
        raise GraphValidationError([f"malformed graph record: {exc}"]) from exc
    g = MarkedGraph(vs, es)
    validate_graph(g)
    structs: dict[str, EdgeScalars] = {}
    for kind, key in _JSON_FIELDS.items():
        vals = {}
        for e in data["edges"]:
            if key in e:
                try:
                    vals[str(e["id"])] = to_number(e[key])
                except ValueError as exc:
                    raise GraphValidationError([f"edge {e['id']!r}: {exc}"]) from exc
        if vals:
            s = EdgeScalars(kind, vals)
            s.check(g)
            structs[kind] = s
    return g, structs


def graph_to_dict(g: MarkedGraph, structures: Iterable[EdgeScalars] = ()) -> dict:
    by_kind = {s.kind: s for s in structures}
    edges = []
    for e in g.edges:
        rec = {"id": e.id, "ends": list(e.ends)}
        for kind, key in _JSON_FIELDS.items():
            if kind in by_kind and e.id in by_kind[kind].values:
                rec[key] = number_to_json(by_kind[kind][e.id])
        edges.append(rec)
    return {"vertices": [{"id": v.id, "marked": v.marked} for v in g.vertices], "edges": edges}


def load_graph(text: str) -> tuple[MarkedGraph, dict[str, EdgeScalars]]:
    return graph_from_dict(json.loads(text))
