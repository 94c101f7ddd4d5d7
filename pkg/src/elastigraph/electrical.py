"""Resistor networks: an elastic graph is a network with resistance alpha(e) per edge
and its marked vertices as terminals."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .graph_core import Edge, EdgeScalars, MarkedGraph, Vertex


class FloatingComponentError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseMatrix:
    nodes: tuple
    matrix: tuple  # rows of numbers

    def __getitem__(self, ij):
        i, j = ij
        return self.matrix[self.nodes.index(i)][self.nodes.index(j)]

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "matrix": [[_num(x) for x in row] for row in self.matrix]}


def _num(x):
    return str(x) if isinstance(x, Fraction) else x


def _exact(values) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in values)


def _laplacian(g: MarkedGraph, alpha: Mapping[str, object], exact: bool):
    ids = list(g.vertex_ids)
    idx = {v: i for i, v in enumerate(ids)}
    zero = Fraction(0) if exact else 0.0
    L = [[zero] * len(ids) for _ in ids]
    for e in g.edge_ids:
        a, b = g.ends(e)
        if a == b:
            continue
        c = (1 / Fraction(alpha[e])) if exact else 1.0 / float(alpha[e])
        i, j = idx[a], idx[b]
        L[i][i] += c
        L[j][j] += c
        L[i][j] -= c
        L[j][i] -= c
    return ids, L


def _check_floating(g: MarkedGraph) -> None:
    for comp in g.components():
        if not any(g.is_marked(v) for v in comp):
            raise FloatingComponentError(f"component {sorted(comp)} touches no terminal")


def _solve_fractions(A: list[list[Fraction]], B: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve ``A X = B`` by Gauss-Jordan elimination over the rationals."""
    n = len(A)
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            raise FloatingComponentError("internal block is singular")
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [x / piv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [row[n:] for row in M]


def response_matrix(g: MarkedGraph, alpha: Mapping[str, object], exact: bool | None = None) -> ResponseMatrix:
    """Schur complement of the conductance Laplacian onto the terminals."""
    vals = [alpha[e] for e in g.edge_ids]
    if any(not float(x) > 0 for x in vals):
        raise ValueError("resistances must be positive")
    exact = _exact(vals) if exact is None else exact
    _check_floating(g)
    ids, L = _laplacian(g, alpha, exact)
    nodes = [v for v in ids if g.is_marked(v)]
    inner = [v for v in ids if not g.is_marked(v)]
    ni = [ids.index(v) for v in nodes]
    ii = [ids.index(v) for v in inner]
    Lnn = [[L[i][j] for j in ni] for i in ni]
    if not inner:
        return ResponseMatrix(tuple(nodes), tuple(tuple(r) for r in Lnn))
    Lni = [[L[i][j] for j in ii] for i in ni]
    Lin = [[L[i][j] for j in ni] for i in ii]
    Lii = [[L[i][j] for j in ii] for i in ii]
    if exact:
        X = _solve_fractions(Lii, Lin)
        out = [[Lnn[r][c] - sum(Lni[r][k] * X[k][c] for k in range(len(ii))) for c in range(len(ni))]
               for r in range(len(ni))]
    else:
        A = np.array(Lii, dtype=float)
        try:
            X = np.linalg.solve(A, np.array(Lin, dtype=float))
        except np.linalg.LinAlgError as exc:
            raise FloatingComponentError("internal block is singular") from exc
        out = (np.array(Lnn, dtype=float) - np.array(Lni, dtype=float) @ X).tolist()
    return ResponseMatrix(tuple(nodes), tuple(tuple(r) for r in out))


def electrical_energy(g: MarkedGraph, alpha: Mapping[str, object], voltages: Mapping[str, object]) -> object:
    """Power dissipated with the given terminal voltages: ``V^T Lambda V``."""
    R = response_matrix(g, alpha, _exact([alpha[e] for e in g.edge_ids]) and _exact(voltages.values()))
    V = [voltages[v] for v in R.nodes]
    return sum(V[i] * R.matrix[i][j] * V[j] for i in range(len(V)) for j in range(len(V)))


# ---------------------------------------------------------------- Y-Delta

def y_delta(r1, r2, r3) -> tuple:
    """Star resistances to the equivalent triangle; ``R_i`` is opposite node ``i``."""
    s = r1 * r2 + r2 * r3 + r3 * r1
    return s / r1, s / r2, s / r3


def delta_y(R1, R2, R3) -> tuple:
    """Triangle resistances to the equivalent star."""
    t = R1 + R2 + R3
    return R2 * R3 / t, R1 * R3 / t, R1 * R2 / t


# ---------------------------------------------------------------- reductions

@dataclass(frozen=True)
class Network:
    graph: MarkedGraph
    alpha: dict

    def scalars(self) -> EdgeScalars:
        return EdgeScalars("alpha", dict(self.alpha))


def _rebuild(vertices: Sequence[Vertex], edges: dict[str, tuple[str, str]], alpha: dict) -> Network:
    used = {x for a, b in edges.values() for x in (a, b)}
    verts = tuple(v for v in vertices if v.marked or v.id in used)
    es = tuple(Edge(e, ends) for e, ends in edges.items())
    return Network(MarkedGraph(verts, es), {e: alpha[e] for e in edges})


def series_parallel_reduce(g: MarkedGraph, alpha: Mapping[str, object], y_delta_steps: bool = False) -> Network:
    """Apply series, parallel, loop and dangling-edge rewrites until none applies.

    With ``y_delta_steps`` an internal degree-3 vertex with three distinct
    neighbours is also replaced by a triangle.
    """
    edges = {e: g.ends(e) for e in g.edge_ids}
    al = {e: alpha[e] for e in g.edge_ids}
    marked = {v.id for v in g.vertices if v.marked}
    fresh = 0
    changed = True
    while changed:
        changed = False
        for e, (a, b) in list(edges.items()):
            if a == b:
                del edges[e]
                changed = True
        incid: dict[str, list[str]] = {}
        for e, (a, b) in edges.items():
            incid.setdefault(a, []).append(e)
            incid.setdefault(b, []).append(e)
        # dangling internal vertices carry no current
        for v, es in incid.items():
            if v not in marked and len(es) == 1:
                del edges[es[0]]
                changed = True
                break
        if changed:
            continue
        seen: dict[frozenset, str] = {}
        for e, (a, b) in sorted(edges.items()):
            key = frozenset((a, b))
            if key in seen:
                f = seen[key]
                al[f] = al[f] * al[e] / (al[f] + al[e])
                del edges[e]
                changed = True
                break
            seen[key] = e
        if changed:
            continue
        for v, es in sorted(incid.items()):
            if v in marked or len(es) != 2:
                continue
            e, f = es
            x = edges[e][0] if edges[e][1] == v else edges[e][1]
            y = edges[f][0] if edges[f][1] == v else edges[f][1]
            del edges[f]
            edges[e] = (x, y)
            al[e] = al[e] + al[f]
            changed = True
            break
        if changed or not y_delta_steps:
            continue
        for v, es in sorted(incid.items()):
            if v in marked or len(es) != 3:
                continue
            nbrs = [edges[e][0] if edges[e][1] == v else edges[e][1] for e in es]
            if len(set(nbrs)) != 3:
                continue
            R = y_delta(*(al[e] for e in es))
            for e in es:
                del edges[e]
            for k in range(3):
                fresh += 1
                name = f"yd{fresh}"
                edges[name] = (nbrs[(k + 1) % 3], nbrs[(k + 2) % 3])
                al[name] = R[k]
            changed = True
            break
    return _rebuild(g.vertices, edges, al)


def equivalent(a: tuple[MarkedGraph, Mapping], b: tuple[MarkedGraph, Mapping], rel: float = 1e-10) -> bool:
    """Same terminals and the same response matrix."""
    ra, rb = response_matrix(*a), response_matrix(*b)
    if sorted(ra.nodes) != sorted(rb.nodes):
        return False
    for i in ra.nodes:
        for j in ra.nodes:
            x, y = ra[i, j], rb[i, j]
            if isinstance(x, Fraction) and isinstance(y, Fraction):
                if x != y:
                    return False
            elif abs(float(x) - float(y)) > rel * max(1.0, abs(float(x)), abs(float(y))):
                return False
    return True
