"""Random instance generators shared by the test modules."""

from __future__ import annotations

import random
from collections import deque
from fractions import Fraction

from elastigraph.graph_core import MarkedGraph, scalars
from elastigraph.graph_maps import EdgePath, Point, realize

RATIONALS = (1, 2, 3, Fraction(1, 2), Fraction(3, 2))


def rand_graph(rng: random.Random, nv: int, ne: int, nm: int, prefix: str) -> MarkedGraph:
    """Connected graph: a random spanning tree plus extra edges (loops allowed)."""
    vs = [f"{prefix}{i}" for i in range(nv)]
    es = [(f"{prefix}e{i}", vs[rng.randrange(i)], vs[i]) for i in range(1, nv)]
    es += [(f"{prefix}x{j}", rng.choice(vs), rng.choice(vs)) for j in range(ne - (nv - 1))]
    return MarkedGraph.build(vs, es, marked=vs[:nm])


def rand_walk(rng: random.Random, k: MarkedGraph, start: str, end: str, steps: int) -> list[str]:
    """Random walk from ``start`` followed by a shortest path to ``end``."""
    path, cur = [], start
    for _ in range(steps):
        d = rng.choice(sorted(k.directions(cur)))
        path.append(d)
        cur = k.head(d)
    prev = {cur: None}
    todo = deque([cur])
    while todo:
        x = todo.popleft()
        for d in sorted(k.directions(x)):
            y = k.head(d)
            if y not in prev:
                prev[y] = (x, d)
                todo.append(y)
    tail, x = [], end
    while prev[x] is not None:
        tail.append(prev[x][1])
        x = prev[x][0]
    return path + tail[::-1]


def rand_map_between(rng: random.Random, g: MarkedGraph, k: MarkedGraph, max_steps: int = 3):
    vi = {}
    for v in g.vertex_ids:
        if g.is_marked(v):
            vi[v] = Point.at_vertex(k.marked[g.marked.index(v)])
        else:
            vi[v] = Point.at_vertex(rng.choice(k.vertex_ids))
    paths = {}
    for e in g.edge_ids:
        a, b = g.ends(e)
        word = rand_walk(rng, k, vi[a].vertex, vi[b].vertex, rng.randint(0, max_steps))
        paths[e] = EdgePath(tuple(word))
    return realize(g, k, vi, paths)


def rand_map(rng: random.Random, max_dom_edges: int = 5, max_cod_edges: int = 4):
    nm = rng.choice([0, 1, 2])
    g = rand_graph(rng, rng.randint(max(1, nm), 4), rng.randint(max(2, 3), max_dom_edges), nm, "g")
    k = rand_graph(rng, rng.randint(max(1, nm), 3), rng.randint(2, max_cod_edges), nm, "k")
    return rand_map_between(rng, g, k)


def rand_scalars(rng: random.Random, kind: str, edges, choices=RATIONALS):
    return scalars(kind, {e: rng.choice(choices) for e in edges})
