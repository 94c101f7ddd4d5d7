import random
from fractions import Fraction as F

from elastigraph.curves import MultiCurve
from elastigraph.graph_core import MarkedGraph, scalars
from elastigraph.graph_maps import EdgePath, Point, identity_map, multiplicity, realize, reduce_map
from elastigraph.taut import (
    TrainTrack, check_flows, check_train_track, gates_from_map, is_strongly_reduced, is_taut, make_taut,
    max_crossings, min_vertex_cut, star_cuts, tt_to_multicurve, vertex_flows,
)

INTERVAL = MarkedGraph.build(["s", "t"], [("k", "s", "t")], marked=["s", "t"])


def test_min_cut_on_a_path():
    g = MarkedGraph.build(["a", "m", "b"], [("x", "a", "m"), ("y", "m", "b")], marked=["a", "b"])
    w = {"x": F(3), "y": F(1)}
    assert min_vertex_cut(g, w, "a").weight == 1
    cuts = star_cuts(g, w)
    assert {m: c.weight for m, c in cuts.items()} == {"a": 1, "b": 1}


def test_flows_on_a_tripod():
    g = MarkedGraph.build(["c", "a", "b", "d"], [("x", "a", "c"), ("y", "b", "c"), ("z", "d", "c")],
                          marked=["a", "b", "d"])
    w = {"x": F(2), "y": F(1), "z": F(1)}
    fd = vertex_flows(g, w)
    assert check_flows(g, w, fd) == []
    assert fd.flow_value("a", "b") + fd.flow_value("a", "d") == 2
    assert fd.flow_value("b", "d") == 0


def test_eyeglass_map_is_reduced_but_not_strongly_reduced():
    eye = MarkedGraph.build(["p", "q"], [("a", "p", "p"), ("b", "q", "q"), ("c", "p", "q")])
    th = MarkedGraph.build(["x", "y"], [("t1", "x", "y"), ("t2", "x", "y"), ("t3", "x", "y")])
    f = realize(eye, th, {"p": Point.at_vertex("x"), "q": Point.at_vertex("y")},
                {"a": EdgePath(("+t1", "-t2")), "b": EdgePath(("-t2", "+t1")), "c": EdgePath(("+t2",))})
    assert reduce_map(f).edge_paths == f.edge_paths
    assert not is_strongly_reduced(f).verdict
    assert is_strongly_reduced(identity_map(th)).verdict


def test_taut_interval_maps_have_cut_multiplicity():
    rng = random.Random(3)
    for _ in range(40):
        nv = rng.randint(2, 6)
        vs = [f"v{i}" for i in range(nv)]
        es = [(f"e{j}", rng.choice(vs), rng.choice(vs)) for j in range(rng.randint(1, 8))]
        g = MarkedGraph.build(vs, es, marked=vs[:2])
        w = {e: F(rng.randint(1, 5)) for e, _, _ in es}
        vi = {v: Point.at_vertex("s") for v in vs}
        vi["v1"] = Point.at_vertex("t")
        for v in vs[2:]:
            vi[v] = rng.choice([Point.at_vertex("s"), Point.at_vertex("t"), Point.on_edge("k", F(rng.randint(1, 9), 10))])

        def pos(p):
            return F(0) if p.vertex == "s" else F(1) if p.vertex == "t" else p.offset

        paths = {}
        for e, a, b in es:
            pa, pb = pos(vi[a]), pos(vi[b])
            if pa == pb:
                paths[e] = EdgePath(())
            elif pa < pb:
                paths[e] = EdgePath(("+k",), pa, pb)
            else:
                paths[e] = EdgePath(("-k",), 1 - pa, 1 - pb)
        t = make_taut(realize(g, INTERVAL, vi, paths), w)
        assert is_taut(t, scalars("weight", w))
        cut = min_vertex_cut(g, w, "v0").weight
        assert all(x == cut for x in multiplicity(t, scalars("weight", w)).values["k"])


def test_gates_of_identity_are_singletons():
    th = MarkedGraph.build(["x", "y"], [("t1", "x", "y"), ("t2", "x", "y"), ("t3", "x", "y")])
    gates = gates_from_map(identity_map(th))
    assert all(len(g) == 1 for gs in gates.values() for g in gs)


def test_train_track_checks_triangle_inequality():
    th = MarkedGraph.build(["x", "y"], [("t1", "x", "y"), ("t2", "x", "y"), ("t3", "x", "y")])
    single = {v: tuple(frozenset({d}) for d in th.directions(v)) for v in th.vertex_ids}
    bad = TrainTrack(th, {"t1": F(5), "t2": F(1), "t3": F(1)}, single)
    assert check_train_track(bad)
    good = TrainTrack(th, {"t1": F(2), "t2": F(1), "t3": F(1)}, single)
    assert check_train_track(good) == []
    c = tt_to_multicurve(good)
    assert isinstance(c, MultiCurve) and max_crossings(c) <= 2
