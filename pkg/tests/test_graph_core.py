import json
from fractions import Fraction

import pytest

from elastigraph.graph_core import (
    GraphValidationError, MarkedGraph, collapse_subgraph, graph_from_dict, graph_to_dict, load_graph,
    reverse, reverse_word, scalars, subdivide_edge, to_number,
)


def theta():
    return MarkedGraph.build(["p", "q"], [("t1", "p", "q"), ("t2", "p", "q"), ("t3", "p", "q")])


def test_numbers_parse_exactly():
    assert to_number("3/5") == Fraction(3, 5)
    assert to_number(2) == 2
    assert isinstance(to_number("0.25"), (float, Fraction))


def test_directions_and_orientation():
    g = MarkedGraph.build(["v"], [("l", "v", "v")])
    assert sorted(g.directions("v")) == ["+l", "-l"]
    assert g.degree("v") == 2
    assert g.tail("+l") == g.head("-l") == "v"
    assert reverse("+l") == "-l"
    assert reverse_word(("+a", "-b")) == ("+b", "-a")


def test_euler_characteristic_and_components():
    g = theta()
    assert g.euler_characteristic() == -1
    assert len(g.components()) == 1
    h = MarkedGraph.build(["a", "b", "c"], [("e", "a", "b")])
    assert len(h.components()) == 2


@pytest.mark.parametrize("vertices, edges, needle", [
    (["a", "a"], [], "duplicate id"),
    (["a"], [("e", "a", "b")], "dangling endpoint"),
    (["a", "b"], [("e", "a", "b"), ("e", "b", "a")], "duplicate id"),
])
def test_validation_errors(vertices, edges, needle):
    with pytest.raises(GraphValidationError) as exc:
        MarkedGraph.build(vertices, edges)
    assert needle in str(exc.value)


def test_scalar_checks():
    g = theta()
    with pytest.raises(GraphValidationError):
        scalars("alpha", {"t1": 1, "t2": 0, "t3": 1}).check(g)
    with pytest.raises(GraphValidationError):
        scalars("length", {"t1": 1, "t2": 1}).check(g)
    scalars("weight", {"t1": 0, "t2": 1, "t3": 2}).check(g)
    with pytest.raises(ValueError):
        scalars("mass", {})


def test_subdivision_splits_alpha_and_copies_weight():
    g = theta()
    sub = subdivide_edge(g, "t1", Fraction(1, 4), [scalars("alpha", {"t1": 4, "t2": 1, "t3": 1}),
                                                    scalars("weight", {"t1": 3, "t2": 1, "t3": 1})])
    a, w = sub.scalars
    assert a[sub.first] == 1 and a[sub.second] == 3
    assert w[sub.first] == w[sub.second] == 3
    assert sub.graph.euler_characteristic() == g.euler_characteristic()
    with pytest.raises(ValueError):
        subdivide_edge(g, "t1", 1)


def test_collapse_keeps_marks():
    g = MarkedGraph.build(["a", "b", "c"], [("x", "a", "b"), ("y", "b", "c"), ("z", "c", "a")], marked=["b"])
    col = collapse_subgraph(g, ["x"])
    assert len(col.graph.vertex_ids) == 2
    assert col.vertex_map["a"] == col.vertex_map["b"]
    assert col.graph.is_marked(col.vertex_map["b"])
    assert set(col.graph.edge_ids) == {"y", "z"}


def test_json_round_trip():
    text = json.dumps({"vertices": [{"id": "p", "marked": True}, {"id": "q"}],
                       "edges": [{"id": "e", "ends": ["p", "q"], "alpha": "1/3", "length": 2}]})
    g, s = load_graph(text)
    assert s["alpha"]["e"] == Fraction(1, 3)
    again, s2 = graph_from_dict(graph_to_dict(g, s.values()))
    assert again == g and s2["alpha"]["e"] == Fraction(1, 3) and s2["length"]["e"] == 2


def test_json_rejects_bad_records():
    with pytest.raises(GraphValidationError):
        graph_from_dict({"vertices": []})
    with pytest.raises(GraphValidationError):
        graph_from_dict({"vertices": [{"id": "p"}], "edges": [{"id": "e"}]})
    with pytest.raises(GraphValidationError):
        graph_from_dict({"vertices": [{"id": "p"}], "edges": [{"id": "e", "ends": ["p", "p"], "alpha": -1}]})
