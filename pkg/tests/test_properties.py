"""Property tests: random instances are built from a hypothesis-drawn seed."""

from __future__ import annotations

import json
import random
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))
from gen import rand_graph, rand_map, rand_map_between, rand_scalars  # noqa: E402

from elastigraph.cli import main  # noqa: E402
from elastigraph.curves import (  # noqa: E402
    Component, EnumerationLimit, MultiCurve, canonical_loop, curve_energy, edge_counts, enumerate_candidates,
    lipschitz_stretch, push_curve, reduce_curve, sf_el_lower_bound,
)
from elastigraph.electrical import equivalent, response_matrix, series_parallel_reduce  # noqa: E402
from elastigraph.emb_iter import compute_emb, iter_step  # noqa: E402
from elastigraph.graph_core import MarkedGraph, collapse_subgraph, scalars, subdivide_edge  # noqa: E402
from elastigraph.graph_maps import (  # noqa: E402
    EdgePath, Point, compose, energy, fill_function, multiplicity, realize, reduce_map,
)
from elastigraph.harmonic import harmonic_solve  # noqa: E402
from elastigraph.taut import (  # noqa: E402
    TrainTrack, check_train_track, cut_weight, is_taut, make_taut, max_crossings, min_vertex_cut, star_cuts,
    taut_to_star, tt_to_multicurve,
)

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def weighted_graph(rng, max_edges=8, k=None):
    k = rng.randint(1, 3) if k is None else k
    nv = rng.randint(k, 6)
    vs = [f"v{i}" for i in range(nv)]
    es = [(f"e{j}", rng.choice(vs), rng.choice(vs)) for j in range(rng.randint(1, max_edges))]
    g = MarkedGraph.build(vs, es, marked=vs[:k])
    return g, {e: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for e, _, _ in es}


def some_map(rng):
    try:
        return rand_map(rng)
    except ValueError:
        assume(False)


def interval_map(rng, g):
    """A map to the unit interval sending the first mark to ``s`` and the second to ``t``."""
    interval = MarkedGraph.build(["s", "t"], [("k", "s", "t")], marked=["s", "t"])
    pos = {v: Fraction(rng.randint(0, 4), 4) for v in g.vertex_ids}
    pos[g.marked[0]], pos[g.marked[1]] = Fraction(0), Fraction(1)

    def point(x):
        return Point.at_vertex("s") if x == 0 else Point.at_vertex("t") if x == 1 else Point.on_edge("k", x)

    paths = {}
    for e in g.edge_ids:
        a, b = (pos[x] for x in g.ends(e))
        paths[e] = EdgePath(()) if a == b else (EdgePath(("+k",), a, b) if a < b else EdgePath(("-k",), 1 - a, 1 - b))
    return realize(g, interval, {v: point(x) for v, x in pos.items()}, paths)


# ---------------------------------------------------------------- graphs

@FAST
@given(SEEDS)
def test_collapsing_nothing_changes_nothing(seed):
    rng = random.Random(seed)
    g, _ = weighted_graph(rng)
    null = [e for e in g.edge_ids if rng.random() < 0.4]
    once = collapse_subgraph(g, null).graph
    assert collapse_subgraph(once, []).graph == once


@FAST
@given(SEEDS)
def test_subdivision_preserves_totals(seed):
    rng = random.Random(seed)
    g, _ = weighted_graph(rng)
    a = rand_scalars(rng, "alpha", g.edge_ids)
    ell = rand_scalars(rng, "length", g.edge_ids)
    e = rng.choice(g.edge_ids)
    t = Fraction(rng.randint(1, 9), 10)
    sub = subdivide_edge(g, e, t, [a, ell])
    for before, after in zip((a, ell), sub.scalars):
        assert after[sub.first] + after[sub.second] == before[e]
        assert sum(after.values.values()) == sum(before.values.values())


# ---------------------------------------------------------------- maps and energies

ENERGIES = [(1, 1, "weight", "weight"), (1, 2, "weight", "alpha"), (1, "inf", "weight", "length"),
            (2, 2, "alpha", "alpha"), (2, "inf", "alpha", "length"), ("inf", "inf", "length", "length")]


@FAST
@given(SEEDS)
def test_reduction_never_increases_energy(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    r = reduce_map(f)
    for p, q, dk, ck in ENERGIES:
        ds = rand_scalars(random.Random(seed), dk, f.domain.edge_ids)
        cs = rand_scalars(random.Random(seed + 1), ck, f.codomain.edge_ids)
        assert energy(r, ds, cs, p, q) <= energy(f, ds, cs, p, q) + 1e-12


@FAST
@given(SEEDS)
def test_energies_invariant_under_target_subdivision(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    e = rng.choice(f.codomain.edge_ids)
    a2 = rand_scalars(rng, "alpha", f.codomain.edge_ids)
    l2 = rand_scalars(rng, "length", f.codomain.edge_ids)
    a1 = rand_scalars(rng, "alpha", f.domain.edge_ids)
    sub = subdivide_edge(f.codomain, e, Fraction(1, 3), [a2, l2])
    # the map from the target onto its subdivision is an isometry
    vi = {v: Point.at_vertex(v) for v in f.codomain.vertex_ids}
    paths = {x: EdgePath(("+" + x,)) for x in f.codomain.edge_ids if x != e}
    paths[e] = EdgePath(("+" + sub.first, "+" + sub.second))
    iso = realize(f.codomain, sub.graph, vi, paths, sub.scalars[1])
    g = realize(f.domain, f.codomain, f.vertex_images, f.edge_paths, l2)
    h = compose(g, iso)
    assert energy(h, a1, sub.scalars[1], 2, "inf") == energy(g, a1, l2, 2, "inf")
    ones = scalars("weight", {x: 1 for x in f.domain.edge_ids})
    assert energy(h, ones, sub.scalars[0], 1, 2) == energy(g, ones, a2, 1, 2)


@FAST
@given(SEEDS)
def test_taut_maps_have_constant_multiplicity(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    w = {e: Fraction(rng.randint(0, 4)) for e in f.domain.edge_ids}
    t = make_taut(f, w)
    n = multiplicity(t, scalars("weight", w))
    assert all(len(set(vals)) <= 1 for vals in n.values.values())
    assert is_taut(t, scalars("weight", w))
    before = multiplicity(f, scalars("weight", w))
    for e, vals in n.values.items():
        assert max(vals, default=0) <= max(before.values[e], default=0)
    again = make_taut(t, w)
    assert multiplicity(again, scalars("weight", w)).values == n.values


@FAST
@given(SEEDS)
def test_taut_multiplicity_is_concave_in_weights(seed):
    rng = random.Random(seed)
    g, w1 = weighted_graph(rng, k=2)
    w2 = {e: Fraction(rng.randint(0, 6), rng.randint(1, 3)) for e in w1}
    t = Fraction(rng.randint(0, 8), 8)
    mid = {e: t * w1[e] + (1 - t) * w2[e] for e in w1}
    f = interval_map(rng, g)

    def n(w):
        vals = multiplicity(make_taut(f, w), scalars("weight", w)).values["k"]
        return vals[0] if vals else Fraction(0)

    assert n(mid) >= t * n(w1) + (1 - t) * n(w2)
    assert n(w1) == min_vertex_cut(g, w1, g.marked[0]).weight


# ---------------------------------------------------------------- curves

@FAST
@given(SEEDS)
def test_curve_reduction_is_idempotent_and_shrinks(seed):
    rng = random.Random(seed)
    g = rand_graph(rng, rng.randint(1, 4), rng.randint(2, 6), 0, "g")
    comps = []
    for _ in range(rng.randint(1, 3)):
        start = rng.choice(g.vertex_ids)
        word, cur = [], start
        for _ in range(rng.randint(1, 8)):
            d = rng.choice(sorted(g.directions(cur)))
            word.append(d)
            cur = g.head(d)
        if cur != start:
            continue
        comps.append(Component("loop", tuple(word), Fraction(rng.randint(1, 3))))
    c = MultiCurve(tuple(comps))
    r = reduce_curve(c)
    assert reduce_curve(r) == r
    a = rand_scalars(rng, "alpha", g.edge_ids)
    ell = rand_scalars(rng, "length", g.edge_ids)
    assert curve_energy(r, ell) <= curve_energy(c, ell)
    assert sum(a[e] * x * x for e, x in edge_counts(r).items()) <= sum(a[e] * x * x for e, x in edge_counts(c).items())


@FAST
@given(SEEDS)
def test_push_curve_is_functorial(seed):
    rng = random.Random(seed)
    nm = rng.choice([0, 1, 2])
    gs = [rand_graph(rng, rng.randint(max(1, nm), 3), rng.randint(2, 4), nm, f"g{i}_") for i in range(3)]
    f = rand_map_between(rng, gs[0], gs[1], 2)
    g = rand_map_between(rng, gs[1], gs[2], 2)
    try:
        cands = enumerate_candidates(gs[0], limit=200)
    except EnumerationLimit:
        assume(False)
    for c in cands[:20]:
        assert cyclic_form(push_curve(c, compose(f, g))) == cyclic_form(push_curve(push_curve(c, f), g))


def cyclic_form(c):
    return [(k, canonical_loop(w) if k == "loop" else w, x) for k, w, x in
            ((p.kind, p.word, p.weight) for p in c.components)]


@SLOW
@given(SEEDS)
def test_lipschitz_value_bounds_every_candidate(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    try:
        cands = enumerate_candidates(f.domain, limit=2000)
    except EnumerationLimit:
        assume(False)
    l1 = rand_scalars(rng, "length", f.domain.edge_ids)
    l2 = rand_scalars(rng, "length", f.codomain.edge_ids)
    value, _ = lipschitz_stretch(f, l1, l2, cands)
    for c in cands:
        assert curve_energy(push_curve(c, f), l2) <= value * curve_energy(c, l1)


# ---------------------------------------------------------------- cuts and train tracks

@FAST
@given(SEEDS)
def test_cut_weight_is_submodular(seed):
    rng = random.Random(seed)
    g, w = weighted_graph(rng)
    vs = g.vertex_ids
    s1 = {v for v in vs if rng.random() < 0.5}
    s2 = {v for v in vs if rng.random() < 0.5}
    assert cut_weight(g, w, s1) + cut_weight(g, w, s2) >= cut_weight(g, w, s1 & s2) + cut_weight(g, w, s1 | s2)


@FAST
@given(SEEDS)
def test_star_map_multiplicity_matches_cuts(seed):
    rng = random.Random(seed)
    g, w = weighted_graph(rng, k=rng.randint(2, 3))
    star = taut_to_star(g, w)
    cuts = star_cuts(g, w)
    n = multiplicity(star, scalars("weight", w))
    for i, m in enumerate(g.marked):
        legs = [e for e in star.codomain.edge_ids if m in star.codomain.ends(e) or e.endswith(str(i))]
        assert legs
        for leg in legs[:1]:
            assert set(n.values[leg]) <= {cuts[m].weight}


@FAST
@given(SEEDS)
def test_train_tracks_yield_saturating_curves(seed):
    rng = random.Random(seed)
    g = rand_graph(rng, rng.randint(1, 4), rng.randint(2, 7), rng.randint(0, 1), "t")
    try:
        cands = enumerate_candidates(g, limit=2000)
    except EnumerationLimit:
        assume(False)
    assume(cands)
    picks = rng.sample(cands, min(len(cands), 3))
    comps = tuple(Component(p.components[0].kind, p.components[0].word, Fraction(rng.randint(1, 4))) for p in picks)
    counts = edge_counts(MultiCurve(comps))
    w = {e: Fraction(counts.get(e, 0)) for e in g.edge_ids}
    gates = {v: tuple(frozenset({d}) for d in g.directions(v)) for v in g.vertex_ids}
    tt = TrainTrack(g, w, gates)
    assume(not check_train_track(tt))
    c = tt_to_multicurve(tt)
    assert {e: x for e, x in edge_counts(c).items() if x} == {e: x for e, x in w.items() if x}
    assert max_crossings(c) <= 2


# ---------------------------------------------------------------- harmonic maps

@SLOW
@given(SEEDS)
def test_harmonic_solutions_are_certified_and_homogeneous(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    alpha = rand_scalars(rng, "alpha", f.domain.edge_ids)
    ell = rand_scalars(rng, "length", f.codomain.edge_ids)
    res = harmonic_solve(f, alpha, ell)
    assert res.certificate.passed
    trail = list(res.energy_trail)
    assert all(b <= a + 1e-12 * max(1.0, a) for a, b in zip(trail, trail[1:]))
    t = rng.choice([2, 3, Fraction(1, 2)])
    big = harmonic_solve(f, alpha, scalars("length", {e: t * x for e, x in ell.items()}))
    assert float(big.dirichlet) == pytest.approx(float(t * t) * float(res.dirichlet), rel=1e-8, abs=1e-10)
    for e in f.domain.edge_ids:
        assert float(big.pullback[e]) == pytest.approx(float(t) * float(res.pullback[e]), rel=1e-7, abs=1e-9)
    # the tension-weighted harmonic map is taut
    n = multiplicity(res.map, res.tension)
    for vals in n.values.values():
        if vals:
            assert max(vals) - min(vals) <= 1e-6 * max(1.0, max(vals))


# ---------------------------------------------------------------- iteration

@SLOW
@given(SEEDS)
def test_iteration_step_is_ray_linear(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    a1 = rand_scalars(rng, "alpha", f.domain.edge_ids)
    a2 = rand_scalars(rng, "alpha", f.codomain.edge_ids)
    ell = {e: rng.uniform(0.2, 2.0) for e in f.codomain.edge_ids}
    t = rng.uniform(0.5, 4.0)
    s1 = iter_step(ell, f, a1, a2)
    st_ = iter_step({e: t * x for e, x in ell.items()}, f, a1, a2)
    for e in ell:
        assert st_.next_lengths[e] == pytest.approx(t * s1.next_lengths[e], rel=1e-9, abs=1e-12)


@SLOW
@given(SEEDS)
def test_emb_sandwich_and_filling(seed):
    rng = random.Random(seed)
    f = some_map(rng)
    assume(len(f.domain.edge_ids) <= 6)
    a1 = rand_scalars(rng, "alpha", f.domain.edge_ids)
    a2 = rand_scalars(rng, "alpha", f.codomain.edge_ids)
    try:
        cands = enumerate_candidates(f.domain, limit=2000)
    except EnumerationLimit:
        assume(False)
    cert = compute_emb(f, a1, a2, trace_ratios=True)
    lower, _ = sf_el_lower_bound(f, a1, a2, cands)
    assert float(lower) <= cert.value + 1e-6
    assume(cert.psi is not None and cert.value > 0)
    assert cert.value <= float(energy(cert.psi, a1, a2, 2, 2)) + 1e-6 * max(1.0, cert.value)
    ratios = cert.trace.ratios if cert.trace else []
    assert all(b >= a - 1e-10 for a, b in zip(ratios, ratios[1:]))
    if cert.converged:
        fill = fill_function(cert.psi, a1, cert_scalars(cert, a2))
        for e in cert.delta2:
            for x in fill.values.get(e, ()):
                assert float(x) == pytest.approx(cert.value, rel=1e-6)
        assert float(fill.max()) <= cert.value * (1 + 1e-6) + 1e-9


def cert_scalars(cert, a2):
    return scalars("alpha", {e: a2[e] for e in cert.psi.codomain.edge_ids})


# ---------------------------------------------------------------- electrical

@FAST
@given(SEEDS)
def test_rewrites_preserve_response_exactly(seed):
    rng = random.Random(seed)
    nv = rng.randint(2, 7)
    vs = [f"v{i}" for i in range(nv)]
    es = [(f"e{i}", vs[rng.randrange(i)], vs[i]) for i in range(1, nv)]
    es += [(f"x{j}", rng.choice(vs), rng.choice(vs)) for j in range(rng.randint(0, 5))]
    g = MarkedGraph.build(vs, es, marked=vs[: rng.randint(2, min(3, nv))])
    al = {e: Fraction(rng.randint(1, 9), rng.randint(1, 4)) for e, _, _ in es}
    red = series_parallel_reduce(g, al, y_delta_steps=rng.random() < 0.5)
    a, b = response_matrix(g, al), response_matrix(red.graph, red.alpha)
    assert all(a[i, j] == b[i, j] for i in a.nodes for j in a.nodes)
    assert equivalent((g, al), (red.graph, red.alpha))
    m = response_matrix(g, {e: float(x) for e, x in al.items()}).as_array()
    assert np.abs(m - m.T).max() <= 1e-12 and np.abs(m.sum(axis=1)).max() <= 1e-12


# ---------------------------------------------------------------- command line

def test_cli_output_is_deterministic(capsys):
    data = Path(__file__).resolve().parent.parent / "data" / "tripod.json"
    outs = []
    for _ in range(2):
        assert main(["emb", str(data), "--seed", "3"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["converged"]
