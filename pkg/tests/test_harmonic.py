import random
import sys
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize

sys.path.insert(0, str(Path(__file__).parent))
from gen import rand_map, rand_scalars  # noqa: E402

from elastigraph.curves import EnumerationLimit, curve_energy, edge_counts, enumerate_candidates, lipschitz_stretch, push_curve
from elastigraph.graph_core import MarkedGraph, scalars
from elastigraph.graph_maps import EdgePath, Point, energy, realize
from elastigraph.harmonic import (
    HarmonicError, check_relaxed, dir_and_H_of_lengths, harmonic_certificate, harmonic_solve, lipschitz_search,
)


def tripod_problem(x=3):
    g = MarkedGraph.build(["c", "a1", "a2", "a3"], [("e1", "a1", "c"), ("e2", "a2", "c"), ("e3", "a3", "c")],
                          marked=["a1", "a2", "a3"])
    k = MarkedGraph.build(["o", "b1", "b2", "b3"], [("k1", "b1", "o"), ("k2", "b2", "o"), ("k3", "b3", "o")],
                          marked=["b1", "b2", "b3"])
    ell = scalars("length", {"k1": 1, "k2": 1, "k3": 1})
    vi = {"a1": Point.at_vertex("b1"), "a2": Point.at_vertex("b2"), "a3": Point.at_vertex("b3"),
          "c": Point.at_vertex("b2")}
    f0 = realize(g, k, vi, {"e1": EdgePath(("+k1", "-k2")), "e2": EdgePath(()), "e3": EdgePath(("+k3", "-k2"))}, ell)
    return f0, scalars("alpha", {"e1": 1, "e2": x, "e3": x}), ell


def relaxed_minimum(f, alpha, ell, cands):
    """min sum r^2/alpha subject to sum n_c r >= length(f c) for every candidate c."""
    edges = f.domain.edge_ids
    a = np.array([[float(edge_counts(c).get(e, 0)) for e in edges] for c in cands])
    b = np.array([float(curve_energy(push_curve(c, f), ell)) for c in cands])
    al = np.array([float(alpha[e]) for e in edges])
    cons = [{"type": "ineq", "fun": lambda r: a @ r - b, "jac": lambda r: a}]
    r0 = np.full(len(edges), max(1.0, b.max()))
    res = minimize(lambda r: (r ** 2 / al).sum(), r0, jac=lambda r: 2 * r / al, constraints=cons,
                   bounds=[(0, None)] * len(edges), method="SLSQP", options={"ftol": 1e-14, "maxiter": 1000})
    return res.fun


def test_tripod_from_another_start():
    f0, alpha, ell = tripod_problem()
    res = harmonic_solve(f0, alpha, ell)
    assert res.certificate.passed
    assert float(res.dirichlet) == pytest.approx(1.6, abs=1e-9)
    assert res.map.vertex_images["c"].edge == "k1"
    assert float(res.map.vertex_images["c"].offset) == pytest.approx(0.8, abs=1e-9)
    assert {e: float(x) for e, x in res.pullback.items()} == pytest.approx({"e1": 0.8, "e2": 1.2, "e3": 1.2})


def test_certificate_rejects_non_harmonic_map():
    f0, alpha, ell = tripod_problem()
    assert not harmonic_certificate(f0, alpha, ell).passed


def test_dir_matches_relaxed_problem_on_random_maps():
    rng = random.Random(1)
    checked = 0
    while checked < 25:
        try:
            f = rand_map(rng)
            cands = enumerate_candidates(f.domain, limit=3000)
        except (EnumerationLimit, ValueError):
            continue
        if not cands:
            continue
        alpha = rand_scalars(rng, "alpha", f.domain.edge_ids)
        ell = rand_scalars(rng, "length", f.codomain.edge_ids)
        res = harmonic_solve(f, alpha, ell)
        assert res.certificate.passed
        assert float(res.dirichlet) == pytest.approx(relaxed_minimum(f, alpha, ell, cands), rel=1e-6, abs=1e-9)
        assert check_relaxed({e: float(x) for e, x in res.pullback.items()}, f, ell, cands, tol=1e-7).ok
        checked += 1


def test_dir_is_homogeneous_in_lengths():
    f0, alpha, ell = tripod_problem()
    d1, h1 = dir_and_H_of_lengths(f0, alpha, ell)
    d3, h3 = dir_and_H_of_lengths(f0, alpha, scalars("length", {e: 3 * x for e, x in ell.items()}))
    assert d3 == pytest.approx(9 * d1)
    assert h3 == pytest.approx({e: 3 * x for e, x in h1.items()})


def test_weak_target_collapses_null_edges():
    f0, alpha, _ = tripod_problem()
    ell = scalars("length", {"k1": 0, "k2": 1, "k3": 1})
    res = harmonic_solve(f0, alpha, ell)
    # with k1 collapsed the center rides with b1; e2 and e3 each stretch over one unit edge
    assert float(res.dirichlet) == pytest.approx(2 / 3)


def test_invalid_alpha_is_rejected():
    f0, _, ell = tripod_problem()
    with pytest.raises(HarmonicError):
        harmonic_solve(f0, scalars("alpha", {"e1": 1, "e2": 0, "e3": 1}), ell)


def test_lipschitz_search_matches_stretch():
    rng = random.Random(7)
    done = 0
    while done < 8:
        try:
            f = rand_map(rng, 4, 3)
            cands = enumerate_candidates(f.domain, limit=2000)
        except (EnumerationLimit, ValueError):
            continue
        l1 = rand_scalars(rng, "length", f.domain.edge_ids)
        l2 = rand_scalars(rng, "length", f.codomain.edge_ids)
        value, _ = lipschitz_stretch(f, l1, l2, cands)
        best, g = lipschitz_search(f, l1, l2)
        assert best == pytest.approx(float(value), abs=1e-6)
        assert float(energy(g, l1, l2, "inf", "inf")) == pytest.approx(float(value), abs=1e-6)
        done += 1
