import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucplab import geometry as geo
from ucplab.bounds import (BoundParams, classify_dominant, covering_count,
                           dominant_mass_bound, projector_chain, thm1_bound,
                           thm2_gamma, thm3_factor, thm3_lhs_rhs, weyl_threshold)
from ucplab.errors import InvalidParameter
from ucplab.hamiltonian import Grid, HamiltonianOperator, build_potential, residual_norm
from ucplab.spectral import eigenpairs


def test_thm1_examples():
    assert thm1_bound(BoundParams(0.5, 1.0, 0.0, 1.0)) == pytest.approx(0.5, rel=1e-15)
    assert thm1_bound(BoundParams(0.1, 1.0, 1.0, 1.0)) == pytest.approx(0.01, rel=1e-13)
    for M in (0.01, 1.0, 37.0):
        assert thm1_bound(BoundParams(M / 2, M, 0.0, 2.5)) == pytest.approx(0.5 ** 2.5, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(r=st.floats(0.01, 0.5), M=st.floats(0.1, 10), v=st.floats(0, 50), K=st.floats(0.01, 5),
       s=st.floats(0.05, 20))
def test_thm1_scaling_invariance(r, M, v, K, s):
    a = thm1_bound(BoundParams(r * M, M, v, K))
    b = thm1_bound(BoundParams(r * M * s, M * s, v / s ** 2, K))
    assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(r=st.floats(0.01, 0.49), v=st.floats(0, 10), K=st.floats(0.1, 5))
def test_thm1_range_and_monotonicity(r, v, K):
    b = thm1_bound(BoundParams(r, 1.0, v, K))
    assert 0 < b < 1
    assert thm1_bound(BoundParams(r * 1.01, 1.0, v, K)) > b
    assert thm1_bound(BoundParams(r, 1.0, v + 1, K)) < b
    assert thm1_bound(BoundParams(r, 1.0, v, K * 1.1)) < b


@pytest.mark.parametrize("p, theorem", [
    (BoundParams(0.6, 1.0), "thm1"),
    (BoundParams(0.0, 1.0), "thm1"),
    (BoundParams(0.5, 1.0, E0=1.0), "thm2"),
    (BoundParams(0.5, 1.0), "thm3"),
    (BoundParams(0.2, 1.0, K=0.0), "thm1"),
    (BoundParams(0.2, 1.0, v_norm=-1.0), "thm1"),
    (BoundParams(0.2, 1.0), "thm2"),
    (BoundParams(0.2, -1.0), "thm1"),
    (BoundParams(float("nan"), 1.0), "thm1"),
])
def test_validation(p, theorem):
    with pytest.raises(InvalidParameter):
        p.validate(theorem)


def test_k1_floor_flag():
    assert BoundParams(0.2, 1.0, K=0.4).below_k1_floor
    assert not BoundParams(0.2, 1.0, K=1.0).below_k1_floor


def test_gamma_examples():
    g = thm2_gamma(BoundParams(0.49999999999, 1.0, 0.0, 1.0, E0=1.0))
    assert g ** 2 == pytest.approx(1 / 8, rel=1e-9)
    p = BoundParams(0.3, 1.0, 0.5, 1.2, E0=2.0)
    assert thm2_gamma(BoundParams(0.3, 1.0, 0.5, 1.2, E0=4.0)) < thm2_gamma(p)
    assert thm2_gamma(BoundParams(1e-8, 1.0, 0.5, 1.2, E0=2.0)) < 1e-6
    # floor reported by the projector check is M^4 gamma^2 from the same gamma
    M = 2.0
    p = BoundParams(0.3, M, 0.5, 1.2, E0=2.0)
    g = thm2_gamma(p)
    g2 = (0.3 / M) ** (1.2 * (1 + M ** (4 / 3) * 3.0 ** (2 / 3))) / (2 * M ** 4)
    assert M ** 4 * g ** 2 == pytest.approx(M ** 4 * g2, rel=1e-13)


def test_weyl_threshold():
    assert weyl_threshold(BoundParams(0.5, 1.0, 0.0, 1.0)) == pytest.approx(1.0, rel=1e-14)
    lo = weyl_threshold(BoundParams(0.25, 1.0, 0.0, 1.0))
    hi = weyl_threshold(BoundParams(0.25, 1.0, 2.0, 1.0))
    assert hi > lo
    # derivative probe in delta: its sign depends on K, so only record it
    f = lambda d, K: weyl_threshold(BoundParams(d, 1.0, 0.0, K))
    slope_small_K = f(0.26, 0.5) - f(0.25, 0.5)
    slope_big_K = f(0.26, 4.0) - f(0.25, 4.0)
    assert slope_small_K > 0 > slope_big_K


def test_thm3_factor_matches_thm1_inside_open_range():
    p = BoundParams(0.3, 1.0, 2.0, 1.5)
    assert thm3_factor(p) == thm1_bound(p)
    with pytest.raises(InvalidParameter):
        thm3_factor(BoundParams(0.5, 1.0))


def _setup(d=1, n=255, L=8.0, delta=0.25, **pot):
    grid = Grid(d, L, n)
    pot.setdefault("family", "constant")
    H = HamiltonianOperator(grid, build_potential(pot, grid))
    Z = geo.make_periodic_sequence(d, 1.0, delta, geo.window_for_grid(grid, 1.0))
    return grid, H, geo.rasterize_mask(Z, grid)


def test_lhs_rhs_ball_supported():
    grid, H, mask = _setup()
    psi = mask.apply(np.exp(-grid.axis ** 2))
    for K in (0.01, 1.0, 10.0):
        lhs, rhs = thm3_lhs_rhs(psi, mask, BoundParams(0.25, 1.0, 0.0, K), H)
        assert rhs >= grid.norm2(psi) >= lhs


def test_lhs_rhs_eigenpair_consistency():
    grid, H, mask = _setup()
    sol = eigenpairs(H, 2)
    psi, E = sol.modes[1], sol.energies[1]
    _, rhs = thm3_lhs_rhs(psi, mask, BoundParams(0.25, 1.0, 0.0, 1.0), H)
    alt = grid.norm2(mask.apply(psi)) + 0.25 ** 2 * residual_norm(H, psi, 0.0) ** 2
    assert rhs == pytest.approx(alt, rel=1e-12)
    assert rhs == pytest.approx(grid.norm2(mask.apply(psi)) + 0.0625 * E ** 2, rel=1e-8)


def test_census_single_cell():
    grid = Grid(1, 200.0, 1999)
    phi = ((grid.axis >= -0.5) & (grid.axis < 0.5)).astype(float)
    c = classify_dominant(phi, grid, "thm1")
    assert c.T == 62
    site = {int(k[0]): i for i, k in enumerate(c.sites)}
    assert c.dominant[site[0]]
    assert not c.dominant[site[5]]        # zero mass, box holds the bump
    assert c.dominant[site[60]]           # zero mass, empty box: tie
    assert dominant_mass_bound(c)


def test_census_uniform_field():
    grid = Grid(1, 400.0, 3999)
    c = classify_dominant(np.ones(grid.shape), grid, 62.0)
    interior = ~c.clipped
    assert interior.any()
    assert np.all(c.dominant[interior])
    assert np.allclose(c.cell_mass[interior], 1.0, rtol=1e-2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), T=st.floats(1.0, 30.0))
def test_census_partition(seed, T):
    grid = Grid(2, 12.0, 47)
    phi = np.random.default_rng(seed).standard_normal(grid.shape)
    c = classify_dominant(phi, grid, T)
    assert c.mass_dominant + c.mass_weak == pytest.approx(c.mass_total, rel=1e-12)
    assert c.mass_dominant <= c.mass_total * (1 + 1e-12)


def _interior_field(rng, grid, d):
    # random smooth bumps well away from the edge
    X = grid.mesh()
    phi = np.zeros(grid.shape)
    for _ in range(rng.integers(1, 6)):
        c = rng.uniform(-grid.L / 8, grid.L / 8, d)
        w = rng.uniform(0.2, 3.0)
        phi += rng.standard_normal() * np.exp(-sum((Xa - ca) ** 2 for Xa, ca in zip(X, c)) / w ** 2)
    return phi


@pytest.mark.parametrize("variant", ["thm1", "thm3"])
def test_dominant_mass_random_1d(variant):
    rng = np.random.default_rng(2024)
    grid = Grid(1, 400.0, 3999)
    for _ in range(100):
        phi = _interior_field(rng, grid, 1)
        assert grid.boundary_mass(phi) < 1e-6
        assert dominant_mass_bound(classify_dominant(phi, grid, variant))


def test_dominant_mass_ground_state_2d():
    grid = Grid(2, 10.0, 49)
    H = HamiltonianOperator(grid, build_potential({"family": "well", "half_width": 2.0, "outside": 40.0}, grid))
    psi = eigenpairs(H, 1).modes[0]
    assert dominant_mass_bound(classify_dominant(psi, grid, 124.0))


def test_census_json():
    grid = Grid(1, 20.0, 199)
    c = classify_dominant(np.exp(-grid.axis ** 2), grid, "thm3")
    doc = json.loads(c.to_json())
    assert set(doc) >= {"T", "variant", "dominant", "mass_dominant", "mass_total", "clipped"}
    assert doc["variant"] == "thm3"


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 3), T=st.floats(1.0, 50.0), seed=st.integers(0, 1000))
def test_covering_count(d, T, seed):
    pts = np.random.default_rng(seed).uniform(-20, 20, (50, d))
    counts = covering_count(pts, T)
    assert np.all(counts <= math.ceil(T) ** d)
    assert np.all(counts >= math.floor(T) ** d)
    # brute force for the first point
    x = pts[0]
    ks = [np.arange(math.floor(xi - T), math.ceil(xi + T) + 1) for xi in x]
    mesh = np.stack(np.meshgrid(*ks, indexing="ij"), -1).reshape(-1, d)
    inside = np.all((mesh - T / 2 <= x) & (x < mesh + T / 2), axis=1)
    assert counts[0] == inside.sum()


def test_projector_chain_on_eigenfunction():
    grid, H, mask = _setup(L=8.0, n=127, family="well", half_width=2.0, outside=20.0)
    sol = eigenpairs(H, 1)
    p = BoundParams(0.25, 1.0, H.potential.sup_norm, 0.3, E0=sol.energies[0] + 1)
    gamma = thm2_gamma(p)
    out = projector_chain(sol.modes[0], mask, H, sol.energies[0], gamma, p)
    assert set(out["checks"]) == {"residual", "norm_shift", "thm3", "substitute", "algebra", "conclusion"}
    assert out["checks"]["residual"] and out["checks"]["algebra"] and out["checks"]["substitute"]
    assert out["terms"]["floor2"] == pytest.approx(gamma ** 2 * grid.norm2(sol.modes[0]))
