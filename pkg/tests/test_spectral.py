import math

import numpy as np
import pytest

from ucplab.errors import InvalidParameter, NoConvergence, UnreachableResidual
from ucplab.hamiltonian import Grid, HamiltonianOperator, build_potential, residual_norm
from ucplab.spectral import (discrete_wavenumber, eigenpairs, lanczos,
                             projector_basis, weyl_sequence)


def op(d, L, n, **pot):
    grid = Grid(d, L, n)
    pot.setdefault("family", "constant")
    return HamiltonianOperator(grid, build_potential(pot, grid))


def gram(A, B):
    return A.reshape(len(A), -1) @ B.reshape(len(B), -1).T


def test_box_ground_state_1d():
    sol = eigenpairs(op(1, 1.0, 511), 1)
    assert abs(sol.energies[0] - math.pi ** 2) / math.pi ** 2 < 1e-3


def test_box_ground_state_2d():
    sol = eigenpairs(op(2, 1.0, 40), 3)
    assert abs(sol.energies[0] - 2 * math.pi ** 2) / (2 * math.pi ** 2) < 5e-3
    # (1,2) and (2,1) are degenerate
    assert sol.energies[1] == pytest.approx(sol.energies[2], rel=1e-10)


def test_constant_shift_moves_spectrum():
    a = eigenpairs(op(1, 2.0, 100), 5)
    b = eigenpairs(op(1, 2.0, 100, value=3.25), 5)
    assert np.allclose(b.energies, a.energies + 3.25, rtol=0, atol=1e-9)
    assert np.allclose(a.modes, b.modes, atol=1e-8)


def test_lanczos_matches_dense_2d():
    H = op(2, 6.0, 30, family="random-alloy", low=0, high=4, seed=5)
    dense = eigenpairs(H, 6, method="dense")
    lz = eigenpairs(H, 6, method="lanczos")
    assert np.allclose(dense.energies, lz.energies, rtol=1e-9)
    overlap = gram(dense.modes, lz.modes) * H.grid.cell_volume
    assert np.allclose(np.abs(overlap), np.eye(6), atol=1e-6)


def test_lanczos_finds_degenerate_copies():
    H = op(2, 1.0, 24)
    dense = eigenpairs(H, 6, method="dense")
    lz = eigenpairs(H, 6, method="lanczos")
    assert np.allclose(dense.energies, lz.energies, rtol=1e-9)


def test_orthonormal_and_residual_contract():
    H = op(2, 3.0, 20, family="periodic-cosine", amplitude=2.0)
    sol = eigenpairs(H, 8, tol=1e-9)
    G = gram(sol.modes, sol.modes) * H.grid.cell_volume
    assert np.allclose(G, np.eye(8), atol=1e-10)
    assert np.all(np.diff(sol.energies) >= 0)
    for m, e, r in zip(sol.modes, sol.energies, sol.residuals):
        assert residual_norm(H, m, e) == pytest.approx(r)
        assert r <= 1e-9 * max(1, abs(e))


def test_eigenpairs_deterministic_signs():
    H = op(1, 4.0, 200, family="step")
    a, b = eigenpairs(H, 4), eigenpairs(H, 4)
    assert a.modes.tobytes() == b.modes.tobytes()


def test_eigenpairs_bad_input():
    H = op(1, 1.0, 10)
    with pytest.raises(InvalidParameter):
        eigenpairs(H, 0)
    with pytest.raises(InvalidParameter):
        eigenpairs(H, 11)
    with pytest.raises(InvalidParameter):
        eigenpairs(H, 2, method="magic")


def test_lanczos_budget_exhausted():
    H = op(2, 1.0, 30)
    with pytest.raises((NoConvergence, InvalidParameter)):
        lanczos(H.matvec, H.grid.N, 5, tol=1e-14, max_iter=8)


def test_projector_ranks():
    H = op(1, 1.0, 200)
    lo = eigenpairs(H, 3).energies
    assert projector_basis(H, (-10.0, lo[0] - 1)).rank == 0
    P = projector_basis(H, (lo[0] - 1, (lo[1] + lo[2]) / 2))
    assert P.rank == 2
    assert np.allclose(P.energies, lo[:2])


def test_projector_full_spectrum_small_grid():
    # three points: H = [[2,-1,0],[-1,2,-1],[0,-1,2]] / h^2
    H = op(1, 4.0, 3)
    P = projector_basis(H, (-1.0, 100.0))
    assert P.rank == 3
    cols = P.columns.reshape(3, -1) * math.sqrt(H.grid.cell_volume)
    assert np.allclose(cols @ cols.T, np.eye(3), atol=1e-12)
    expect = (2 - np.sqrt(2) * np.array([1, 0, -1])) / H.grid.h ** 2
    assert np.allclose(P.energies, expect)


def test_projector_method_agreement():
    H = op(1, 8.0, 300, family="periodic-cosine", amplitude=3.0)
    a = projector_basis(H, (-2.0, 6.0), method="dense")
    b = projector_basis(H, (-2.0, 6.0), method="lanczos")
    assert a.rank == b.rank
    assert np.allclose(a.energies, b.energies, atol=1e-8)


def test_projector_bad_interval():
    with pytest.raises(InvalidParameter):
        projector_basis(op(1, 1.0, 10), (2.0, 1.0))


def test_discrete_wavenumber():
    h = 0.01
    for E in (0.0, 1.0, 39.47, 1e4):
        xi = discrete_wavenumber(E, h)
        assert 4 * math.sin(xi * h / 2) ** 2 / h ** 2 == pytest.approx(E, rel=1e-13, abs=1e-15)
    with pytest.raises(UnreachableResidual):
        discrete_wavenumber(4.1 / h ** 2, h)


def test_weyl_packet_small_n():
    H = op(1, 600.0, 5999)
    it = weyl_sequence(H, (2 * math.pi) ** 2, 5)
    assert it.residual < 0.2
    assert H.grid.norm(it.psi) == pytest.approx(1.0, abs=1e-12)
    sig = [s for s, _ in it.trace]
    res = [r for _, r in it.trace]
    assert all(b > a for a, b in zip(sig, sig[1:]))
    assert all(b < a for a, b in zip(res, res[1:]))


def test_weyl_packet_unreachable():
    H = op(1, 4.0, 399)
    with pytest.raises(UnreachableResidual) as exc:
        weyl_sequence(H, (2 * math.pi) ** 2, 10 ** 6)
    assert exc.value.best_residual > 1e-6


def test_weyl_packet_needs_constant_potential():
    H = op(1, 20.0, 999, family="periodic-cosine")
    with pytest.raises(InvalidParameter):
        weyl_sequence(H, 10.0, 3)


def test_weyl_eigen_defect():
    H = op(1, 10.0, 300, family="step", height=5.0)
    sol = eigenpairs(H, 6)
    it = weyl_sequence(H, sol.energies[2] + 1e-3, 7, "eigen-defect", solution=sol)
    assert it.residual <= 1e-9 * max(1, abs(sol.energies[2]))
    it = weyl_sequence(H, sol.energies[2], 7, "eigen-defect", defect=0.5, solution=sol)
    assert it.residual == pytest.approx(0.5 / 7, rel=1e-6)
    assert H.grid.norm(it.psi) == pytest.approx(1.0, abs=1e-12)


def test_weyl_bad_strategy():
    with pytest.raises(InvalidParameter):
        weyl_sequence(op(1, 1.0, 10), 1.0, 1, "other")
    with pytest.raises(InvalidParameter):
        weyl_sequence(op(1, 1.0, 10), 1.0, 0)
