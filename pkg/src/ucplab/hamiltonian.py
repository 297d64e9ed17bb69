"""Finite-box discretisation of H = -Laplace + V with Dirichlet boundary."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import GridMismatch, InvalidParameter, ZeroField

# relative boundary mass above which a state is not trusted as a whole-space object
BOUNDARY_MASS_LIMIT = 1e-6


@dataclass(frozen=True)
class Grid:
    """Interior points x_j = -L/2 + j*h, j = 1..n per axis, h = L/(n+1)."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameter(f"dimension must be a positive integer, got {self.d}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidParameter(f"box side must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"points per axis must be positive, got {self.n}")

    @property
    def h(self) -> float:
        return self.L / (self.n + 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def N(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def axis(self) -> np.ndarray:
        return -self.L / 2 + self.h * np.arange(1, self.n + 1)

    def mesh(self):
        return np.meshgrid(*([self.axis] * self.d), indexing="ij")

    def rescaled(self, s: float) -> "Grid":
        """Same lattice of points with every length multiplied by ``s``."""
        return Grid(self.d, self.L * s, self.n)

    def check(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != self.shape:
            raise GridMismatch(f"field shape {u.shape} does not match grid {self.shape}")
        return u

    def norm2(self, u) -> float:
        """Discrete squared L2 norm h^d * sum |u_j|^2."""
        u = self.check(u)
        return float(self.cell_volume * np.vdot(u, u).real)

    def norm(self, u) -> float:
        return math.sqrt(self.norm2(u))

    def inner(self, u, v):
        u, v = self.check(u), self.check(v)
        return self.cell_volume * np.vdot(u, v)

    def boundary_mass(self, u) -> float:
        """Discrete mass h^d sum |u|^2 over points adjacent to the boundary."""
        u = self.check(u)
        edge = np.zeros(self.shape, dtype=bool)
        for ax in range(self.d):
            idx = [slice(None)] * self.d
            idx[ax] = 0
            edge[tuple(idx)] = True
            idx[ax] = -1
            edge[tuple(idx)] = True
        return float(self.cell_volume * np.sum(np.abs(u[edge]) ** 2))

    def boundary_flag(self, u) -> bool:
        """True when the boundary carries more than BOUNDARY_MASS_LIMIT of the mass."""
        total = self.norm2(u)
        return total > 0 and self.boundary_mass(u) > BOUNDARY_MASS_LIMIT * total


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------

FAMILIES = ("constant", "step", "well", "periodic-cosine", "random-alloy")


@dataclass(frozen=True)
class Potential:
    grid: Grid
    values: np.ndarray = field(repr=False)
    family: str
    params: dict

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, c: float) -> "Potential":
        params = dict(self.params, shift=self.params.get("shift", 0.0) + c)
        return Potential(self.grid, self.values + c, self.family, params)

    def deviation(self, E: float) -> float:
        """Grid value of ||V - E||_inf."""
        return float(np.max(np.abs(self.values - E)))


def _finite(params, *names):
    for name in names:
        val = params.get(name)
        vals = np.atleast_1d(np.asarray(val, dtype=float)) if val is not None else []
        if not np.all(np.isfinite(vals)):
            raise InvalidParameter(f"potential parameter {name!r} must be finite")


def _alloy_bump(t):
    # tent-cosine bump supported in the unit cell, peak 1 at the centre
    return np.where(np.abs(t) < 0.5, np.cos(np.pi * t) ** 2, 0.0)


def build_potential(spec: dict, grid: Grid) -> Potential:
    """Build a bounded potential field from a family spec.

    Families and their parameters:

    * ``constant``: ``value``
    * ``step``: ``height`` on ``{x_1 > at}`` (``at`` defaults to 0)
    * ``well``: ``inside`` on the union of boxes ``|x - c|_inf < half_width``
      around each of ``centers``, ``outside`` elsewhere
    * ``periodic-cosine``: ``amplitude * sum_i cos(2 pi x_i / period)``
    * ``random-alloy``: i.i.d. uniform couplings on ``[low, high]`` at every
      unit-cell site times a cosine bump, seeded by ``seed``
    """
    spec = dict(spec)
    family = spec.pop("family", "constant")
    X = grid.mesh()
    if family == "constant":
        spec.setdefault("value", 0.0)
        _finite(spec, "value")
        values = np.full(grid.shape, float(spec["value"]))
    elif family == "step":
        spec.setdefault("height", 1.0)
        spec.setdefault("at", 0.0)
        _finite(spec, "height", "at")
        values = np.where(X[0] > spec["at"], float(spec["height"]), 0.0)
    elif family == "well":
        spec.setdefault("inside", 0.0)
        spec.setdefault("outside", 10.0)
        spec.setdefault("half_width", 1.0)
        spec.setdefault("centers", [[0.0] * grid.d])
        _finite(spec, "inside", "outside", "half_width")
        centers = np.asarray(spec["centers"], dtype=float).reshape(-1, grid.d)
        if not np.all(np.isfinite(centers)):
            raise InvalidParameter("well centers must be finite")
        spec["centers"] = centers.tolist()
        inside = np.zeros(grid.shape, dtype=bool)
        for c in centers:
            dist = np.max([np.abs(X[ax] - c[ax]) for ax in range(grid.d)], axis=0)
            inside |= dist < spec["half_width"]
        values = np.where(inside, float(spec["inside"]), float(spec["outside"]))
    elif family == "periodic-cosine":
        spec.setdefault("amplitude", 1.0)
        spec.setdefault("period", 1.0)
        _finite(spec, "amplitude", "period")
        if spec["period"] <= 0:
            raise InvalidParameter("period must be positive")
        values = spec["amplitude"] * sum(np.cos(2 * np.pi * Xa / spec["period"]) for Xa in X)
    elif family == "random-alloy":
        spec.setdefault("low", 0.0)
        spec.setdefault("high", 1.0)
        spec.setdefault("seed", 0)
        _finite(spec, "low", "high")
        ks = [np.floor(Xa + 0.5).astype(np.int64) for Xa in X]
        kmin = int(math.floor(-grid.L / 2 + 0.5))
        kmax = int(math.floor(grid.L / 2 + 0.5))
        side = kmax - kmin + 1
        rng = np.random.default_rng(int(spec["seed"]))
        omega = rng.uniform(spec["low"], spec["high"], size=(side,) * grid.d)
        coupling = omega[tuple(k - kmin for k in ks)]
        bump = np.ones(grid.shape)
        for Xa, ka in zip(X, ks):
            bump *= _alloy_bump(Xa - ka)
        values = coupling * bump
    else:
        raise InvalidParameter(f"unknown potential family {family!r}; expected one of {FAMILIES}")
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InvalidParameter("potential is not finite")
    return Potential(grid, values, family, spec)


# --------------------------------------------------------------------------
# operator
# --------------------------------------------------------------------------

class HamiltonianOperator:
    """psi -> (-Delta_h + V) psi on a Dirichlet box.

    The operator is symmetric in the discrete L2 inner product.  ``apply``
    goes through the stencil kernel; ``sparse_matrix`` and ``dense_matrix``
    assemble the same operator explicitly for solvers and oracles.
    """

    def __init__(self, grid: Grid, potential: Potential | None = None):
        if potential is None:
            potential = build_potential({"family": "constant", "value": 0.0}, grid)
        if potential.grid != grid:
            raise GridMismatch("potential lives on a different grid")
        self.grid = grid
        self.potential = potential
        self._inv_h2 = 1.0 / grid.h ** 2

    def __repr__(self):
        return f"HamiltonianOperator({self.grid}, family={self.potential.family!r})"

    def shifted(self, c: float) -> "HamiltonianOperator":
        return HamiltonianOperator(self.grid, self.potential.shifted(c))

    def apply(self, psi) -> np.ndarray:
        psi = self.grid.check(psi)
        if not np.iscomplexobj(psi):
            psi = psi.astype(np.float64, copy=False)
        return _kernels.hamiltonian_apply(psi, self.potential.values, self._inv_h2)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Flat-vector version of :meth:`apply`."""
        return self.apply(x.reshape(self.grid.shape)).ravel()

    def sparse_matrix(self) -> sp.csr_matrix:
        n, d = self.grid.n, self.grid.d
        lap1 = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) * self._inv_h2
        eye = sp.identity(n)
        lap = sp.csr_matrix((self.grid.N, self.grid.N))
        for ax in range(d):
            term = None
            for b in range(d):
                factor = lap1 if b == ax else eye
                term = factor if term is None else sp.kron(term, factor)
            lap = lap + term
        return (lap + sp.diags(self.potential.values.ravel())).tocsr()

    def dense_matrix(self) -> np.ndarray:
        return self.sparse_matrix().toarray()

    def tridiagonal(self):
        """(diagonal, offdiagonal) of the operator in one dimension."""
        if self.grid.d != 1:
            raise InvalidParameter("tridiagonal form exists only for d = 1")
        n = self.grid.n
        diag = 2 * self._inv_h2 + self.potential.values
        off = np.full(n - 1, -self._inv_h2)
        return diag, off


def apply_hamiltonian(H: HamiltonianOperator, psi) -> np.ndarray:
    return H.apply(psi)


def residual_norm(H: HamiltonianOperator, psi, E: float) -> float:
    """Discrete L2 norm of H psi - E psi."""
    psi = H.grid.check(psi)
    if not np.any(psi):
        raise ZeroField("residual of the zero field is undefined")
    return H.grid.norm(H.apply(psi) - E * psi)


def sine_mode(grid: Grid, m) -> tuple[np.ndarray, float]:
    """Discrete Dirichlet sine mode with multi-index ``m`` and its exact eigenvalue."""
    m = np.atleast_1d(m)
    if m.size != grid.d:
        raise InvalidParameter("mode index must have one entry per dimension")
    j = np.arange(1, grid.n + 1)
    psi = np.ones(grid.shape)
    lam = 0.0
    for ax, ma in enumerate(m):
        shape = [1] * grid.d
        shape[ax] = grid.n
        psi = psi * np.sin(ma * np.pi * j / (grid.n + 1)).reshape(shape)
        # 4 sin^2(theta/2) avoids the cancellation in 1 - cos(theta)
        lam += 4.0 / grid.h ** 2 * math.sin(ma * math.pi / (2 * (grid.n + 1))) ** 2
    return psi, lam
