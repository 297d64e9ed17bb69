"""Closed-form sampling bounds and the dominant-site bookkeeping behind them.

The exponent constant K is always an explicit argument.  Its true value is
not known; callers pass either an illustrative number or a fitted estimate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, InvalidParameter
from .geometry import Mask, Window, observation_side, window_for_grid
from .hamiltonian import Grid, HamiltonianOperator


@dataclass(frozen=True)
class BoundParams:
    delta: float
    M: float
    v_norm: float = 0.0
    K: float = 1.0
    E0: float | None = None

    def validate(self, theorem: str = "thm1") -> "BoundParams":
        vals = [self.delta, self.M, self.v_norm, self.K] + ([self.E0] if self.E0 is not None else [])
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameter("bound parameters must be finite")
        if self.M <= 0:
            raise InvalidParameter(f"M must be positive, got {self.M}")
        if theorem in ("thm1", "thm4"):
            if not 0 < self.delta <= self.M / 2:
                raise InvalidParameter(f"{theorem} needs 0 < delta <= M/2, got delta={self.delta}, M={self.M}")
        elif theorem in ("thm2", "thm3"):
            if not 0 < self.delta < self.M / 2:
                raise InvalidParameter(f"{theorem} needs 0 < delta < M/2 (open interval), "
                                       f"got delta={self.delta}, M={self.M}")
        else:
            raise InvalidParameter(f"unknown theorem {theorem!r}")
        if self.v_norm < 0:
            raise InvalidParameter("potential norm must be nonnegative")
        if self.K <= 0:
            raise InvalidParameter("exponent constant K must be positive")
        if theorem == "thm2" and (self.E0 is None or self.E0 <= 0):
            raise InvalidParameter("thm2 needs an energy ceiling E0 > 0")
        return self

    @property
    def below_k1_floor(self) -> bool:
        """The residual-form constant is known to be >= 1; flag smaller trial values."""
        return self.K < 1


def _exponent(K, M, v):
    return K * (1 + M ** (4 / 3) * v ** (2 / 3))


def thm1_bound(p: BoundParams) -> float:
    """(delta/M)^(K (1 + M^(4/3) v^(2/3))), the norm-ratio floor."""
    p.validate("thm1")
    return (p.delta / p.M) ** _exponent(p.K, p.M, p.v_norm)


def thm3_factor(p: BoundParams) -> float:
    """Same power as thm1_bound, under the open-interval hypothesis on delta."""
    p.validate("thm3")
    return (p.delta / p.M) ** _exponent(p.K, p.M, p.v_norm)


def thm2_gamma(p: BoundParams) -> float:
    """gamma with gamma^2 = (1/(2 M^4)) (delta/M)^(K (1 + M^(4/3) (2 v + E0)^(2/3)))."""
    p.validate("thm2")
    g2 = (p.delta / p.M) ** _exponent(p.K, p.M, 2 * p.v_norm + p.E0) / (2 * p.M ** 4)
    return math.sqrt(g2)


def weyl_threshold(p: BoundParams) -> float:
    """sqrt(2) delta M (delta/M)^(-K (1 + M^(4/3) v^(2/3)) / 2)."""
    p.validate("thm4")
    return math.sqrt(2) * p.delta * p.M * (p.delta / p.M) ** (-0.5 * _exponent(p.K, p.M, p.v_norm))


def thm3_lhs_rhs(psi, mask: Mask, p: BoundParams, H: HamiltonianOperator) -> tuple[float, float]:
    """(factor * ||psi||^2, ||W psi||^2 + delta^2 M^2 ||H psi||^2)."""
    if mask.grid != H.grid:
        raise GridMismatch("mask and operator live on different grids")
    grid = H.grid
    psi = grid.check(psi)
    lhs = thm3_factor(p) * grid.norm2(psi)
    rhs = grid.norm2(mask.apply(psi)) + p.delta ** 2 * p.M ** 2 * grid.norm2(H.apply(psi))
    return lhs, rhs


# --------------------------------------------------------------------------
# dominant sites
# --------------------------------------------------------------------------

@dataclass
class DominantCensus:
    T: float
    variant: str
    sites: np.ndarray = field(repr=False)       # (count, d)
    dominant: np.ndarray = field(repr=False)    # bool per site
    cell_mass: np.ndarray = field(repr=False)
    box_mass: np.ndarray = field(repr=False)
    clipped: np.ndarray = field(repr=False)     # bool per site
    mass_total: float = 0.0

    @property
    def mass_dominant(self) -> float:
        return float(self.cell_mass[self.dominant].sum())

    @property
    def mass_weak(self) -> float:
        return float(self.cell_mass[~self.dominant].sum())

    def summary(self) -> dict:
        return {"T": self.T, "variant": self.variant,
                "n_sites": int(len(self.sites)), "n_dominant": int(self.dominant.sum()),
                "n_clipped": int(self.clipped.sum()),
                "mass_dominant": self.mass_dominant, "mass_total": self.mass_total}

    def to_json(self) -> str:
        return json.dumps({
            "T": self.T, "variant": self.variant,
            "dominant": self.sites[self.dominant].tolist(),
            "mass_dominant": self.mass_dominant, "mass_total": self.mass_total,
            "clipped": self.sites[self.clipped].tolist(),
        }, indent=2)


def _ranges(x, k, half):
    # indices [lo, hi) of sorted coordinates x in [k - half, k + half)
    return np.searchsorted(x, k - half, "left"), np.searchsorted(x, k + half, "left")


def _box_sums(prefix, lohi):
    d = len(lohi)
    total = 0.0
    for bits in range(2 ** d):
        sign = 1
        idx = []
        for ax in range(d):
            lo, hi = lohi[ax]
            if bits >> ax & 1:
                idx.append(lo)
                sign = -sign
            else:
                idx.append(hi)
        total = total + sign * prefix[np.ix_(*idx)]
    return total


def classify_dominant(phi, grid: Grid, T: float | str, window: Window | None = None) -> DominantCensus:
    """Split lattice sites into dominant and weak at unit cell scale.

    A site k is dominant when the mass of its unit cell is at least
    1/(2 T^d) of the mass of the box of side T around k (ties count as
    dominant).  Cells and boxes are taken half-open, [k - s/2, k + s/2)^d,
    so unit cells partition the grid points.  ``T`` may be a number or one
    of the variant names ``thm1`` / ``thm3``.  Grid lengths must already be
    expressed in units of M.
    """
    variant = "custom"
    if isinstance(T, str):
        variant, T = T, observation_side(grid.d, T)
    phi = grid.check(phi)
    if window is None:
        window = window_for_grid(grid, 1.0)
    d = grid.d
    mass = grid.cell_volume * np.abs(phi) ** 2
    prefix = np.zeros((grid.n + 1,) * d)
    prefix[(slice(1, None),) * d] = mass
    for ax in range(d):
        np.cumsum(prefix, axis=ax, out=prefix)
    x = grid.axis
    axes = [np.arange(a, b + 1, dtype=float) for a, b in zip(window.lo, window.hi)]
    cell = _box_sums(prefix, [_ranges(x, k, 0.5) for k in axes]).ravel()
    box = _box_sums(prefix, [_ranges(x, k, T / 2) for k in axes]).ravel()
    sites = window.indices()
    edge_lo, edge_hi = -grid.L / 2, grid.L / 2
    clipped = np.any((sites - T / 2 < edge_lo) | (sites + T / 2 > edge_hi), axis=1)
    dominant = cell >= box / (2 * T ** d)
    return DominantCensus(float(T), variant, sites, dominant, cell, box, clipped, float(mass.sum()))


def dominant_mass_bound(census: DominantCensus, tol: float = 1e-12) -> bool:
    """||phi||^2 <= 2 ||chi_D phi||^2 (up to ``tol`` relative)."""
    return census.mass_total <= 2 * census.mass_dominant + tol * census.mass_total


def covering_count(points, T: float) -> np.ndarray:
    """Number of lattice boxes [k - T/2, k + T/2)^d containing each point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    # k ranges over integers in (x - T/2, x + T/2]
    per_axis = np.floor(points + T / 2) - np.floor(points - T / 2)
    return np.prod(per_axis, axis=1).astype(np.int64)


def projector_chain(psi, mask: Mask, H: HamiltonianOperator, E: float, gamma: float,
                   p: BoundParams, tol: float = 1e-8) -> dict:
    """Evaluate each link of the projector lower-bound argument for one psi in Ran chi_I(H).

    Links (all squared norms, relative tolerance ``tol``):

    * residual:    ||(H - E) psi|| <= gamma ||psi||
    * norm_shift:  ||V - E||_inf <= 2 ||V||_inf + E0, hence
      2 M^4 gamma^2 <= (delta/M)^(K (1 + M^(4/3) ||V - E||^(2/3)))
    * thm3:        factor ||psi||^2 <= ||W psi||^2 + delta^2 M^2 ||(H - E) psi||^2
    * substitute:  ... <= ||W psi||^2 + delta^2 M^2 gamma^2 ||psi||^2
    * algebra:     2 M^4 gamma^2 - delta^2 M^2 gamma^2 >= M^4 gamma^2
    * conclusion:  ||W psi||^2 >= M^4 gamma^2 ||psi||^2
    """
    grid = H.grid
    M, delta = p.M, p.delta
    n2 = grid.norm2(psi)
    res = grid.norm(H.apply(psi) - E * psi)
    w2 = grid.norm2(mask.apply(psi))
    v_shift = H.potential.deviation(E)
    factor = thm3_factor(BoundParams(delta, M, v_shift, p.K))
    g2 = gamma ** 2
    terms = {
        "norm2": n2, "residual": res, "masked2": w2, "v_minus_E": v_shift, "factor": factor,
        "floor2": M ** 4 * g2 * n2,
        "rhs_thm3": w2 + delta ** 2 * M ** 2 * res ** 2,
        "rhs_gamma": w2 + delta ** 2 * M ** 2 * g2 * n2,
    }
    scale = max(n2, 1e-300)
    checks = {
        "residual": res <= gamma * math.sqrt(n2) * (1 + tol) + tol * math.sqrt(scale),
        "norm_shift": v_shift <= 2 * H.potential.sup_norm + p.E0 + tol
                      and 2 * M ** 4 * g2 <= factor * (1 + tol),
        "thm3": factor * n2 <= terms["rhs_thm3"] + tol * scale,
        "substitute": terms["rhs_thm3"] <= terms["rhs_gamma"] + tol * scale,
        "algebra": 2 * M ** 4 * g2 - delta ** 2 * M ** 2 * g2 >= M ** 4 * g2 * (1 - tol),
        "conclusion": w2 >= terms["floor2"] - tol * scale,
    }
    return {"terms": terms, "checks": checks, "ok": all(checks.values())}
