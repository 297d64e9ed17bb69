"""Equidistributed ball families, their masks, and the lattice constructions behind the sampling bounds.

A sequence Z places one centre z_k in each cube cell Mk + (-M/2, M/2)^d such
that the ball B(z_k, delta) stays inside the cell.  The mask W is the
indicator of the union of those balls.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import InvalidParameter, ScaleNotNormalized, WindowTooSmall
from .hamiltonian import Grid

# containment slack, in units of M
CONTAIN_TOL = 1e-12
# safety margin for random centres, in units of M
SAFETY = 1e-9


def ceil_sqrt(d: int) -> int:
    return math.isqrt(d - 1) + 1


def observation_side(d: int, variant: str) -> float:
    """Side T of the observation box Lambda_T(k) for the two constructions."""
    if variant == "thm1":
        return float(62 * ceil_sqrt(d))
    if variant == "thm3":
        return 46 * math.sqrt(d)
    raise InvalidParameter(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class Window:
    """Axis-aligned index box lo[i] <= k_i <= hi[i]."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not self.lo:
            raise InvalidParameter("window bounds must have equal, nonzero length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise InvalidParameter(f"empty window {self.lo}..{self.hi}")

    @classmethod
    def cube(cls, lo: int, hi: int, d: int) -> "Window":
        return cls((int(lo),) * d, (int(hi),) * d)

    @property
    def shape(self) -> tuple:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    def indices(self) -> np.ndarray:
        """All lattice indices, row-major, shape (count, d)."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))

    def contains(self, k) -> bool:
        return all(a <= int(ki) <= b for ki, a, b in zip(k, self.lo, self.hi))

    def flat(self, k) -> int:
        return int(np.ravel_multi_index(tuple(int(ki) - a for ki, a in zip(k, self.lo)), self.shape))


@dataclass(frozen=True)
class EquidistributedSequence:
    d: int
    M: float
    delta: float
    window: Window
    centers: np.ndarray = field(repr=False)  # (count, d), row-major over window

    def center(self, k) -> np.ndarray:
        if not self.window.contains(k):
            raise WindowTooSmall(f"site {tuple(k)} is not materialised")
        return self.centers[self.window.flat(k)]

    def offsets(self) -> np.ndarray:
        """z_k - Mk for every materialised k."""
        return self.centers - self.M * self.window.indices()

    def with_delta(self, delta: float) -> "EquidistributedSequence":
        """Same centres, new radius (used for monotonicity checks)."""
        _check_params(self.M, delta)
        return EquidistributedSequence(self.d, self.M, delta, self.window, self.centers)

    def scaled(self, s: float) -> "EquidistributedSequence":
        return EquidistributedSequence(self.d, self.M * s, self.delta * s, self.window, self.centers * s)

    def to_json(self) -> str:
        doc = {
            "d": self.d,
            "M": self.M,
            "delta": self.delta,
            "window": {"lo": list(self.window.lo), "hi": list(self.window.hi)},
            "centers": [[k.tolist(), z.tolist()] for k, z in zip(self.window.indices(), self.centers)],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EquidistributedSequence":
        doc = json.loads(text)
        window = Window(tuple(doc["window"]["lo"]), tuple(doc["window"]["hi"]))
        centers = np.zeros((int(np.prod(window.shape)), doc["d"]))
        for k, z in doc["centers"]:
            centers[window.flat(k)] = z
        return cls(doc["d"], doc["M"], doc["delta"], window, centers)


def _check_params(M, delta):
    if not (M > 0 and math.isfinite(M)):
        raise InvalidParameter(f"cell scale M must be positive, got {M}")
    if not (0 < delta <= M / 2):
        raise InvalidParameter(f"radius must satisfy 0 < delta <= M/2, got delta={delta}, M={M}")


def make_periodic_sequence(d: int, M: float, delta: float, window: Window) -> EquidistributedSequence:
    _check_params(M, delta)
    if len(window.lo) != d:
        raise InvalidParameter("window dimension does not match d")
    centers = M * window.indices().astype(np.float64)
    return EquidistributedSequence(d, float(M), float(delta), window, centers)


def make_perturbed_sequence(d: int, M: float, delta: float, window: Window, seed: int) -> EquidistributedSequence:
    _check_params(M, delta)
    if len(window.lo) != d:
        raise InvalidParameter("window dimension does not match d")
    k = window.indices()
    slack = M / 2 - delta - SAFETY * M
    rng = np.random.default_rng(seed)
    if slack <= 0:
        offsets = np.zeros(k.shape)
    else:
        offsets = rng.uniform(-slack, slack, size=k.shape)
    return EquidistributedSequence(d, float(M), float(delta), window, M * k + offsets)


@dataclass(frozen=True)
class Validation:
    ok: bool
    k: tuple | None = None
    margin: float | None = None

    def __bool__(self):
        return self.ok


def validate_sequence(Z: EquidistributedSequence) -> Validation:
    """Check that every ball B(z_k, delta) sits inside its open cell.

    The open ball lies in the open cube iff |z_k - Mk|_i + delta <= M/2 for
    every coordinate; the slack CONTAIN_TOL*M absorbs rounding.
    """
    if not (Z.M > 0 and 0 < Z.delta <= Z.M / 2):
        return Validation(False, None, Z.M / 2 - Z.delta)
    margins = Z.M / 2 - Z.delta - np.abs(Z.offsets())
    worst = margins.min(axis=1)
    bad = np.nonzero(worst < -CONTAIN_TOL * Z.M)[0]
    if bad.size:
        i = int(bad[0])
        return Validation(False, tuple(int(v) for v in Z.window.indices()[i]), float(worst[i]))
    return Validation(True, None, float(worst.min()))


def window_for_grid(grid: Grid, M: float) -> Window:
    """Smallest index window whose cells cover every grid point."""
    x = grid.axis
    ks = np.floor(x / M + 0.5).astype(np.int64)
    return Window.cube(int(ks.min()), int(ks.max()), grid.d)


@dataclass(frozen=True)
class Mask:
    grid: Grid
    indicator: np.ndarray = field(repr=False)
    delta: float = 0.0

    @property
    def covered_fraction(self) -> float:
        return float(np.count_nonzero(self.indicator)) / self.indicator.size

    def apply(self, u):
        return self.grid.check(u) * self.indicator

    def to_pgm(self) -> bytes:
        """Binary PGM (P5), 0/255, first axis as rows; 1-D masks become one row."""
        img = self.indicator.astype(np.uint8) * 255
        if img.ndim == 1:
            img = img[None, :]
        elif img.ndim > 2:
            mid = tuple(s // 2 for s in img.shape[2:])
            img = img[(slice(None), slice(None)) + mid]
        rows, cols = img.shape
        return b"P5\n%d %d\n255\n" % (cols, rows) + img.tobytes()

    def sidecar(self) -> dict:
        return {"d": self.grid.d, "L": self.grid.L, "n": self.grid.n,
                "delta": self.delta, "covered_fraction": self.covered_fraction}


def rasterize_mask(Z: EquidistributedSequence, grid: Grid) -> Mask:
    """Indicator of the union of balls sampled at grid points (cell centres)."""
    if grid.d != Z.d:
        raise InvalidParameter("grid and sequence dimensions differ")
    coords = np.tile(grid.axis, (grid.d, 1))
    ind, bad = _kernels.rasterize(coords, np.asarray(Z.window.lo), np.asarray(Z.window.shape),
                                  Z.centers, Z.M, Z.delta)
    if bad >= 0:
        j = np.unravel_index(bad, grid.shape)
        raise WindowTooSmall(f"grid point {tuple(int(v) for v in j)} lies outside the materialised cells "
                             f"{Z.window.lo}..{Z.window.hi}")
    return Mask(grid, ind, Z.delta)


# --------------------------------------------------------------------------
# proof constructions (all at M = 1)
# --------------------------------------------------------------------------

def near_neighbor(k, d: int, variant: str) -> tuple:
    k = tuple(int(v) for v in k)
    if len(k) != d:
        raise InvalidParameter("index dimension does not match d")
    step = ceil_sqrt(d) + 1 if variant == "thm1" else 2 if variant == "thm3" else None
    if step is None:
        raise InvalidParameter(f"unknown variant {variant!r}")
    return (k[0] + step,) + k[1:]


def _require_unit(Z):
    if Z.M != 1.0:
        raise ScaleNotNormalized(f"construction requires M = 1, got M = {Z.M}; rescale first")


def annulus_radius(k, Z: EquidistributedSequence) -> float:
    """R_k = ceil(sqrt d) + y_k with y_k = <e1, z_{k+}> - <e1, k+> + 1/2."""
    _require_unit(Z)
    kp = near_neighbor(k, Z.d, "thm1")
    y = float(Z.center(kp)[0]) - kp[0] + 0.5
    if not (-CONTAIN_TOL <= y <= 1 + CONTAIN_TOL):
        raise InvalidParameter(f"y_k = {y} outside [0, 1]; sequence is not equidistributed")
    return ceil_sqrt(Z.d) + y


@dataclass(frozen=True)
class ProofGeometry:
    k: tuple
    k_plus: tuple
    x0: np.ndarray
    theta_lo: np.ndarray
    theta_hi: np.ndarray
    T: float
    variant: str
    R: Fraction | float | None = None  # exact for constructed geometries

    @property
    def Q(self) -> float:
        return geometric_Q(self.x0, (self.theta_lo, self.theta_hi))


def proof_geometry(Z: EquidistributedSequence, k, variant: str) -> ProofGeometry:
    _require_unit(Z)
    k = tuple(int(v) for v in k)
    kp = near_neighbor(k, Z.d, variant)
    x0 = np.array(Z.center(kp), dtype=float)
    kk = np.asarray(k, dtype=float)
    R = None
    if variant == "thm1":
        annulus_radius(k, Z)  # range check on y_k
        R = ceil_sqrt(Z.d) + Fraction(float(x0[0])) - kp[0] + Fraction(1, 2)
    return ProofGeometry(k, kp, x0, kk - 0.5, kk + 0.5, observation_side(Z.d, variant), variant, R)


def _corners(lo, hi):
    return itertools.product(*zip(lo, hi))


def annulus_certificate(geom: ProofGeometry) -> tuple[Fraction, Fraction, Fraction]:
    """Exact (min distance^2, max distance^2, R^2) between x0 and closed Theta.

    The minimum is attained at the clamp of x0 onto the box; the maximum at a
    corner.  All floats are converted exactly to rationals.
    """
    x0 = [Fraction(float(v)) for v in geom.x0]
    lo = [Fraction(float(v)) for v in geom.theta_lo]
    hi = [Fraction(float(v)) for v in geom.theta_hi]
    nearest = [min(max(x, a), b) for x, a, b in zip(x0, lo, hi)]
    dmin2 = sum((x - p) ** 2 for x, p in zip(x0, nearest))
    dmax2 = max(sum((x - c) ** 2 for x, c in zip(x0, corner)) for corner in _corners(lo, hi))
    if geom.R is None:
        raise InvalidParameter("annulus check needs the thm1 radius R")
    R = Fraction(geom.R)
    return dmin2, dmax2, R * R


def check_annulus_containment(geom: ProofGeometry) -> bool:
    """True iff Theta is inside the closed ball B(x0, 2R) and misses the open ball B(x0, R)."""
    dmin2, dmax2, R2 = annulus_certificate(geom)
    return dmin2 >= R2 and dmax2 <= 4 * R2


def geometric_Q_squared(x0, theta) -> Fraction:
    lo, hi = theta
    x = [Fraction(float(v)) for v in np.atleast_1d(x0)]
    corners = _corners([Fraction(float(v)) for v in np.atleast_1d(lo)],
                       [Fraction(float(v)) for v in np.atleast_1d(hi)])
    return max(sum((a - c) ** 2 for a, c in zip(x, corner)) for corner in corners)


def geometric_Q(x0, theta) -> float:
    """sup over the box Theta = (lo, hi) of |y - x0|_2, attained at a corner."""
    return math.sqrt(geometric_Q_squared(x0, theta))


def check_Q_bounds(geom: ProofGeometry) -> bool:
    """Exact check of 1 <= Q <= 3 sqrt(d)."""
    q2 = geometric_Q_squared(geom.x0, (geom.theta_lo, geom.theta_hi))
    return 1 <= q2 <= 9 * len(geom.k)


def check_observation_box(geom: ProofGeometry) -> bool:
    """|k - z_{k+}| + 6Q + 2 <= T/2, the triangle-inequality chain."""
    dist = float(np.linalg.norm(np.asarray(geom.k, dtype=float) - geom.x0))
    return dist + 6 * geom.Q + 2 <= geom.T / 2 + 1e-12
