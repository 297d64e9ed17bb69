"""Eigenpairs, spectral-projector bases and Weyl iterates of the discrete H."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InvalidParameter, NoConvergence, UnreachableResidual
from .hamiltonian import HamiltonianOperator, residual_norm

DENSE_MAX_N = 4096


@dataclass(frozen=True)
class EigenSolution:
    energies: np.ndarray
    modes: np.ndarray = field(repr=False)  # (count, *grid.shape), unit discrete L2 norm
    residuals: np.ndarray
    tol: float
    method: str

    def __len__(self):
        return len(self.energies)

    def manifest(self) -> dict:
        return {"energies": [float(e) for e in self.energies],
                "residuals": [float(r) for r in self.residuals],
                "tol": self.tol, "method": self.method}


@dataclass(frozen=True)
class ProjectorBasis:
    interval: tuple
    columns: np.ndarray = field(repr=False)  # (rank, *grid.shape), orthonormal
    energies: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.columns)


def _fix_signs(X):
    # deterministic sign: the first entry of each column that is not negligible is positive.
    # (the largest entry is ambiguous for modes that are odd under a reflection)
    A = np.abs(X)
    idx = np.argmax(A > 1e-3 * A.max(axis=0, initial=0.0), axis=0)
    s = np.sign(X[idx, np.arange(X.shape[1])])
    s[s == 0] = 1
    return X * s


def _finish(H, vals, X, tol, method, check=True):
    grid = H.grid
    X = _fix_signs(X) / math.sqrt(grid.cell_volume)
    modes = X.T.reshape((len(vals),) + grid.shape)
    res = np.array([residual_norm(H, m, e) for m, e in zip(modes, vals)]) if len(vals) else np.zeros(0)
    if check:
        limit = tol * np.maximum(1.0, np.abs(vals))
        bad = np.nonzero(res > limit)[0]
        if bad.size:
            i = int(bad[0])
            raise NoConvergence(f"pair {i} (E={vals[i]:.6g}) residual {res[i]:.3e} exceeds {limit[i]:.3e}",
                                residual=float(res[i]))
    return EigenSolution(np.asarray(vals, dtype=float), modes, res, tol, method)


def _dense_by_index(H, k):
    if H.grid.d == 1:
        diag, off = H.tridiagonal()
        return sla.eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1))
    return sla.eigh(H.dense_matrix(), subset_by_index=[0, k - 1])


def _dense_by_value(H, a, b):
    if H.grid.d == 1:
        diag, off = H.tridiagonal()
        return sla.eigh_tridiagonal(diag, off, select="v", select_range=(a, b))
    return sla.eigh(H.dense_matrix(), subset_by_value=(a, b))


def lanczos(matvec, N, k, tol=1e-10, max_iter=None, seed=0, deflate=None, check_every=10):
    """Lowest ``k`` eigenpairs by Lanczos with full reorthogonalisation.

    ``deflate`` (rows orthonormal, shape (m, N)) restricts the iteration to
    their orthogonal complement.  Returns (values, vectors as columns).
    """
    if max_iter is None:
        max_iter = min(N, max(800, 40 * k))
    max_iter = min(max_iter, N - (0 if deflate is None else len(deflate)))
    if k > max_iter:
        raise InvalidParameter(f"cannot extract {k} pairs from a {max_iter}-dimensional Krylov space")
    rng = np.random.default_rng(seed)
    P = np.zeros((0, N)) if deflate is None else np.asarray(deflate)

    def project(w, Vj):
        for _ in range(2):
            if len(P):
                w = w - P.T @ (P @ w)
            w = w - Vj.T @ (Vj @ w)
        return w

    V = np.zeros((max_iter + 1, N))
    alpha, beta = [], []
    v = project(rng.standard_normal(N), V[:0])
    V[0] = v / np.linalg.norm(v)
    scale = 1.0
    for j in range(max_iter):
        w = matvec(V[j])
        a = float(V[j] @ w)
        alpha.append(a)
        w = w - a * V[j] - (beta[-1] * V[j - 1] if j > 0 else 0.0)
        w = project(w, V[: j + 1])
        b = float(np.linalg.norm(w))
        scale = max(scale, abs(a), b)
        m = j + 1
        done = m == max_iter or b <= 1e-13 * scale
        if m >= k and (done or m % check_every == 0):
            theta, S = sla.eigh_tridiagonal(np.array(alpha), np.array(beta)) if m > 1 else \
                (np.array(alpha), np.ones((1, 1)))
            est = b * np.abs(S[-1, :k])
            if done or np.all(est <= 0.1 * tol * np.maximum(1.0, np.abs(theta[:k]))):
                X = V[:m].T @ S[:, :k]
                if not np.all(est <= tol * np.maximum(1.0, np.abs(theta[:k]))):
                    raise NoConvergence(f"Lanczos stalled after {m} steps", residual=float(est.max()))
                return theta[:k], X
        if b <= 1e-13 * scale:
            # invariant subspace too small: continue with a fresh direction
            w = project(rng.standard_normal(N), V[: j + 1])
            b = 0.0
            V[j + 1] = w / np.linalg.norm(w)
        else:
            V[j + 1] = w / b
        beta.append(b)
    raise NoConvergence("Lanczos exhausted its iteration budget")  # pragma: no cover


def _lanczos_locked(H, k, tol, max_iter, seed):
    """Lanczos followed by deflated passes that catch missed degenerate copies."""
    N = H.grid.N
    vals, X = lanczos(H.matvec, N, k, tol, max_iter, seed)
    for attempt in range(k):
        if len(vals) >= N:
            break
        extra, Y = lanczos(H.matvec, N, 1, tol, max_iter, seed + 1 + attempt, deflate=X.T)
        if extra[0] >= vals[-1] - tol * max(1.0, abs(vals[-1])):
            break
        vals = np.concatenate([vals[:-1], extra])
        X = np.concatenate([X[:, :-1], Y], axis=1)
        order = np.argsort(vals, kind="stable")
        vals, X = vals[order], X[:, order]
    # Rayleigh-Ritz on the collected space sharpens nearly degenerate pairs
    Qb, _ = np.linalg.qr(X)
    HQ = np.column_stack([H.matvec(q) for q in Qb.T])
    theta, S = np.linalg.eigh(Qb.T @ HQ)
    return theta, Qb @ S


def eigenpairs(H: HamiltonianOperator, how_many: int, tol: float = 1e-9, method: str = "auto",
               max_iter: int | None = None, seed: int = 0) -> EigenSolution:
    """Lowest ``how_many`` eigenpairs with residual <= tol * max(1, |E|).

    ``method`` is ``dense`` (LAPACK, tridiagonal in 1-D), ``lanczos`` or
    ``auto`` (dense when N <= DENSE_MAX_N).
    """
    N = H.grid.N
    if not 1 <= how_many <= N:
        raise InvalidParameter(f"how_many must be in [1, {N}], got {how_many}")
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    if method == "auto":
        method = "dense" if N <= DENSE_MAX_N else "lanczos"
    if method == "dense":
        vals, X = _dense_by_index(H, how_many)
    elif method == "lanczos":
        vals, X = _lanczos_locked(H, how_many, tol, max_iter, seed)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return _finish(H, vals, X, tol, method)


def projector_basis(H: HamiltonianOperator, interval, tol: float = 1e-9, method: str = "auto",
                    max_iter: int | None = None) -> ProjectorBasis:
    """Orthonormal basis of the span of eigenvectors with energy in the closed interval."""
    a, b = (float(v) for v in interval)
    if not (math.isfinite(a) and math.isfinite(b) and a <= b):
        raise InvalidParameter(f"interval must be bounded and ordered, got {interval}")
    N = H.grid.N
    slack = tol * max(1.0, abs(a), abs(b))
    if method == "auto":
        method = "dense" if N <= DENSE_MAX_N else "lanczos"
    if method == "dense":
        vals, X = _dense_by_value(H, a - slack - 1e-300, b + slack)
    elif method == "lanczos":
        k = min(8, N)
        while True:
            vals, X = _lanczos_locked(H, k, tol, max_iter, 0)
            if vals[-1] > b + slack or k == N:
                break
            k = min(2 * k, N)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    keep = (vals >= a - slack) & (vals <= b + slack)
    sol = _finish(H, vals[keep], X[:, keep], tol, method)
    return ProjectorBasis((a, b), sol.modes, sol.energies)


# --------------------------------------------------------------------------
# Weyl iterates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylIterate:
    n: int
    psi: np.ndarray = field(repr=False)
    E: float
    residual: float
    params: dict
    trace: list = field(default_factory=list)  # (sigma, residual) search history


def packet(grid, xi, sigma, x0=None):
    """cos(xi (x_1 - x0_1)) exp(-|x - x0|^2 / (4 sigma^2)), unnormalised."""
    X = grid.mesh()
    x0 = np.zeros(grid.d) if x0 is None else np.asarray(x0, dtype=float)
    r2 = sum((Xa - ca) ** 2 for Xa, ca in zip(X, x0))
    return np.cos(xi * (X[0] - x0[0])) * np.exp(-r2 / (4 * sigma ** 2))


def discrete_wavenumber(E_kin: float, h: float) -> float:
    """xi with (2/h^2)(1 - cos(xi h)) = E_kin, the 3-point dispersion relation."""
    if not 0 <= E_kin <= 4 / h ** 2:
        raise UnreachableResidual(f"kinetic energy {E_kin} exceeds the grid band 4/h^2 = {4 / h ** 2:.4g}",
                                  best_residual=None)
    # 2 asin(h sqrt(E)/2) is acos(1 - E h^2/2) without the cancellation near E = 0
    return 2 * math.asin(min(1.0, h * math.sqrt(E_kin) / 2)) / h


def weyl_sequence(H: HamiltonianOperator, E: float, n: int, strategy: str = "gaussian-packet", *,
                  center=None, sigma0: float = 0.5, growth: float = 1.25, sigma_max: float | None = None,
                  defect: float = 0.0, solution: EigenSolution | None = None) -> WeylIterate:
    """Normalised psi_n with ||(H - E) psi_n|| < 1/n.

    ``gaussian-packet`` widens a plane-wave packet until the residual
    contract holds; ``eigen-defect`` mixes the eigenfunction nearest ``E``
    with a neighbouring mode so that the residual equals ``defect / n``.
    """
    if n < 1:
        raise InvalidParameter("iterate index must be >= 1")
    grid = H.grid
    target = 1.0 / n
    if strategy == "gaussian-packet":
        x0 = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
        if sigma_max is None:
            sigma_max = (grid.L / 2 - float(np.max(np.abs(x0)))) / 7
        V = H.potential.values
        xi = None
        sigma, trace, best = sigma0, [], math.inf
        while sigma <= sigma_max * (1 + 1e-12):
            env = packet(grid, 0.0, sigma, x0)
            support = env > 1e-12
            c = float(V[support].mean())
            if np.ptp(V[support]) > 1e-12 * max(1.0, abs(c)):
                raise InvalidParameter("gaussian-packet needs a constant potential on the packet support")
            if xi is None:
                if E < c:
                    raise InvalidParameter(f"energy {E} lies below the constant potential {c}")
                xi = discrete_wavenumber(E - c, grid.h)
            psi = packet(grid, xi, sigma, x0)
            psi /= grid.norm(psi)
            r = residual_norm(H, psi, E)
            trace.append((sigma, r))
            best = min(best, r)
            if r < target:
                return WeylIterate(n, psi, float(E), r,
                                   {"strategy": strategy, "center": x0.tolist(), "sigma": sigma, "xi": xi},
                                   trace)
            sigma *= growth
        raise UnreachableResidual(f"best residual {best:.4g} does not reach 1/n = {target:.4g} "
                                  f"with sigma <= {sigma_max:.4g}", best_residual=best)
    if strategy == "eigen-defect":
        if not 0 <= defect < 1:
            raise InvalidParameter("defect must lie in [0, 1)")
        if solution is None or len(solution) < 2:
            solution = eigenpairs(H, min(grid.N, 8))
        j = int(np.argmin(np.abs(solution.energies - E)))
        Ej = float(solution.energies[j])
        psi = solution.modes[j].copy()
        partner = j + 1 if j + 1 < len(solution) else j - 1
        gap = abs(float(solution.energies[partner]) - Ej)
        r_goal = defect * target
        if r_goal > 0:
            if gap <= r_goal:
                raise UnreachableResidual("neighbouring eigenvalue too close to realise the defect",
                                          best_residual=None)
            t = r_goal / math.sqrt(gap ** 2 - r_goal ** 2)
            psi = psi + t * solution.modes[partner]
        psi /= grid.norm(psi)
        r = residual_norm(H, psi, Ej)
        if not r < target:
            raise UnreachableResidual(f"eigen-defect residual {r:.3e} not below {target:.3e}", best_residual=r)
        return WeylIterate(n, psi, Ej, r, {"strategy": strategy, "index": j, "requested_E": float(E),
                                           "defect": defect})
    raise InvalidParameter(f"unknown strategy {strategy!r}")
