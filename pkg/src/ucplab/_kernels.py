"""Hot inner loops: the finite-difference Hamiltonian and mask rasterization.

Each kernel exists twice, a numba ``@njit`` loop and a vectorised numpy
version.  The public names dispatch to numba unless the environment variable
``UCPLAB_DISABLE_NUMBA`` is set to a truthy value (or numba is missing).
Both implementations are always importable so tests can compare them.
"""
import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_flag = os.environ.get("UCPLAB_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("1", "true", "yes", "on")
BACKEND = "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# (-Delta_h + V) u with homogeneous Dirichlet data, arbitrary dimension
# --------------------------------------------------------------------------

def hamiltonian_apply_numpy(u, v, inv_h2):
    """Apply the (2d+1)-point stencil to ``u`` (shape ``(n,)*d``)."""
    d = u.ndim
    out = (2.0 * d) * u
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        out[lo] -= u[hi]
        out[hi] -= u[lo]
    out *= inv_h2
    out += v * u
    return out


if HAVE_NUMBA:
    @njit(cache=True, nogil=True)
    def _stencil_flat(u, v, shape, inv_h2, out):
        N = u.size
        d = shape.size
        for idx in range(N):
            acc = 2.0 * d * u[idx]
            stride = 1
            for ax in range(d - 1, -1, -1):
                n = shape[ax]
                c = (idx // stride) % n
                if c > 0:
                    acc -= u[idx - stride]
                if c < n - 1:
                    acc -= u[idx + stride]
                stride *= n
            out[idx] = acc * inv_h2 + v[idx] * u[idx]

    # explicit loops for the common dimensions; the flat kernel covers the rest
    @njit(cache=True, nogil=True)
    def _stencil1(u, v, inv_h2, out):
        n = u.shape[0]
        for i in range(n):
            acc = 2.0 * u[i]
            if i > 0:
                acc -= u[i - 1]
            if i < n - 1:
                acc -= u[i + 1]
            out[i] = acc * inv_h2 + v[i] * u[i]

    @njit(cache=True, nogil=True)
    def _stencil2(u, v, inv_h2, out):
        n0, n1 = u.shape
        for i in range(n0):
            for j in range(n1):
                acc = 4.0 * u[i, j]
                if i > 0:
                    acc -= u[i - 1, j]
                if i < n0 - 1:
                    acc -= u[i + 1, j]
                if j > 0:
                    acc -= u[i, j - 1]
                if j < n1 - 1:
                    acc -= u[i, j + 1]
                out[i, j] = acc * inv_h2 + v[i, j] * u[i, j]

    @njit(cache=True, nogil=True)
    def _stencil3(u, v, inv_h2, out):
        n0, n1, n2 = u.shape
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    acc = 6.0 * u[i, j, k]
                    if i > 0:
                        acc -= u[i - 1, j, k]
                    if i < n0 - 1:
                        acc -= u[i + 1, j, k]
                    if j > 0:
                        acc -= u[i, j - 1, k]
                    if j < n1 - 1:
                        acc -= u[i, j + 1, k]
                    if k > 0:
                        acc -= u[i, j, k - 1]
                    if k < n2 - 1:
                        acc -= u[i, j, k + 1]
                    out[i, j, k] = acc * inv_h2 + v[i, j, k] * u[i, j, k]

    _STENCILS = {1: _stencil1, 2: _stencil2, 3: _stencil3}

    @njit(cache=True, nogil=True)
    def _rasterize_flat(coords, n, lo, wshape, centers, M, delta, out):
        # coords: (d, n) axis coordinates; centers: (ncell, d) row-major window
        d = coords.shape[0]
        N = out.size
        d2 = delta * delta
        kidx = np.empty(d, dtype=np.int64)
        for idx in range(N):
            rem = idx
            for ax in range(d - 1, -1, -1):
                kidx[ax] = rem % n
                rem //= n
            cell = 0
            for ax in range(d):
                x = coords[ax, kidx[ax]]
                k = np.int64(np.floor(x / M + 0.5)) - lo[ax]
                if k < 0 or k >= wshape[ax]:
                    return idx
                cell = cell * wshape[ax] + k
            r2 = 0.0
            for ax in range(d):
                dx = coords[ax, kidx[ax]] - centers[cell, ax]
                r2 += dx * dx
            out[idx] = 1 if r2 < d2 else 0
        return -1


def hamiltonian_apply_numba(u, v, inv_h2):
    kernel = _STENCILS.get(u.ndim)
    if kernel is not None:
        uc = np.ascontiguousarray(u)
        out = np.empty_like(uc)
        kernel(uc, np.ascontiguousarray(v, dtype=np.float64), float(inv_h2), out)
        return out
    shape = np.asarray(u.shape, dtype=np.int64)
    uf = np.ascontiguousarray(u).ravel()
    vf = np.ascontiguousarray(v, dtype=np.float64).ravel()
    out = np.empty_like(uf)
    _stencil_flat(uf, vf, shape, float(inv_h2), out)
    return out.reshape(u.shape)


# --------------------------------------------------------------------------
# cell-centre membership in the union of balls
# --------------------------------------------------------------------------

def rasterize_numpy(coords, lo, wshape, centers, M, delta):
    """Return (indicator uint8 array, first bad flat index or -1)."""
    d, n = coords.shape
    ks = [np.floor(coords[ax] / M + 0.5).astype(np.int64) - lo[ax] for ax in range(d)]
    for ax in range(d):
        bad = np.nonzero((ks[ax] < 0) | (ks[ax] >= wshape[ax]))[0]
        if bad.size:
            j = [0] * d
            j[ax] = int(bad[0])
            return None, int(np.ravel_multi_index(j, (n,) * d))
    grids = np.meshgrid(*ks, indexing="ij")
    cell = np.ravel_multi_index(tuple(grids), tuple(wshape))
    r2 = np.zeros((n,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = n
        x = coords[ax].reshape(shape)
        r2 += (x - centers[cell, ax]) ** 2
    return (r2 < delta * delta).astype(np.uint8), -1


def rasterize_numba(coords, lo, wshape, centers, M, delta):
    d, n = coords.shape
    out = np.zeros(n ** d, dtype=np.uint8)
    bad = _rasterize_flat(np.ascontiguousarray(coords, dtype=np.float64), n,
                          np.asarray(lo, dtype=np.int64),
                          np.asarray(wshape, dtype=np.int64),
                          np.ascontiguousarray(centers, dtype=np.float64),
                          float(M), float(delta), out)
    if bad >= 0:
        return None, int(bad)
    return out.reshape((n,) * d), -1


if USE_NUMBA:
    hamiltonian_apply = hamiltonian_apply_numba
    rasterize = rasterize_numba
else:
    hamiltonian_apply = hamiltonian_apply_numpy
    rasterize = rasterize_numpy
