import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucplab import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 3), n=st.integers(1, 12), seed=st.integers(0, 10 ** 6), cplx=st.booleans())
def test_stencil_backends_agree(d, n, seed, cplx):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n,) * d)
    if cplx:
        u = u + 1j * rng.standard_normal((n,) * d)
    v = rng.standard_normal((n,) * d)
    a = _kernels.hamiltonian_apply_numpy(u.copy(), v, 37.0)
    b = _kernels.hamiltonian_apply_numba(u.copy(), v, 37.0)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-12)


def test_stencil_1d_by_hand():
    u = np.array([1.0, 2.0, 4.0])
    out = _kernels.hamiltonian_apply(u, np.array([1.0, 0.0, -1.0]), 1.0)
    # [2-2, -1+4-4, -2+8] plus V u
    assert out.tolist() == [1.0, -1.0, 2.0]


def test_backend_report():
    assert _kernels.BACKEND in ("numba", "numpy")
    assert _kernels.BACKEND == ("numba" if _kernels.USE_NUMBA else "numpy")


def test_env_flag_selects_numpy():
    env = dict(os.environ, UCPLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from ucplab import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@needs_numba
def test_flat_stencil_for_higher_dimension():
    u = np.random.default_rng(1).standard_normal((4, 5, 3, 4))
    v = np.ones_like(u)
    assert np.allclose(_kernels.hamiltonian_apply_numpy(u.copy(), v, 2.0),
                       _kernels.hamiltonian_apply_numba(u.copy(), v, 2.0), atol=1e-12)


@needs_numba
def test_benchmark_smoke(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    rows = mod.main(["--quick", "--repeat", "1"])
    assert len(rows) == 4 and all(r[3] > 0 and r[4] > 0 for r in rows)
