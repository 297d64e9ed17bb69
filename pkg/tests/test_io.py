import json
import struct

import numpy as np
import pytest

from ucplab.errors import InvalidParameter
from ucplab.hamiltonian import Grid, HamiltonianOperator
from ucplab.io import atomic_write, field_bytes, read_field, write_eigensolution, write_field
from ucplab.report import Report
from ucplab.spectral import eigenpairs


@pytest.mark.parametrize("dtype", [np.float64, np.complex128])
def test_field_roundtrip(dtype):
    grid = Grid(2, 3.0, 6)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(grid.shape).astype(dtype)
    if dtype is np.complex128:
        vals = vals + 1j * rng.standard_normal(grid.shape)
    g2, back = read_field(field_bytes(grid, vals))
    assert g2 == grid
    assert back.dtype == dtype and np.array_equal(back, vals)


def test_field_header_layout():
    grid = Grid(1, 2.5, 4)
    data = field_bytes(grid, np.arange(4.0))
    assert data[:4] == b"UCPF"
    assert struct.unpack_from("<HH", data, 4) == (1, 1)
    assert struct.unpack_from("<Q", data, 8) == (4,)
    assert struct.unpack_from("<d", data, 16) == (2.5,)
    assert len(data) == 8 + 8 + 16 + 4 * 8


def test_read_field_rejects_garbage():
    with pytest.raises(InvalidParameter):
        read_field(b"nope" + bytes(40))


def test_write_field_sidecar(tmp_path):
    grid = Grid(1, 1.0, 5)
    write_field(tmp_path / "f.bin", grid, np.ones(5), {"energy": 2.0})
    side = json.loads((tmp_path / "f.bin.json").read_text())
    assert side["energy"] == 2.0 and side["dtype"] == "float64" and side["n"] == 5
    assert read_field((tmp_path / "f.bin").read_bytes())[1].tolist() == [1.0] * 5


def test_eigensolution_export(tmp_path):
    grid = Grid(1, 1.0, 50)
    sol = eigenpairs(HamiltonianOperator(grid), 3)
    write_eigensolution(tmp_path, grid, sol)
    man = json.loads((tmp_path / "eigen.json").read_text())
    assert set(man) == {"energies", "residuals", "tol", "method"}
    assert np.allclose(man["energies"], sol.energies)
    _, m1 = read_field((tmp_path / "mode_001.bin").read_bytes())
    assert np.array_equal(m1, sol.modes[1])


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write(tmp_path / "a.txt", "hello")
    atomic_write(tmp_path / "a.txt", b"bye")
    assert (tmp_path / "a.txt").read_bytes() == b"bye"
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]


def test_report_outputs(tmp_path):
    rep = Report("demo", {"x": 1}, [{"delta_over_M": 0.1, "ratio": np.float64(0.5), "bound_sq": 0.25,
                                     "status": "pass"},
                                    {"delta_over_M": 0.2, "ratio": 0.6, "extra": True, "status": "out-of-scope"}],
                 {"K": 1.0}, wall_time=3.0)
    assert rep.status == "pass"
    rep.write(tmp_path, ("json", "csv"), plot=True)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert "wall_time" not in json.dumps(doc)
    assert json.loads((tmp_path / "timing.json").read_text())["wall_time_s"] == 3.0
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert len(lines) == 3 and "extra" in lines[0]
    assert "<svg" in (tmp_path / "plot.svg").read_text()
    rep.records.append({"status": "fail"})
    assert rep.status == "fail" and not rep.passed
