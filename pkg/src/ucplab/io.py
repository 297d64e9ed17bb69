"""Binary field format and atomic file output.

Field files: little-endian header followed by row-major float64 values.

    magic   4 bytes  b"UCPF"
    version uint16   1
    d       uint16
    n       d x uint64   points per axis
    L       float64      box side
    dtype   uint8        0 = real, 1 = complex (values interleaved re, im)
    pad     7 bytes
"""
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidParameter
from .hamiltonian import Grid

MAGIC = b"UCPF"


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def field_bytes(grid: Grid, values) -> bytes:
    values = grid.check(values)
    is_complex = np.iscomplexobj(values)
    header = MAGIC + struct.pack("<HH", 1, grid.d) + struct.pack(f"<{grid.d}Q", *grid.shape)
    header += struct.pack("<dB7x", grid.L, 1 if is_complex else 0)
    if is_complex:
        body = np.ascontiguousarray(values, dtype="<c16").view("<f8")
    else:
        body = np.ascontiguousarray(values, dtype="<f8")
    return header + body.tobytes(order="C")


def read_field(data: bytes):
    """Inverse of :func:`field_bytes`; returns (grid, values)."""
    if data[:4] != MAGIC:
        raise InvalidParameter("not a field file")
    version, d = struct.unpack_from("<HH", data, 4)
    if version != 1:
        raise InvalidParameter(f"unsupported field format version {version}")
    off = 8
    shape = struct.unpack_from(f"<{d}Q", data, off)
    off += 8 * d
    L, code = struct.unpack_from("<dB7x", data, off)
    off += 16
    if len(set(shape)) != 1:
        raise InvalidParameter("only cubic grids are supported")
    grid = Grid(d, L, shape[0])
    raw = np.frombuffer(data, dtype="<f8", offset=off)
    if code == 1:
        values = raw.view("<c16").reshape(grid.shape).astype(np.complex128)
    else:
        values = raw.reshape(grid.shape).astype(np.float64)
    return grid, values


def write_field(path, grid: Grid, values, meta: dict | None = None):
    """Write ``path`` (binary) and ``path`` + ``.json`` (metadata sidecar)."""
    atomic_write(path, field_bytes(grid, values))
    side = {"d": grid.d, "n": grid.n, "L": grid.L, "h": grid.h,
            "dtype": "complex128" if np.iscomplexobj(values) else "float64"}
    side.update(meta or {})
    atomic_write(str(path) + ".json", json.dumps(side, indent=2, sort_keys=True))


def write_eigensolution(directory, grid: Grid, solution):
    directory = Path(directory)
    for i, mode in enumerate(solution.modes):
        write_field(directory / f"mode_{i:03d}.bin", grid, mode, {"energy": float(solution.energies[i])})
    atomic_write(directory / "eigen.json", json.dumps(solution.manifest(), indent=2, sort_keys=True))
