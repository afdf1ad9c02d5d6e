"""Binary field snapshots (``.nlcb``).

Little-endian layout::

    b"NLCB"  u32 version=1  u32 kind (0 scalar, 1 vector)  u32 nx  u32 ny
    f64 lx  f64 ly
    f64 payload, row-major; vectors store the x-face block then the y-face block
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .grid import GridSpec, ScalarField, VectorField

MAGIC = b"NLCB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")


def write_snapshot(path, field) -> None:
    grid = field.grid
    if isinstance(field, VectorField):
        kind, blocks = 1, (field.x, field.y)
    else:
        kind, blocks = 0, (field.values,)
    header = _HEADER.pack(MAGIC, VERSION, kind, grid.nx, grid.ny, grid.lx, grid.ly)
    with open(path, "wb") as fh:
        fh.write(header)
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise IoFailure(f"{path}: truncated header")
    magic, version, kind, nx, ny, lx, ly = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise IoFailure(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise IoFailure(f"{path}: unsupported version {version}")
    if kind not in (0, 1):
        raise IoFailure(f"{path}: unknown field kind {kind}")
    return {"version": version, "kind": kind, "nx": nx, "ny": ny, "lx": lx, "ly": ly}


def read_snapshot(path):
    hdr = read_header(path)
    try:
        grid = GridSpec(hdr["nx"], hdr["ny"], hdr["lx"], hdr["ly"])
    except ValueError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    nx, ny = grid.shape
    data = np.frombuffer(Path(path).read_bytes()[_HEADER.size:], dtype="<f8")
    if hdr["kind"] == 0:
        if data.size != nx * ny:
            raise IoFailure(f"{path}: expected {nx * ny} values, found {data.size}")
        return ScalarField(grid, data.reshape(nx, ny).copy())
    nxf = (nx + 1) * ny
    nyf = nx * (ny + 1)
    if data.size != nxf + nyf:
        raise IoFailure(f"{path}: expected {nxf + nyf} values, found {data.size}")
    return VectorField(grid, data[:nxf].reshape(nx + 1, ny).copy(),
                       data[nxf:].reshape(nx, ny + 1).copy())
