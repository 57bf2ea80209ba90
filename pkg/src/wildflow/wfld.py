"""Binary field snapshots.

Layout, all little-endian: magic ``b"WFLD"``, u32 version (currently 1),
u32 component count, u32 nt, nx, ny, nz, f64 T, Lx, Ly, then the payload as
float64 in row-major (t, x, y, z, comp) order with nz + 1 vertical samples.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import (Grid, ScalarField, TensorField, VectorField,
                     ContractError, TENSOR_PARITY, VECTOR_PARITY)

MAGIC = b"WFLD"
VERSION = 1
_HEADER = struct.Struct("<4sII4I3d")


def dump(field, path) -> None:
    """Write a scalar, vector, or tensor field to ``path``."""
    g = field.grid
    ncomp = field.ncomp
    data = field.data if ncomp > 1 else field.data[..., None]
    header = _HEADER.pack(MAGIC, VERSION, ncomp, g.nt, g.nx, g.ny, g.nz,
                          g.T, g.Lx, g.Ly)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load(path, zparity=None):
    """Read a field written by :func:`dump`.

    The parity tags are not serialized; pass ``zparity`` to override the
    canonical defaults (even scalar, velocity-parity vector, tensor layout).
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContractError(f"{path}: truncated header")
    magic, version, ncomp, nt, nx, ny, nz, T, Lx, Ly = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContractError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ContractError(f"{path}: unsupported version {version}")
    count = nt * nx * ny * (nz + 1) * ncomp
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != count:
        raise ContractError(f"{path}: payload has {payload.size} values, "
                            f"expected {count}")
    grid = Grid(nx, ny, nz, nt, T, Lx, Ly)
    data = payload.reshape(grid.shape + (ncomp,)).astype(float)
    if ncomp == 1:
        return ScalarField(grid, data[..., 0], zparity or "even")
    if ncomp == 3:
        return VectorField(grid, data, zparity or VECTOR_PARITY)
    if ncomp == 5:
        return TensorField(grid, data, zparity or TENSOR_PARITY)
    raise ContractError(f"{path}: unsupported component count {ncomp}")
