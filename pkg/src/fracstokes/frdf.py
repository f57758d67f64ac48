"""FRDF binary field files.

Layout (little-endian throughout)::

    b"FRDF"            magic
    u32                version (1)
    u32                ndim
    u64 * ndim         points per axis
    f64                half width L
    f64 * prod(dims)   samples, row-major
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .spectral_grid import GridSpec, ScalarField

MAGIC = b"FRDF"
VERSION = 1


class FormatError(ValueError):
    pass


def encode(f: ScalarField) -> bytes:
    g = f.grid
    header = MAGIC + struct.pack("<II", VERSION, g.ndim)
    header += struct.pack(f"<{g.ndim}Q", *g.shape)
    header += struct.pack("<d", g.half_width)
    return header + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode(data: bytes) -> ScalarField:
    if data[:4] != MAGIC:
        raise FormatError("not an FRDF file (bad magic)")
    try:
        version, ndim = struct.unpack_from("<II", data, 4)
    except struct.error as exc:
        raise FormatError("truncated FRDF header") from exc
    if version != VERSION:
        raise FormatError(f"unsupported FRDF version {version}")
    if ndim not in (1, 2, 3):
        raise FormatError(f"bad ndim {ndim}")
    offset = 12
    try:
        dims = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        (half_width,) = struct.unpack_from("<d", data, offset)
    except struct.error as exc:
        raise FormatError("truncated FRDF header") from exc
    offset += 8
    if len(set(dims)) != 1:
        raise FormatError(f"only cubic grids are supported, got dims {dims}")
    try:
        grid = GridSpec(ndim, int(dims[0]), half_width)
    except ValueError as exc:
        raise FormatError(f"invalid grid in header: {exc}") from exc
    expected = offset + 8 * grid.size
    if len(data) != expected:
        raise FormatError(f"FRDF payload has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=offset).astype(float)
    return ScalarField(grid, values.reshape(grid.shape))


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_field(path: str | os.PathLike, f: ScalarField) -> None:
    atomic_write_bytes(path, encode(f))


def read_field(path: str | os.PathLike) -> ScalarField:
    return decode(Path(path).read_bytes())
