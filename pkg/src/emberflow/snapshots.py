"""Binary field snapshot format.

Layout: magic bytes "EMBR1", then little-endian u32 d, u32 n, f64 L,
f64 time, u8 field tag (0 = temperature, 1 = fuel), then n^d f64 samples
row-major.
"""

import struct

import numpy as np

from .grid import GridSpec, ScalarField

MAGIC = b"EMBR1"
_HEADER = struct.Struct("<IIddB")
TAG_TEMPERATURE = 0
TAG_FUEL = 1


def write_snapshot(path, field: ScalarField, time: float, tag: int):
    if tag not in (TAG_TEMPERATURE, TAG_FUEL):
        raise ValueError(f"field tag must be 0 or 1, got {tag}")
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(g.d, g.n, g.extent, float(time), tag))
        fh.write(field.values.astype("<f8").tobytes(order="C"))


def read_snapshot(path):
    """Returns (field, time, tag)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: bad magic bytes, not a field snapshot")
    d, n, extent, time, tag = _HEADER.unpack_from(blob, len(MAGIC))
    grid = GridSpec(d=d, n=n, extent=extent)
    offset = len(MAGIC) + _HEADER.size
    expected = grid.npoints * 8
    payload = blob[offset:]
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, values), time, tag
