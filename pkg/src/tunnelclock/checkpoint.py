"""Binary checkpoints of a clocked wavefunction.

Layout (all little-endian):

    bytes 0..3    magic "QCTD"
    u32           format version (1)
    u32           channel count N
    u32           nx
    u32           ny
    f64 x4        node extents x_min, x_max, y_min, y_max
    f64           simulation time
    N * nx * ny   complex128 channel data, row-major, channel-major
    N f64         absorbed probability per channel
    N f64         absorbed probability per pointer state

The grid is rebuilt from the stored node extents, which already include
any origin offset, so reconstruction reproduces the original nodes
bit-for-bit.  The clock parameters are not stored (the file only knows N);
the caller supplies them and the channel count is validated against them.
"""

from __future__ import annotations

import struct

import numpy as np

from .clock import ClockParams
from .errors import CheckpointError
from .grid import build_grid
from .propagate import ClockedWaveFunction

__all__ = ["write_checkpoint", "read_checkpoint", "MAGIC", "VERSION"]

MAGIC = b"QCTD"
VERSION = 1

_HEADER = struct.Struct("<4s4I5d")


def write_checkpoint(path, state: ClockedWaveFunction) -> None:
    g = state.grid
    n = state.channels.shape[0]
    header = _HEADER.pack(
        MAGIC, VERSION, n, g.nx, g.ny,
        float(g.x[0]), float(g.x[-1]), float(g.y[0]), float(g.y[-1]),
        float(state.time),
    )
    body = np.ascontiguousarray(state.channels, dtype="<c16").tobytes()
    trailer = (np.asarray(state.absorbed_ch, dtype="<f8").tobytes()
               + np.asarray(state.absorbed_vk, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)
        fh.write(trailer)


def read_checkpoint(path, clock: ClockParams | None) -> ClockedWaveFunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: shorter than the header")
    magic, version, n, nx, ny, x0, x1, y0, y1, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    expected_n = 1 if clock is None else clock.n_levels
    if n != expected_n:
        raise CheckpointError(
            f"{path}: {n} channels but the configured clock needs {expected_n}"
        )
    expected = _HEADER.size + n * nx * ny * 16 + 2 * n * 8
    if len(raw) != expected:
        raise CheckpointError(
            f"{path}: {len(raw)} bytes, expected {expected} (truncated file?)"
        )
    grid = build_grid(nx, ny, x0, x1, y0, y1, offset_origin=False)
    off = _HEADER.size
    channels = np.frombuffer(raw, dtype="<c16", count=n * nx * ny,
                             offset=off).reshape(n, nx, ny).copy()
    off += n * nx * ny * 16
    absorbed_ch = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    off += n * 8
    absorbed_vk = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    state = ClockedWaveFunction(grid=grid, clock=clock, channels=channels,
                                time=float(time))
    state.absorbed_ch[:] = absorbed_ch
    state.absorbed_vk[:] = absorbed_vk
    return state
