"""Binary grid container and CSV helpers.

Grid container layout (little-endian):
    int64 d, int64 n_axis, float64 R_max, d*d float64 tail matrix
    (row-major), then n_axis^d complex values as interleaved re/im
    float64 in row-major node order.

The tail matrix doubles as the Gaussian reference of the loaded grid;
core models are derived data and are not serialized.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .field.grid import CharFnGrid

_FLOAT_FMT = "%.17g"


def write_grid(grid: CharFnGrid, path: str | Path) -> None:
    b = grid.b_tail if grid.b_tail is not None else np.zeros((grid.dim, grid.dim))
    with open(path, "wb") as f:
        f.write(struct.pack("<qqd", grid.dim, grid.n_axis, grid.r_max))
        f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        inter = np.empty(grid.values.size * 2)
        inter[0::2] = grid.values.ravel().real
        inter[1::2] = grid.values.ravel().imag
        f.write(inter.astype("<f8").tobytes())


def read_grid(path: str | Path) -> CharFnGrid:
    with open(path, "rb") as f:
        d, n, r_max = struct.unpack("<qqd", f.read(24))
        b = np.frombuffer(f.read(8 * d * d), dtype="<f8").reshape(d, d).copy()
        inter = np.frombuffer(f.read(), dtype="<f8")
    vals = (inter[0::2] + 1j * inter[1::2]).reshape((n,) * d)
    if np.allclose(b, 0.0):
        return CharFnGrid(dim=d, n_axis=n, r_max=r_max, values=vals)
    return CharFnGrid(dim=d, n_axis=n, r_max=r_max, values=vals,
                      ref_kind="char", ref_shift=np.zeros(d), b_tail=b)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    """CSV with a fixed column order and 17-significant-digit floats."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_FLOAT_FMT % x if isinstance(x, float) else str(x)
                             for x in row) + "\n")


def export_radial_csv(grid: CharFnGrid, path: str | Path) -> None:
    """Radial slices of the field along each coordinate axis."""
    ax = grid.axis()
    header = ["k"]
    cols = [ax]
    for axis_ in range(grid.dim):
        idx = [grid.half] * grid.dim
        sl = tuple(slice(None) if i == axis_ else idx[i] for i in range(grid.dim))
        v = grid.values[sl]
        header += [f"re_axis{axis_}", f"im_axis{axis_}"]
        cols += [v.real, v.imag]
    rows = zip(*[list(map(float, c)) for c in cols])
    write_csv(path, header, rows)
