"""Plain-text field dumps: one row per cell and level, 17 significant digits."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import GridSpec

FORWARD_HEADER = "x y t h q1 q2"
ADJOINT_HEADER = "x y t p1 p2 p3"
TD_HEADER = "x y td r1_a1 r2_a1 dl_a1 r2_a2 dl_a2 dl_j"
FMT = "%.17g"


def trajectory_rows(levels: np.ndarray, times, grid: GridSpec) -> np.ndarray:
    """Stack ``(n_levels, 3, nx, ny)`` levels into rows ``x y t c0 c1 c2``."""
    x, y = grid.centers()
    rows = []
    for t, lev in zip(times, levels):
        rows.append(np.column_stack([x.ravel(), y.ravel(), np.full(x.size, t), lev.reshape(3, -1).T]))
    return np.vstack(rows) if rows else np.empty((0, 6))


def write_trajectory(path, levels, times, grid: GridSpec, header: str = FORWARD_HEADER) -> Path:
    path = Path(path)
    np.savetxt(path, trajectory_rows(levels, times, grid), fmt=FMT, header=header, comments="# ")
    return path


def write_td(path, samples) -> Path:
    """TD table; failed points get NaN columns and a comment line naming the error."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# {TD_HEADER}\n")
        for s in samples:
            if s.ok:
                b = s.breakdown
                vals = [s.x0[0], s.x0[1], b.total, b.r1_a1, b.r2_a1, b.dl_a1, b.r2_a2, b.dl_a2, b.dl_j]
            else:
                fh.write(f"# error at {s.x0[0]!r} {s.x0[1]!r}: {s.error}\n")
                vals = [s.x0[0], s.x0[1]] + [np.nan] * 7
            fh.write(" ".join(FMT % v for v in vals) + "\n")
    return path


def read_dump(path) -> tuple[list[str], np.ndarray]:
    """Column names and data of any dump written by this module."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
    names = header.lstrip("#").split()
    data = np.loadtxt(path, comments="#", ndmin=2)
    return names, data
