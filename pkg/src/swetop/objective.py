"""Tracking objective: squared state gradients plus squared misfit, over space and time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, GridSpec, PerturbationShape, TargetField, gradient, gradient_T


@dataclass(frozen=True)
class ObjectiveBreakdown:
    j_total: float
    j_gradient: float
    j_misfit: float
    gradient_series: np.ndarray  # spatial integral per stored level
    misfit_series: np.ndarray


def integrand(u: np.ndarray, ud: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise ``|grad U|^2`` and ``|U - U_d|^2`` of one ``(3, nx, ny)`` level."""
    gx = gradient(u, grid.dx, 1)
    gy = gradient(u, grid.dy, 2)
    grad2 = (gx * gx + gy * gy).sum(axis=0)
    misfit2 = ((u - ud) ** 2).sum(axis=0)
    return grad2, misfit2


def level_gradient(u: np.ndarray, ud: np.ndarray, grid: GridSpec, mask: np.ndarray | None = None) -> np.ndarray:
    """Derivative of the spatial integral of one level with respect to the cell values."""
    w = np.ones(grid.shape) if mask is None else mask.astype(float)
    gx = gradient(u, grid.dx, 1)
    gy = gradient(u, grid.dy, 2)
    out = 2 * gradient_T(w * gx, grid.dx, 1) + 2 * gradient_T(w * gy, grid.dy, 2) + 2 * w * (u - ud)
    return out * grid.cell_area


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    if len(times) < 2:
        return np.zeros(len(times))
    dt = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _target_level(target: TargetField, k: int, n_levels: int) -> np.ndarray:
    if target.data.shape[0] not in (1, n_levels):
        raise ConfigError(f"target has {target.data.shape[0]} levels, trajectory has {n_levels}")
    return target.at(k)


def _evaluate(states, times, target: TargetField, grid: GridSpec, keep: np.ndarray | None) -> ObjectiveBreakdown:
    if tuple(target.shape) != grid.shape or states.shape[-2:] != grid.shape:
        raise ConfigError("trajectory, target and grid shapes differ")
    n = len(states)
    gs = np.empty(n)
    ms = np.empty(n)
    for k in range(n):
        g2, m2 = integrand(states[k], _target_level(target, k, n), grid)
        if keep is not None:
            g2 = g2 * keep
            m2 = m2 * keep
        gs[k] = g2.sum() * grid.cell_area
        ms[k] = m2.sum() * grid.cell_area
    w = trapezoid_weights(np.asarray(times))
    jg = float(w @ gs)
    jm = float(w @ ms)
    return ObjectiveBreakdown(jg + jm, jg, jm, gs, ms)


def evaluate_j(traj, target: TargetField, grid: GridSpec | None = None) -> ObjectiveBreakdown:
    """Trapezoid in time, midpoint in space, centred gradients (one-sided at walls)."""
    grid = grid or traj.grid
    return _evaluate(traj.states, traj.times, target, grid, None)


def evaluate_j_masked(
    traj,
    target: TargetField,
    grid: GridSpec | None,
    hole: PerturbationShape,
    require_interior: bool = True,
) -> ObjectiveBreakdown:
    """As :func:`evaluate_j` with the integrand zeroed on cells whose centres lie in the hole."""
    grid = grid or traj.grid
    if require_interior:
        hole.check_interior(grid)
    keep = ~hole.cell_mask(grid)
    return _evaluate(traj.states, traj.times, target, grid, keep)
