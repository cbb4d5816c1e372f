"""Backward solve for the adjoint state.

Two modes share the stencil family of the forward solver:

``continuous``
    Explicit backward Euler on ``-P_t + A P_x + B P_y + C P = S`` with
    coefficients taken at the later (known) level, the same Lax-Friedrichs
    penalty as the forward scheme, the backward viscous term ``Q lap P`` and
    mirrored ghosts (``p2`` odd across x-walls, ``p3`` odd across y-walls).
``discrete``
    Exact transpose of the linearised forward stepper driven by the exact
    derivative of the discrete objective. Values are stored as densities
    (divided by the cell area) so both modes are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    X_PARITY,
    Y_PARITY,
    AdjointState,
    BlowUpError,
    ConfigError,
    TargetField,
    TrajectoryError,
    mirror_laplacian,
    pad,
)
from .flux import CellState, adjoint_matrices, adjoint_source
from .forward import StepContext, Trajectory, check_stability, tangent_step_T
from .objective import level_gradient, trapezoid_weights

MODES = ("continuous", "discrete")


@dataclass
class AdjointTrajectory:
    """Adjoint levels aligned with forward steps ``0..n_steps``; the last level is zero."""

    states: np.ndarray  # (n_steps + 1, 3, nx, ny)
    times: np.ndarray
    mode: str

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, k) -> AdjointState:
        return AdjointState.from_array(self.states[k])


def _centered(p: np.ndarray, d: float, axis: int, parity) -> np.ndarray:
    pp = pad(p, axis, parity)
    s_hi = [slice(None)] * p.ndim
    s_lo = [slice(None)] * p.ndim
    s_hi[axis] = slice(2, None)
    s_lo[axis] = slice(None, -2)
    return (pp[tuple(s_hi)] - pp[tuple(s_lo)]) / (2 * d)


def _penalty(p: np.ndarray, ctx: StepContext) -> np.ndarray:
    """Lax-Friedrichs penalty of the forward stencil, applied to ``p``."""
    dx, dy = ctx.spacing
    px = pad(p, 1, X_PARITY[:, None, None])
    py = pad(p, 2, Y_PARITY[:, None, None])
    lap_x = (px[:, 2:] - 2 * p + px[:, :-2]) / dx
    lap_y = (py[:, :, 2:] - 2 * p + py[:, :, :-2]) / dy
    return 0.5 * ctx.lf_speed * (lap_x + lap_y)


def _viscous(p: np.ndarray, ctx: StepContext) -> np.ndarray:
    dx, dy = ctx.spacing
    out = np.zeros_like(p)
    for ax, d, parity in ((0, dx, X_PARITY), (1, dy, Y_PARITY)):
        a = ax + 1
        pp = pad(p[1:], a, parity[1:, None, None])
        flux = ctx.k_face[ax] * np.diff(pp, axis=a) / d
        out[1:] += np.diff(flux, axis=a) / d
    return out


def homogeneous_rate(p: np.ndarray, u: np.ndarray, ctx: StepContext) -> np.ndarray:
    """``-A P_x - B P_y - C P + Q lap P`` plus the penalty, i.e. ``-dP/dt`` without source."""
    bathy = ctx.bathy
    a, b, c = adjoint_matrices(CellState(*u), (bathy.dpsi_dx, bathy.dpsi_dy), ctx.g)
    px = _centered(p, ctx.grid.dx, 1, X_PARITY[:, None, None])
    py = _centered(p, ctx.grid.dy, 2, Y_PARITY[:, None, None])
    mv = lambda m, v: np.einsum("ij...,j...->i...", m, v)  # noqa: E731
    return -mv(a, px) - mv(b, py) - mv(c, p) + _viscous(p, ctx) + _penalty(p, ctx)


def source_field(u: np.ndarray, ud: np.ndarray, ctx: StepContext) -> np.ndarray:
    lap = mirror_laplacian(u, ctx.grid.dx, ctx.grid.dy)
    return adjoint_source(CellState(*u), lap, ud)


def backward_step(p_next: np.ndarray, u: np.ndarray, ud: np.ndarray | None, ctx: StepContext) -> np.ndarray:
    """One continuous-mode step from ``t_{n+1}`` to ``t_n`` with coefficients from ``u = U(t_{n+1})``.

    ``ud=None`` drops the source (homogeneous adjoint).
    """
    check_stability(u, ctx)
    rate = homogeneous_rate(p_next, u, ctx)
    if ud is not None:
        rate = rate + source_field(u, ud, ctx)
    return p_next + ctx.grid.dt * rate


def _target_at_step(target: TargetField, traj: Trajectory, n: int) -> np.ndarray:
    levels = target.data.shape[0]
    if levels == 1:
        return target.data[0]
    if levels == traj.grid.n_steps + 1:
        return target.data[n]
    if levels == len(traj) and not traj.is_full:
        t = n * traj.grid.dt
        k = min(max(int(np.searchsorted(traj.times, t, side="right")) - 1, 0), len(traj) - 2)
        w = (t - traj.times[k]) / (traj.times[k + 1] - traj.times[k])
        return (1 - w) * target.data[k] + w * target.data[k + 1]
    raise ConfigError(f"target has {levels} levels, cannot align with trajectory")


def run_adjoint(traj: Trajectory, target: TargetField, mode: str = "continuous") -> AdjointTrajectory:
    """Solve backward from zero final data over every forward step."""
    if mode not in MODES:
        raise ConfigError(f"unknown adjoint mode {mode!r}")
    ctx = traj.ctx
    grid = ctx.grid
    n = grid.n_steps
    if tuple(target.shape) != grid.shape:
        raise ConfigError("target does not match grid")
    out = np.zeros((n + 1, 3) + grid.shape)
    if mode == "continuous":
        p = out[n]
        for k in range(n - 1, -1, -1):
            p = backward_step(p, traj.at_step(k + 1), _target_at_step(target, traj, k + 1), ctx)
            if not np.all(np.isfinite(p)):
                raise BlowUpError(f"adjoint became non-finite at step {k}")
            out[k] = p
    else:
        if not traj.is_full:
            raise TrajectoryError("discrete adjoint needs every forward level")
        w = trapezoid_weights(traj.times)
        lam = np.zeros((3,) + grid.shape)
        for k in range(n - 1, -1, -1):
            # lam is the multiplier of step k -> k+1
            if k < n - 1:
                lam = tangent_step_T(traj.states[k + 1], lam, ctx)
            lam = lam - w[k + 1] * level_gradient(traj.states[k + 1], _target_at_step(target, traj, k + 1), grid)
            out[k] = lam / grid.cell_area
    return AdjointTrajectory(out, grid.times(), mode)


def initial_state_gradient(traj: Trajectory, target: TargetField, adj: AdjointTrajectory) -> np.ndarray:
    """Derivative of the discrete objective with respect to the initial state (discrete mode)."""
    if adj.mode != "discrete":
        raise ConfigError("initial-state gradient requires the discrete adjoint")
    grid = traj.grid
    w = trapezoid_weights(traj.times)
    own = w[0] * level_gradient(traj.states[0], _target_at_step(target, traj, 0), grid)
    if grid.n_steps == 0:
        return own
    return own - tangent_step_T(traj.states[0], adj.states[0] * grid.cell_area, traj.ctx)


def boundary_residuals(u: np.ndarray, p: np.ndarray, g: float) -> tuple[float, float]:
    """Largest wall values of the two adjoint boundary expressions.

    Wall values are averages of the edge cell and its mirrored ghost. The
    first expression is ``p2 nx + p3 ny``; the second weights ``p2, p3`` by
    the momentum flux and is reported as a diagnostic only.
    """
    sw1 = 0.0
    sw2 = 0.0
    for ax, parity in ((0, X_PARITY), (1, Y_PARITY)):
        a = ax + 1
        for edge in (0, -1):
            ue = np.take(u, [edge], axis=a)
            pe = np.take(p, [edge], axis=a)
            uw = 0.5 * (ue + ue * parity[:, None, None])
            pw = 0.5 * (pe + pe * parity[:, None, None])
            h, q1, q2 = uw
            pres = 0.5 * g * h * h
            if ax == 0:
                r1 = pw[1]
                r2 = (q1 * q1 / h + pres) * pw[1] + (q1 * q2 / h) * pw[2]
            else:
                r1 = pw[2]
                r2 = (q1 * q2 / h) * pw[1] + (q2 * q2 / h + pres) * pw[2]
            sw1 = max(sw1, float(np.abs(r1).max()))
            sw2 = max(sw2, float(np.abs(r2).max()))
    return sw1, sw2
