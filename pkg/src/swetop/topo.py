"""Topological derivative of the tracking objective with its term-by-term breakdown.

All terms are evaluated at frozen arguments: state, gradients and adjoint are
interpolated bilinearly to the sample point at every step and integrated in
time with the trapezoid rule. The corrector is the gradient-matching one, so
every average over the reference inclusion reduces to the integrand itself.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .adjoint import AdjointTrajectory, _target_at_step
from .core import OutOfDomainError, SweError, TargetField, TrajectoryError, bilinear_weights, gradient
from .corrector import viscous_projection
from .flux import CellState, divergence_form, source
from .forward import Trajectory
from .objective import trapezoid_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TDBreakdown:
    r1_a1: float = 0.0
    r2_a1: float = 0.0
    dl_a1: float = 0.0
    r1_a2: float = 0.0
    r2_a2: float = 0.0
    dl_a2: float = 0.0
    r1_j: float = 0.0
    r2_j: float = 0.0
    dl_j: float = 0.0

    @property
    def total(self) -> float:
        return sum(getattr(self, f.name) for f in fields(self))

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class TDSample:
    x0: tuple[float, float]
    breakdown: TDBreakdown | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.breakdown is not None


class TDInputs:
    """Per-step fields shared by every sample point of one run."""

    def __init__(self, forward: Trajectory, adjoint: AdjointTrajectory, target: TargetField):
        grid = forward.grid
        n = grid.n_steps
        if len(adjoint) != n + 1:
            raise TrajectoryError(f"adjoint has {len(adjoint)} levels, expected {n + 1}")
        self.grid = grid
        self.ctx = forward.ctx
        self.u = np.stack([forward.at_step(k) for k in range(n + 1)])
        self.p = adjoint.states
        self.ud = np.stack([_target_at_step(target, forward, k) for k in range(n + 1)])
        dx, dy = grid.dx, grid.dy
        self.gu = np.stack([gradient(self.u, dx, 2), gradient(self.u, dy, 3)], axis=2)
        self.gp = np.stack([gradient(self.p, dx, 2), gradient(self.p, dy, 3)], axis=2)
        if n == 0:
            self.ut = np.zeros_like(self.u)
        else:
            self.ut = np.gradient(self.u, grid.dt, axis=0, edge_order=1)
        self.weights = trapezoid_weights(grid.times())
        bathy = self.ctx.bathy
        self.dpsi = np.stack([bathy.dpsi_dx, bathy.dpsi_dy])

    def check_point(self, x0, y0) -> None:
        g = self.grid
        if not (2 * g.dx <= x0 <= g.lx - 2 * g.dx and 2 * g.dy <= y0 <= g.ly - 2 * g.dy):
            raise OutOfDomainError(f"sample point ({x0}, {y0}) is within two cells of the boundary")

    def at(self, x0, y0) -> dict:
        i, j, w = bilinear_weights(self.grid, x0, y0)

        def pick(a):
            return w[0] * a[..., i, j] + w[1] * a[..., i + 1, j] + w[2] * a[..., i, j + 1] + w[3] * a[..., i + 1, j + 1]

        return {
            "u": pick(self.u),  # (n+1, 3)
            "ut": pick(self.ut),
            "gu": pick(self.gu),  # (n+1, 3, 2)
            "p": pick(self.p),
            "gp": pick(self.gp),
            "ud": pick(self.ud),
            "dpsi": pick(self.dpsi),  # (2,)
        }


def _breakdown(inp: TDInputs, x0, y0) -> TDBreakdown:
    inp.check_point(x0, y0)
    v = inp.at(x0, y0)
    g = inp.ctx.g
    q = inp.ctx.visc.q_diag
    w = inp.weights
    trap = lambda series: float(w @ series)  # noqa: E731

    u = v["u"].T  # (3, n+1)
    cell = CellState(*u)
    gu = np.moveaxis(v["gu"], 0, -1)  # (3, 2, n+1)
    p = v["p"].T
    gp = np.moveaxis(v["gp"], 0, -1)
    gk = viscous_projection(np.ones((3, 2)), q)[:, :, None] * gu

    def form(grad):
        return divergence_form(cell, grad, g)

    residual = v["ut"].T + form(gu) - source(cell, v["dpsi"], g)
    dl_a1 = -trap((residual * p).sum(axis=0))
    dl_a2 = -trap(np.einsum("c,cdn,cdn->n", q, gu, gp))
    dl_j = -trap((gu**2).sum(axis=(0, 1))) - trap(((u - v["ud"].T) ** 2).sum(axis=0))

    if not np.any(q > 0):
        return TDBreakdown(dl_a1=dl_a1, dl_j=dl_j)
    r2_a1 = -trap((form(gk) * p).sum(axis=0))
    r1_a1 = trap(((form(gu + gk) - form(gu) - form(gk)) * p).sum(axis=0))
    return TDBreakdown(r1_a1=r1_a1, r2_a1=r2_a1, dl_a1=dl_a1, r2_a2=dl_a2, dl_a2=dl_a2, dl_j=dl_j)


def evaluate_td(x0, forward: Trajectory, adjoint: AdjointTrajectory, target: TargetField) -> TDSample:
    """Topological derivative at ``x0``; grid, bathymetry and viscosity come from ``forward``."""
    inp = TDInputs(forward, adjoint, target)
    return TDSample(tuple(map(float, x0)), _breakdown(inp, *x0))


def td_field(points, forward: Trajectory, adjoint: AdjointTrajectory, target: TargetField, threads: int = 1):
    """Evaluate every point independently; failures are kept as error markers.

    The result is sorted in grid order (by the cell index of x, then y).
    """
    points = [tuple(map(float, pt)) for pt in points]
    if not points:
        return []
    inp = TDInputs(forward, adjoint, target)

    def one(pt):
        try:
            return TDSample(pt, _breakdown(inp, *pt))
        except SweError as exc:
            log.warning("sample point %s failed: %s", pt, exc)
            return TDSample(pt, None, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(one, points))
    else:
        samples = [one(pt) for pt in points]
    grid = forward.grid
    order = lambda s: (int(s.x0[0] // grid.dx), int(s.x0[1] // grid.dy), s.x0)  # noqa: E731
    return sorted(samples, key=order)


def interior_points(grid, stride: int = 1) -> list[tuple[float, float]]:
    """Cell centres at least two cells away from the walls."""
    x = (np.arange(2, grid.nx - 2, stride) + 0.5) * grid.dx
    y = (np.arange(2, grid.ny - 2, stride) + 0.5) * grid.dy
    return [(float(a), float(b)) for a in x for b in y]
