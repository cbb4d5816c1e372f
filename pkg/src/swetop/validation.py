"""Independent checks: dot-product test, hole-punching finite differences, affinity."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointTrajectory, backward_step, run_adjoint
from .core import (
    Bathymetry,
    ConfigError,
    ConservedState,
    GridSpec,
    PerturbationShape,
    TargetField,
    ViscosityParams,
)
from .flux import CellState, divergence_form
from .forward import Trajectory, run_forward, tangent_step, tangent_step_T
from .objective import evaluate_j, evaluate_j_masked
from .topo import TDBreakdown, evaluate_td

MIN_COVERED_CELLS = 4


def smooth_random_field(grid: GridSpec, seed: int, modes: int = 3) -> np.ndarray:
    """Seeded ``(3, nx, ny)`` sum of low cosine modes; the same seed gives the same function on any grid."""
    rng = np.random.default_rng(seed)
    x, y = grid.centers()
    coef = rng.standard_normal((3, modes, modes))
    cx = np.cos(np.pi * np.arange(modes)[:, None, None] * x / grid.lx)
    cy = np.cos(np.pi * np.arange(modes)[:, None, None] * y / grid.ly)
    return np.einsum("ckl,kij,lij->cij", coef, cx, cy)


@dataclass(frozen=True)
class DotProductReport:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs), 1e-30)


def dot_product_test(
    traj: Trajectory, seed: int = 0, mode: str = "discrete", du=None, w=None, adjoint_step=None
) -> DotProductReport:
    """Compare ``<L du, w>`` with ``<du, L* w>`` for the step-to-final-time propagator ``L``.

    ``L`` chains tangent steps along ``traj``. ``L*`` is the exact transpose
    (``mode="discrete"``) or the homogeneous continuous-mode backward solve
    started from ``w`` (``mode="continuous"``). ``adjoint_step`` replaces the
    transposed step in discrete mode, which lets a caller test the test.
    """
    if not traj.is_full:
        raise ConfigError("dot-product test needs every forward level")
    grid, ctx = traj.grid, traj.ctx
    du = smooth_random_field(grid, seed) if du is None else np.asarray(du, dtype=float)
    w = smooth_random_field(grid, seed + 1) if w is None else np.asarray(w, dtype=float)
    v = du
    for k in range(grid.n_steps):
        v = tangent_step(traj.states[k], v, ctx)
    transpose = tangent_step_T if adjoint_step is None else adjoint_step
    z = w
    for k in range(grid.n_steps - 1, -1, -1):
        if mode == "discrete":
            z = transpose(traj.states[k], z, ctx)
        elif mode == "continuous":
            z = backward_step(z, traj.states[k + 1], None, ctx)
        else:
            raise ConfigError(f"unknown adjoint mode {mode!r}")
    area = grid.cell_area
    return DotProductReport(float(np.vdot(v, w)) * area, float(np.vdot(du, z)) * area)


def observed_orders(errors) -> list[float]:
    e = np.asarray(errors, dtype=float)
    return list(np.log2(e[:-1] / e[1:]))


@dataclass
class TDProblem:
    """A complete forward/adjoint setup that can be re-solved with a hole."""

    init: ConservedState
    grid: GridSpec
    bathy: Bathymetry
    visc: ViscosityParams
    target: TargetField
    adjoint_mode: str = "continuous"
    _base: Trajectory | None = field(default=None, repr=False)
    _adjoint: AdjointTrajectory | None = field(default=None, repr=False)

    def forward(self, visc: ViscosityParams | None = None) -> Trajectory:
        v = self.visc if visc is None else visc
        lf = None if self._base is None else self._base.ctx.lf_speed
        return run_forward(self.init, self.grid, self.bathy, v, self.grid.g, lf_speed=lf)

    @property
    def base(self) -> Trajectory:
        if self._base is None:
            self._base = self.forward()
        return self._base

    @property
    def adjoint(self) -> AdjointTrajectory:
        if self._adjoint is None:
            self._adjoint = run_adjoint(self.base, self.target, self.adjoint_mode)
        return self._adjoint


@dataclass(frozen=True)
class FDReport:
    x0: tuple[float, float]
    epsilons: list[float]
    objectives: list[float]
    areas: list[float]
    quotients: list[float]
    extrapolated: float
    analytic: TDBreakdown
    j0: float

    @property
    def total(self) -> float:
        return self.analytic.total

    @property
    def sign_agrees(self) -> bool:
        return math.copysign(1.0, self.extrapolated) == math.copysign(1.0, self.total)

    @property
    def relative_error(self) -> float:
        return abs(self.extrapolated - self.total) / max(abs(self.total), 1e-300)

    @property
    def monotone(self) -> bool:
        d = np.diff(self.quotients)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def richardson(eps, values, order: float = 1.0) -> float:
    """Eliminate the ``eps**order`` error term from the last two entries."""
    e1, e2 = eps[-2] ** order, eps[-1] ** order
    q1, q2 = values[-2], values[-1]
    return (e1 * q2 - e2 * q1) / (e1 - e2)


def fd_td_oracle(
    x0,
    eps_list,
    problem: TDProblem,
    omega_radius: float = 1.0,
    mask_viscosity: bool = True,
    threads: int = 1,
    analytic: TDBreakdown | None = None,
    richardson_order: float = 1.0,
) -> FDReport:
    """Punch disks of decreasing size at ``x0`` and form ``(J_eps - J_0) / covered area``.

    The hole zeroes the objective integrand and, unless ``mask_viscosity`` is
    false, the viscosity on cells centred inside it. The hyperbolic part is
    left untouched. ``richardson_order`` is the assumed leading power of
    epsilon in the quotient error: 1 with the viscosity masked, 2 when only
    the integrand is (a disk average of a smooth field is even in epsilon).
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilon list must be strictly decreasing with at least 3 entries")
    grid = problem.grid
    holes = [PerturbationShape(tuple(map(float, x0)), e, omega_radius) for e in eps]
    for hole in holes:
        hole.check_interior(grid)
        covered = int(hole.cell_mask(grid).sum())
        if covered < MIN_COVERED_CELLS:
            raise ConfigError(f"hole of radius {hole.physical_radius} covers only {covered} cells")

    base = problem.base
    j0 = evaluate_j(base, problem.target).j_total

    def solve(hole):
        if mask_viscosity:
            traj = problem.forward(problem.visc.with_mask(~hole.cell_mask(grid)))
        else:
            traj = base
        return evaluate_j_masked(traj, problem.target, grid, hole).j_total

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            js = list(pool.map(solve, holes))
    else:
        js = [solve(h) for h in holes]
    areas = [h.covered_area(grid) for h in holes]
    quotients = [(j - j0) / a for j, a in zip(js, areas)]
    if analytic is None:
        analytic = evaluate_td(x0, base, problem.adjoint, problem.target).breakdown
    return FDReport(
        tuple(map(float, x0)),
        eps,
        js,
        areas,
        quotients,
        richardson(eps, quotients, richardson_order),
        analytic,
        j0,
    )


def affinity_check(seed: int = 0, n_samples: int = 100, g: float = 9.81) -> float:
    """Largest superposition defect of the flux-divergence form in its gradient slot.

    Reported relative to the largest form value in each sample.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        cell = CellState(rng.uniform(0.5, 2.0), rng.normal(), rng.normal())
        g1 = rng.normal(size=(3, 2))
        g2 = rng.normal(size=(3, 2))
        f12 = divergence_form(cell, g1 + g2, g)
        f1 = divergence_form(cell, g1, g)
        f2 = divergence_form(cell, g2, g)
        f0 = divergence_form(cell, np.zeros((3, 2)), g)
        scale = max(np.abs(f12).max(), np.abs(f1).max(), np.abs(f2).max(), 1.0)
        worst = max(worst, float(np.abs(f12 - f1 - f2 + f0).max() / scale))
    return worst
