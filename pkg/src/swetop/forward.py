"""Explicit solver for the viscous shallow water system.

Scheme: centred face fluxes with a Lax-Friedrichs penalty, forward Euler in
time, reflective walls through mirrored ghost cells. The dissipation speed is
frozen for a whole run so that the step is a smooth function of the state and
its tangent (``tangent_step``) is exact.

The continuity penalty acts on the free surface ``h + psi`` rather than on
``h`` and the slope source is assembled face by face alongside the pressure
flux; together these make lake-at-rest states exact discrete equilibria.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    H_MIN,
    X_PARITY,
    Y_PARITY,
    Bathymetry,
    BlowUpError,
    ConservedState,
    GridSpec,
    StabilityError,
    ViscosityParams,
    pad,
    pad_T,
)
from .flux import CellState, flux_jacobians

log = logging.getLogger(__name__)


def _lo(a, axis):
    s = [slice(None)] * a.ndim
    s[axis] = slice(None, -1)
    return a[tuple(s)]


def _hi(a, axis):
    s = [slice(None)] * a.ndim
    s[axis] = slice(1, None)
    return a[tuple(s)]


def _diff(a, axis):
    return _hi(a, axis) - _lo(a, axis)


def _avg(a, axis):
    return 0.5 * (_hi(a, axis) + _lo(a, axis))


def _grow(b, axis):
    shape = list(b.shape)
    shape[axis] += 1
    return np.zeros(shape)


def _diff_T(b, axis):
    out = _grow(b, axis)
    _lo(out, axis)[...] -= b
    _hi(out, axis)[...] += b
    return out


def _avg_T(b, axis):
    out = _grow(b, axis)
    _lo(out, axis)[...] += 0.5 * b
    _hi(out, axis)[...] += 0.5 * b
    return out


def _flux_column(u, g, col):
    """One column of F(U) for a stacked ``(3, ...)`` array."""
    h, q1, q2 = u
    p = 0.5 * g * h * h
    if col == 0:
        return np.stack([q1, q1 * q1 / h + p, q1 * q2 / h])
    return np.stack([q2, q1 * q2 / h, q2 * q2 / h + p])


def max_wave_speed(state: ConservedState, g: float) -> float:
    h = np.asarray(state.h)
    c = np.sqrt(g * h)
    sx = np.abs(state.q1 / h) + c
    sy = np.abs(state.q2 / h) + c
    return float(max(sx.max(), sy.max()))


def cfl_dt(state: ConservedState, grid: GridSpec, visc: ViscosityParams, g: float, cfl_number: float = 0.5) -> float:
    """Suggested step: ``cfl`` times the smaller of the wave and diffusion limits.

    The limits are ``min(dx, dy) / s_max`` and ``min(dx, dy)^2 / (4 alpha)``.
    For this unsplit 2D scheme a stable run needs roughly ``cfl <= 0.5``
    without viscosity; :func:`max_stable_dt` gives the combined bound.
    """
    if not 0 < cfl_number <= 1:
        raise ValueError("cfl_number must lie in (0, 1]")
    d = min(grid.dx, grid.dy)
    dt = d / max_wave_speed(state, g)
    if visc.max_alpha > 0:
        dt = min(dt, d * d / (4 * visc.max_alpha))
    return cfl_number * dt


def max_stable_dt(state: ConservedState, grid: GridSpec, visc: ViscosityParams, g: float, lf_speed=None) -> float:
    """Von Neumann bound of the explicit update with penalty and viscosity combined."""
    lam = max_wave_speed(state, g)
    if lf_speed is not None:
        lam = max(lam, lf_speed)
    rate = lam * (1 / grid.dx + 1 / grid.dy) + 2 * visc.max_alpha * (1 / grid.dx**2 + 1 / grid.dy**2)
    return 1.0 / rate


@dataclass(frozen=True)
class StepContext:
    """Everything the stencil needs besides the state; built once per run."""

    grid: GridSpec
    bathy: Bathymetry
    visc: ViscosityParams
    g: float
    lf_speed: float
    psi_pad: tuple = field(init=False, repr=False)
    dpsi_face: tuple = field(init=False, repr=False)
    k_face: tuple = field(init=False, repr=False)

    def __post_init__(self):
        psi = self.bathy.psi
        psi_pad = (pad(psi, 0), pad(psi, 1))
        dpsi_face = (_diff(psi_pad[0], 0), _diff(psi_pad[1], 1))
        chi = np.ones(self.grid.shape) if self.visc.mask is None else np.asarray(self.visc.mask, dtype=float)
        alpha = np.array([self.visc.alpha1, self.visc.alpha2])[:, None, None]
        # a face is viscous only when both neighbours are
        k_face = tuple(alpha * (_lo(pad(chi, ax), ax) * _hi(pad(chi, ax), ax))[None] for ax in (0, 1))
        object.__setattr__(self, "psi_pad", psi_pad)
        object.__setattr__(self, "dpsi_face", dpsi_face)
        object.__setattr__(self, "k_face", k_face)

    @property
    def spacing(self):
        return (self.grid.dx, self.grid.dy)


_PARITY = (X_PARITY[:, None, None], Y_PARITY[:, None, None])


def rhs(u: np.ndarray, ctx: StepContext) -> np.ndarray:
    """Semi-discrete right-hand side ``-div F + div(Q grad U) + S`` of a ``(3, nx, ny)`` state."""
    g, lam = ctx.g, ctx.lf_speed
    out = np.zeros_like(u)
    for ax in (0, 1):
        d = ctx.spacing[ax]
        a = ax + 1
        up = pad(u, a, _PARITY[ax])
        f = _flux_column(up, g, ax)
        eta = up.copy()
        eta[0] += ctx.psi_pad[ax]
        face = _avg(f, a) - 0.5 * lam * _diff(eta, a)
        out -= _diff(face, a) / d
        sf = _avg(up[0], ax) * ctx.dpsi_face[ax]
        out[1 + ax] -= g * _avg(sf, ax) / d
        vflux = ctx.k_face[ax] * _diff(up[1:], a) / d
        out[1:] += _diff(vflux, a) / d
    return out


def tangent_rhs(u: np.ndarray, du: np.ndarray, ctx: StepContext) -> np.ndarray:
    """Directional derivative of :func:`rhs` at ``u`` along ``du``."""
    g, lam = ctx.g, ctx.lf_speed
    out = np.zeros_like(u)
    for ax in (0, 1):
        d = ctx.spacing[ax]
        a = ax + 1
        up = pad(u, a, _PARITY[ax])
        dup = pad(du, a, _PARITY[ax])
        jac = flux_jacobians(CellState(*up), g)[ax]
        df = np.einsum("ij...,j...->i...", jac, dup)
        face = _avg(df, a) - 0.5 * lam * _diff(dup, a)
        out -= _diff(face, a) / d
        sf = _avg(dup[0], ax) * ctx.dpsi_face[ax]
        out[1 + ax] -= g * _avg(sf, ax) / d
        vflux = ctx.k_face[ax] * _diff(dup[1:], a) / d
        out[1:] += _diff(vflux, a) / d
    return out


def tangent_rhs_T(u: np.ndarray, w: np.ndarray, ctx: StepContext) -> np.ndarray:
    """Transpose of ``du -> tangent_rhs(u, du)`` applied to ``w``."""
    g, lam = ctx.g, ctx.lf_speed
    out = np.zeros_like(u)
    for ax in (0, 1):
        d = ctx.spacing[ax]
        a = ax + 1
        up = pad(u, a, _PARITY[ax])
        jac = flux_jacobians(CellState(*up), g)[ax]
        dup_bar = np.zeros_like(up)

        face_bar = -_diff_T(w, a) / d
        dup_bar += np.einsum("ji...,j...->i...", jac, _avg_T(face_bar, a))
        dup_bar -= 0.5 * lam * _diff_T(face_bar, a)

        sf_bar = -g * _avg_T(w[1 + ax], ax) / d
        dup_bar[0] += _avg_T(sf_bar * ctx.dpsi_face[ax], ax)

        vflux_bar = _diff_T(w[1:], a) / d
        dup_bar[1:] += _diff_T(ctx.k_face[ax] * vflux_bar, a) / d

        out += pad_T(dup_bar, a, _PARITY[ax])
    return out


def check_stability(u: np.ndarray, ctx: StepContext) -> None:
    state = ConservedState.from_array(u)
    limit = max_stable_dt(state, ctx.grid, ctx.visc, ctx.g, ctx.lf_speed)
    if ctx.grid.dt > limit * (1 + 1e-9):
        raise StabilityError(f"dt = {ctx.grid.dt:.6g} exceeds the stability limit {limit:.6g}")


def _advance(u: np.ndarray, ctx: StepContext, h_min: float = H_MIN) -> tuple[np.ndarray, int]:
    new = u + ctx.grid.dt * rhs(u, ctx)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite values after step")
    low = new[0] < h_min
    n_low = int(np.count_nonzero(low))
    if n_low:
        new[0][low] = h_min
    return new, n_low


def make_context(init: ConservedState, grid, bathy, visc, g, lf_speed=None) -> StepContext:
    if lf_speed is None:
        lf_speed = max_wave_speed(init, g)
    return StepContext(grid, bathy, visc, g, float(lf_speed))


def step(
    state: ConservedState,
    grid: GridSpec,
    bathy: Bathymetry,
    visc: ViscosityParams,
    g: float,
    lf_speed: float | None = None,
) -> ConservedState:
    """One explicit update. ``lf_speed`` defaults to the state's own wave speed."""
    ctx = make_context(state, grid, bathy, visc, g, lf_speed)
    u = state.as_array()
    check_stability(u, ctx)
    new, n_low = _advance(u, ctx)
    if n_low:
        log.warning("clamped h at %d cells", n_low)
    return ConservedState.from_array(new)


def tangent_step(u: np.ndarray, du: np.ndarray, ctx: StepContext) -> np.ndarray:
    return du + ctx.grid.dt * tangent_rhs(u, du, ctx)


def tangent_step_T(u: np.ndarray, w: np.ndarray, ctx: StepContext) -> np.ndarray:
    return w + ctx.grid.dt * tangent_rhs_T(u, w, ctx)


@dataclass
class Trajectory:
    """Stored forward levels; ``states[k]`` lives at ``times[k]``."""

    states: np.ndarray  # (n_levels, 3, nx, ny)
    times: np.ndarray
    stride: int
    ctx: StepContext
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.ctx.grid

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, k) -> ConservedState:
        return ConservedState.from_array(self.states[k])

    @property
    def is_full(self) -> bool:
        return len(self.states) == self.grid.n_steps + 1

    def at_step(self, n: int) -> np.ndarray:
        """State at step ``n``, linearly interpolated between stored levels."""
        if self.is_full:
            return self.states[n]
        t = n * self.grid.dt
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.states[k] + w * self.states[k + 1]


def stored_steps(n_steps: int, stride: int) -> list[int]:
    steps = list(range(0, n_steps + 1, stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def run_forward(
    init: ConservedState,
    grid: GridSpec,
    bathy: Bathymetry,
    visc: ViscosityParams,
    g: float | None = None,
    storage: int = 1,
    lf_speed: float | None = None,
    clamp_budget: int = 100,
) -> Trajectory:
    """Integrate ``grid.n_steps`` steps from ``init``.

    ``storage`` keeps every ``storage``-th level (the final level always).
    More than ``clamp_budget`` positivity clamps in total raises
    :class:`BlowUpError`.
    """
    if g is None:
        g = grid.g
    if storage < 1:
        raise ValueError("storage stride must be >= 1")
    init.validate(grid)
    ctx = make_context(init, grid, bathy, visc, g, lf_speed)
    keep = set(stored_steps(grid.n_steps, storage))

    u = init.as_array().astype(float)
    levels = [u.copy()]
    mass = [float(u[0].sum() * grid.cell_area)]
    speeds = [max_wave_speed(init, g)]
    clamps = 0
    for n in range(1, grid.n_steps + 1):
        check_stability(u, ctx)
        u, n_low = _advance(u, ctx)
        clamps += n_low
        if clamps > clamp_budget:
            raise BlowUpError(f"positivity clamp budget exceeded at step {n} ({clamps} events)")
        mass.append(float(u[0].sum() * grid.cell_area))
        speeds.append(max_wave_speed(ConservedState.from_array(u), g))
        if n in keep:
            levels.append(u.copy())

    steps = sorted(keep)
    diagnostics = {
        "mass": np.array(mass),
        "max_wave_speed": np.array(speeds),
        "clamp_events": clamps,
        "stored_steps": steps,
    }
    m0 = mass[0]
    log.info("forward run: %d steps, relative mass drift %.3e", grid.n_steps, abs(mass[-1] - m0) / m0)
    return Trajectory(np.array(levels), np.array(steps) * grid.dt, storage, ctx, diagnostics)
