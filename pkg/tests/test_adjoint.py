import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from helpers import G, bump_scene, constant_target
from swetop.adjoint import (
    boundary_residuals,
    homogeneous_rate,
    initial_state_gradient,
    run_adjoint,
    source_field,
)
from swetop.core import Bathymetry, ConfigError, ConservedState, TargetField, TrajectoryError, ViscosityParams, make_grid
from swetop.forward import Trajectory, make_context, run_forward
from swetop.objective import evaluate_j

def _psi(x, y):
    return 0.04 * x + 0.02 * np.cos(np.pi * y)


def _scene(n=16, steps=12, alpha=0.01, flow=True):
    grid, init, bathy, visc = bump_scene(n, alpha, n_steps=steps, flow=flow, psi=_psi)
    return grid, init, bathy, visc, run_forward(init, grid, bathy, visc, G)


@pytest.mark.parametrize("mode", ["continuous", "discrete"])
def test_constant_state_on_target_gives_zero_adjoint(mode):
    g = make_grid(10, 10, 0.1, 0.1, 0.05, 0.005)
    s = ConservedState(np.full((10, 10), 1.3), np.zeros((10, 10)), np.zeros((10, 10)))
    traj = run_forward(s, g, Bathymetry.flat(g), ViscosityParams(0.02, 0.02), G)
    adj = run_adjoint(traj, TargetField.from_state(s), mode)
    assert np.abs(adj.states).max() == 0.0


@pytest.mark.parametrize("mode", ["continuous", "discrete"])
def test_final_level_is_zero(mode):
    *_, traj = _scene()
    adj = run_adjoint(traj, constant_target(traj.grid), mode)
    assert not adj.states[-1].any()
    assert np.abs(adj.states[0]).max() > 0
    assert len(adj) == traj.grid.n_steps + 1


def test_first_backward_step_is_dt_times_source():
    *_, traj = _scene()
    target = constant_target(traj.grid)
    adj = run_adjoint(traj, target)
    expected = traj.grid.dt * source_field(traj.states[-1], target.at(0), traj.ctx)
    np.testing.assert_allclose(adj.states[-2], expected, rtol=0, atol=1e-15)


def test_adjoint_is_linear_in_its_source():
    *_, traj = _scene()
    grid = traj.grid
    rng = np.random.default_rng(0)
    t1 = TargetField(rng.normal(size=(1, 3) + grid.shape))
    t2 = TargetField(rng.normal(size=(1, 3) + grid.shape))
    zero = TargetField(np.zeros((1, 3) + grid.shape))
    p0 = run_adjoint(traj, zero).states
    p1 = run_adjoint(traj, t1).states - p0
    p2 = run_adjoint(traj, t2).states - p0
    p12 = run_adjoint(traj, TargetField(t1.data + t2.data)).states - p0
    assert np.abs(p12 - p1 - p2).max() <= 1e-12 * np.abs(p12).max()


@pytest.mark.parametrize("mode", ["continuous", "discrete"])
def test_boundary_conditions_hold_at_every_level(mode):
    *_, traj = _scene()
    adj = run_adjoint(traj, constant_target(traj.grid), mode)
    for u, p in zip(traj.states, adj.states):
        sw1, sw2 = boundary_residuals(u, p, G)
        assert sw1 == 0.0
        assert sw2 <= 1e-10


def test_frozen_coefficients_match_method_of_lines_reference():
    n = 16
    grid = make_grid(n, n, 1 / n, 1 / n, 0.05, 5e-5)
    u0 = np.stack([np.ones((n, n)), np.full((n, n), 0.1), np.full((n, n), 0.05)])
    init = ConservedState.from_array(u0)
    ctx = make_context(init, grid, Bathymetry.flat(grid), ViscosityParams(0.01, 0.01), G)
    # every level equal: A, B, C are constant in space and time
    traj = Trajectory(np.repeat(u0[None], grid.n_steps + 1, axis=0), grid.times(), 1, ctx)
    x, y = grid.centers()
    ud = np.stack([1 + 0.1 * np.cos(np.pi * x) * np.cos(np.pi * y), 0.1 + 0 * x, 0.05 + 0.05 * np.cos(2 * np.pi * y)])
    adj = run_adjoint(traj, TargetField(ud[None]))
    s = source_field(u0, ud, ctx)

    def rate(_, p):
        return (homogeneous_rate(p.reshape(u0.shape), u0, ctx) + s).ravel()

    ref = solve_ivp(rate, (0, grid.t_end), np.zeros(u0.size), method="DOP853", rtol=1e-11, atol=1e-14).y[:, -1]
    ref = ref.reshape(u0.shape)
    assert np.abs(adj.states[0] - ref).max() <= 1e-3 * np.abs(ref).max()


@settings(max_examples=5)
@given(st.integers(0, 1000))
def test_discrete_mode_gives_exact_initial_state_gradient(seed):
    grid, init, bathy, visc, traj = _scene(n=12, steps=8)
    target = constant_target(grid)
    adj = run_adjoint(traj, target, "discrete")
    grad = initial_state_gradient(traj, target, adj)
    d = np.random.default_rng(seed).normal(size=grad.shape)

    def j(u0):
        t = run_forward(ConservedState.from_array(u0), grid, bathy, visc, G, lf_speed=traj.ctx.lf_speed)
        return evaluate_j(t, target).j_total

    u0 = init.as_array()
    e = 1e-6
    fd = (j(u0 + e * d) - j(u0 - e * d)) / (2 * e)
    assert abs(fd - np.vdot(grad, d)) <= 1e-6 * abs(fd)


def test_modes_agree_better_on_finer_grids():
    diffs = []
    for n, steps in ((16, 8), (32, 16)):
        _, _, _, _, traj = _scene(n=n, steps=steps)
        target = constant_target(traj.grid)
        c = run_adjoint(traj, target, "continuous").states[0]
        d = run_adjoint(traj, target, "discrete").states[0]
        diffs.append(np.sqrt(np.mean((c - d) ** 2)) / np.sqrt(np.mean(d**2)))
    assert diffs[1] < diffs[0]


def test_thinned_trajectory_is_interpolated():
    grid, init, bathy, visc, full = _scene(steps=12)
    thin = run_forward(init, grid, bathy, visc, G, storage=3)
    target = constant_target(grid)
    a = run_adjoint(full, target).states
    b = run_adjoint(thin, target).states
    assert np.abs(a - b).max() <= 0.05 * np.abs(a).max()
    with pytest.raises(TrajectoryError):
        run_adjoint(thin, target, "discrete")


def test_time_dependent_target_aligns_with_steps():
    grid, init, bathy, visc, traj = _scene(steps=6)
    data = np.repeat(constant_target(grid).data, grid.n_steps + 1, axis=0)
    a = run_adjoint(traj, TargetField(data)).states
    b = run_adjoint(traj, constant_target(grid)).states
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ConfigError):
        run_adjoint(traj, TargetField(data[:3]))


def test_unknown_mode_is_rejected():
    *_, traj = _scene(steps=2)
    with pytest.raises(ConfigError):
        run_adjoint(traj, constant_target(traj.grid), "sideways")
