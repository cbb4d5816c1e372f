"""Scene builders and brute-force oracles shared by the tests."""

import numpy as np

from swetop.core import Bathymetry, ConservedState, TargetField, ViscosityParams, make_grid
from swetop.forward import max_stable_dt, run_forward

G = 9.81


def bump(grid, amp=0.1, sigma=0.1, center=(0.5, 0.5), h0=1.0):
    x, y = grid.centers()
    cx, cy = center[0] * grid.lx, center[1] * grid.ly
    return h0 + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))


def bump_scene(n, alpha, t_end=None, n_steps=None, frac=0.5, amp=0.1, sigma=0.1, flow=False, psi=None):
    """Gaussian bump on the unit square; dt is ``frac`` of the stability bound."""
    probe = make_grid(n, n, 1 / n, 1 / n, 1.0, 1.0)
    h = bump(probe, amp, sigma)
    x, y = probe.centers()
    q1 = 0.05 * np.sin(np.pi * x) * np.sin(np.pi * y) if flow else np.zeros_like(h)
    q2 = 0.03 * np.sin(2 * np.pi * x) * np.sin(np.pi * y) if flow else np.zeros_like(h)
    init = ConservedState(h, q1, q2)
    visc = ViscosityParams(alpha, alpha)
    dt = frac * max_stable_dt(init, probe, visc, G)
    if n_steps is not None:
        t_end = n_steps * dt
    grid = make_grid(n, n, 1 / n, 1 / n, t_end, dt)
    bathy = Bathymetry.flat(grid) if psi is None else Bathymetry.from_field(psi(x, y), grid)
    return grid, init, bathy, visc


def run_scene(n, alpha, **kw):
    grid, init, bathy, visc = bump_scene(n, alpha, **kw)
    return run_forward(init, grid, bathy, visc, G)


class StoredTrajectory:
    """Arbitrary levels on a grid; just enough of a trajectory for the objective."""

    def __init__(self, states, grid):
        self.states = states
        self.times = grid.times()
        self.grid = grid


def constant_target(grid, h=1.0):
    return TargetField.constant(grid, h, 0.0, 0.0)


def brute_force_j(states, times, target, dx, dy):
    """Objective by explicit loops: one-sided differences at walls, centred inside."""
    n_levels, _, nx, ny = states.shape
    series = []
    for k in range(n_levels):
        total = 0.0
        for i in range(nx):
            for j in range(ny):
                for c in range(3):
                    f = states[k, c]
                    if i == 0:
                        gx = (f[1, j] - f[0, j]) / dx
                    elif i == nx - 1:
                        gx = (f[i, j] - f[i - 1, j]) / dx
                    else:
                        gx = (f[i + 1, j] - f[i - 1, j]) / (2 * dx)
                    if j == 0:
                        gy = (f[i, 1] - f[i, 0]) / dy
                    elif j == ny - 1:
                        gy = (f[i, j] - f[i, j - 1]) / dy
                    else:
                        gy = (f[i, j + 1] - f[i, j - 1]) / (2 * dy)
                    d = f[i, j] - target[k, c, i, j]
                    total += (gx * gx + gy * gy + d * d) * dx * dy
        series.append(total)
    j = 0.0
    for k in range(n_levels - 1):
        j += 0.5 * (times[k + 1] - times[k]) * (series[k] + series[k + 1])
    return j
