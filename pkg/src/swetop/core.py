"""Grid, field containers and shared numerical helpers.

Fields are stored cell-centred as arrays of shape ``(nx, ny)``; index ``i``
runs along x and ``j`` along y. Cell ``(i, j)`` has centre
``((i + 0.5) dx, (j + 0.5) dy)`` so the domain is ``[0, nx dx] x [0, ny dy]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

H_MIN = 1.0e-6


class SweError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SweError, ValueError):
    pass


class DomainError(SweError, ValueError):
    """A pointwise operator was evaluated outside its domain (h below the floor)."""


class StabilityError(SweError):
    pass


class BlowUpError(SweError):
    pass


class TrajectoryError(SweError):
    pass


class OutOfDomainError(SweError, ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    dx: float
    dy: float
    t_end: float
    dt: float
    n_steps: int
    g: float = 9.81

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigError(f"grid must be at least 3x3, got {self.nx}x{self.ny}")
        for name in ("dx", "dy", "dt", "g"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def lx(self) -> float:
        return self.nx * self.dx

    @property
    def ly(self) -> float:
        return self.ny * self.dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(nx, ny)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def make_grid(nx, ny, dx, dy, t_end, dt_hint, g=9.81) -> GridSpec:
    """Build a grid whose step count is an integer.

    ``dt`` is the largest value not above ``dt_hint`` that divides ``t_end``
    into whole steps; ``t_end`` is then reset to ``n_steps * dt`` so the
    identity holds in floating point too.
    """
    if nx < 3 or ny < 3:
        raise ConfigError(f"grid must be at least 3x3, got {nx}x{ny}")
    for name, val in (("dx", dx), ("dy", dy), ("dt_hint", dt_hint), ("g", g)):
        if not val > 0:
            raise ConfigError(f"{name} must be positive, got {val}")
    if t_end < 0:
        raise ConfigError(f"t_end must be non-negative, got {t_end}")
    if t_end == 0:
        return GridSpec(int(nx), int(ny), float(dx), float(dy), 0.0, float(dt_hint), 0, float(g))
    n_steps = math.ceil(t_end / dt_hint - 1e-12)
    n_steps = max(n_steps, 1)
    dt = t_end / n_steps
    return GridSpec(int(nx), int(ny), float(dx), float(dy), n_steps * dt, dt, n_steps, float(g))


@dataclass(frozen=True)
class ConservedState:
    h: np.ndarray
    q1: np.ndarray
    q2: np.ndarray

    @classmethod
    def from_array(cls, u: np.ndarray) -> "ConservedState":
        return cls(u[0], u[1], u[2])

    def as_array(self) -> np.ndarray:
        return np.stack([self.h, self.q1, self.q2])

    def validate(self, grid: GridSpec | None = None, h_min: float = H_MIN) -> None:
        shapes = {np.shape(self.h), np.shape(self.q1), np.shape(self.q2)}
        if len(shapes) != 1:
            raise ConfigError(f"field shapes differ: {shapes}")
        if grid is not None and shapes.pop() != grid.shape:
            raise ConfigError(f"fields do not match grid shape {grid.shape}")
        if not np.all(np.isfinite(self.as_array())):
            raise DomainError("state contains non-finite values")
        if np.min(self.h) < h_min:
            raise DomainError(f"h below floor {h_min}: min h = {np.min(self.h)}")


@dataclass(frozen=True)
class AdjointState:
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    @classmethod
    def from_array(cls, p: np.ndarray) -> "AdjointState":
        return cls(p[0], p[1], p[2])

    def as_array(self) -> np.ndarray:
        return np.stack([self.p1, self.p2, self.p3])


@dataclass(frozen=True)
class Bathymetry:
    psi: np.ndarray
    dpsi_dx: np.ndarray
    dpsi_dy: np.ndarray

    @classmethod
    def from_field(cls, psi: np.ndarray, grid: GridSpec) -> "Bathymetry":
        psi = np.asarray(psi, dtype=float)
        if psi.shape != grid.shape:
            raise ConfigError(f"bathymetry shape {psi.shape} != grid {grid.shape}")
        return cls(psi, gradient(psi, grid.dx, 0), gradient(psi, grid.dy, 1))

    @classmethod
    def flat(cls, grid: GridSpec) -> "Bathymetry":
        return cls.from_field(np.zeros(grid.shape), grid)


@dataclass(frozen=True)
class TargetField:
    """Target ``U_d``; ``data`` has shape ``(n_levels, 3, nx, ny)``.

    A single level is broadcast over time.
    """

    data: np.ndarray

    @classmethod
    def constant(cls, grid: GridSpec, h=0.0, q1=0.0, q2=0.0) -> "TargetField":
        d = np.empty((1, 3) + grid.shape)
        d[0, 0], d[0, 1], d[0, 2] = h, q1, q2
        return cls(d)

    @classmethod
    def from_state(cls, state: ConservedState) -> "TargetField":
        return cls(state.as_array()[None].copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[-2:]

    def at(self, level: int) -> np.ndarray:
        if self.data.shape[0] == 1:
            return self.data[0]
        return self.data[level]


@dataclass(frozen=True)
class ViscosityParams:
    alpha1: float = 0.0
    alpha2: float = 0.0
    # 1 where the viscous operator is active, 0 inside a hole; None means active everywhere
    mask: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ConfigError("viscosity coefficients must be non-negative")

    @property
    def q_diag(self) -> np.ndarray:
        return np.array([0.0, self.alpha1, self.alpha2])

    def matrix(self) -> np.ndarray:
        return np.diag(self.q_diag)

    @property
    def max_alpha(self) -> float:
        return max(self.alpha1, self.alpha2)

    def with_mask(self, mask: np.ndarray | None) -> "ViscosityParams":
        return ViscosityParams(self.alpha1, self.alpha2, mask)


@dataclass(frozen=True)
class PerturbationShape:
    """Disk-shaped inclusion ``x0 + eps * omega`` with ``omega`` a disk of radius ``radius``."""

    center: tuple[float, float]
    epsilon: float
    radius: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.radius > 0:
            raise ConfigError("reference radius must be positive")

    @property
    def reference_area(self) -> float:
        return math.pi * self.radius**2

    @property
    def volume(self) -> float:
        return self.epsilon**2 * self.reference_area

    @property
    def physical_radius(self) -> float:
        return self.epsilon * self.radius

    def cell_mask(self, grid: GridSpec) -> np.ndarray:
        """Boolean mask of cells whose centres lie in the inclusion."""
        x, y = grid.centers()
        r2 = (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
        return r2 < self.physical_radius**2

    def check_interior(self, grid: GridSpec) -> None:
        x0, y0 = self.center
        r = self.physical_radius
        if x0 - r <= 0 or y0 - r <= 0 or x0 + r >= grid.lx or y0 + r >= grid.ly:
            raise OutOfDomainError(f"inclusion at {self.center} with radius {r} touches the boundary")

    def covered_area(self, grid: GridSpec) -> float:
        return float(np.count_nonzero(self.cell_mask(grid))) * grid.cell_area


# ---------------------------------------------------------------------------
# stencil helpers shared by the solvers

# mirror parity of (h, q1, q2) across x- and y-walls: normal discharge is odd
X_PARITY = np.array([1.0, -1.0, 1.0])
Y_PARITY = np.array([1.0, 1.0, -1.0])


def pad(a: np.ndarray, axis: int, sign=1.0) -> np.ndarray:
    """Add one mirrored ghost cell at both ends of ``axis``.

    ``sign`` broadcasts against the ghost slab, so a per-channel parity of
    shape ``(3, 1)`` works for stacked ``(3, nx, ny)`` arrays.
    """
    lo = np.take(a, [0], axis=axis) * sign
    hi = np.take(a, [-1], axis=axis) * sign
    return np.concatenate([lo, a, hi], axis=axis)


def pad_T(b: np.ndarray, axis: int, sign=1.0) -> np.ndarray:
    """Transpose of :func:`pad`: fold ghost values back onto the edge cells."""
    n = b.shape[axis]
    out = np.take(b, np.arange(1, n - 1), axis=axis).copy()
    first = [slice(None)] * b.ndim
    last = [slice(None)] * b.ndim
    first[axis] = slice(0, 1)
    last[axis] = slice(-1, None)
    out[tuple(first)] += np.take(b, [0], axis=axis) * sign
    out[tuple(last)] += np.take(b, [-1], axis=axis) * sign
    return out


def gradient(a: np.ndarray, d: float, axis: int) -> np.ndarray:
    """Centred difference inside, first-order one-sided at the two ends."""
    return np.gradient(a, d, axis=axis, edge_order=1)


def gradient_T(b: np.ndarray, d: float, axis: int) -> np.ndarray:
    """Transpose of :func:`gradient` along ``axis``."""
    b = np.moveaxis(b, axis, 0)
    out = np.zeros_like(b)
    # interior rows: (a[k+1] - a[k-1]) / 2d
    out[2:] += b[1:-1] / (2 * d)
    out[:-2] -= b[1:-1] / (2 * d)
    # one-sided ends
    out[1] += b[0] / d
    out[0] -= b[0] / d
    out[-1] += b[-1] / d
    out[-2] -= b[-1] / d
    return np.moveaxis(out, 0, axis)


def mirror_laplacian(u: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """5-point Laplacian of a stacked ``(3, nx, ny)`` field with reflective ghosts."""
    px = pad(u, 1, X_PARITY[:, None, None])
    py = pad(u, 2, Y_PARITY[:, None, None])
    return (px[:, 2:] - 2 * u + px[:, :-2]) / dx**2 + (py[:, :, 2:] - 2 * u + py[:, :, :-2]) / dy**2


def bilinear_weights(grid: GridSpec, x0: float, y0: float):
    """Indices and weights for bilinear interpolation between cell centres."""
    fx = x0 / grid.dx - 0.5
    fy = y0 / grid.dy - 0.5
    i = int(np.clip(np.floor(fx), 0, grid.nx - 2))
    j = int(np.clip(np.floor(fy), 0, grid.ny - 2))
    tx = fx - i
    ty = fy - j
    return i, j, ((1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty)


def interpolate(field: np.ndarray, grid: GridSpec, x0: float, y0: float) -> np.ndarray:
    """Bilinear interpolation of ``field[..., nx, ny]`` at ``(x0, y0)``."""
    i, j, (w00, w10, w01, w11) = bilinear_weights(grid, x0, y0)
    return (
        w00 * field[..., i, j]
        + w10 * field[..., i + 1, j]
        + w01 * field[..., i, j + 1]
        + w11 * field[..., i + 1, j + 1]
    )
