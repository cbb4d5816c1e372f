"""Pointwise algebra of the viscous shallow water operators.

Every function broadcasts: the fields of :class:`CellState` may be scalars or
arrays of any common shape, and results carry the matrix/vector axes first.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import H_MIN, DomainError


class CellState(NamedTuple):
    h: float | np.ndarray
    q1: float | np.ndarray
    q2: float | np.ndarray


def _check(c: CellState, h_min: float = H_MIN) -> None:
    if np.any(np.asarray(c.h) < h_min):
        raise DomainError(f"h below floor {h_min}")


def flux(c: CellState, g: float) -> np.ndarray:
    """Flux tensor ``F(U)``, shape ``(3, 2, ...)``; column 0 is the x-flux."""
    _check(c)
    h, q1, q2 = (np.asarray(v, dtype=float) for v in c)
    p = 0.5 * g * h * h
    return np.array(
        [
            [q1, q2],
            [q1 * q1 / h + p, q1 * q2 / h],
            [q1 * q2 / h, q2 * q2 / h + p],
        ]
    )


def source(c: CellState, dpsi, g: float) -> np.ndarray:
    """Bottom-slope source ``S(U) = (0, -g h psi_x, -g h psi_y)``."""
    _check(c)
    h = np.asarray(c.h, dtype=float)
    return np.array([np.zeros_like(h), -g * h * dpsi[0], -g * h * dpsi[1]])


def flux_jacobians(c: CellState, g: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``dF_x/dU`` and ``dF_y/dU``, each of shape ``(3, 3, ...)``."""
    _check(c)
    h, q1, q2 = (np.asarray(v, dtype=float) for v in c)
    u = q1 / h
    v = q2 / h
    z = np.zeros_like(h)
    o = np.ones_like(h)
    jx = np.array(
        [
            [z, o, z],
            [g * h - u * u, 2 * u, z],
            [-u * v, v, u],
        ]
    )
    jy = np.array(
        [
            [z, z, o],
            [-u * v, v, u],
            [g * h - v * v, z, 2 * v],
        ]
    )
    return jx, jy


def divergence_form(c: CellState, grad: np.ndarray, g: float) -> np.ndarray:
    """``div F(U)`` written through the chain rule at a frozen state.

    ``grad`` is the ``(3, 2, ...)`` Jacobian of ``U``; the result
    ``(dF_x/dU) grad[:, 0] + (dF_y/dU) grad[:, 1]`` is affine (in fact
    linear) in ``grad``.
    """
    jx, jy = flux_jacobians(c, g)
    return np.einsum("ij...,j...->i...", jx, grad[:, 0]) + np.einsum("ij...,j...->i...", jy, grad[:, 1])


def adjoint_matrices(c: CellState, dpsi, g: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient matrices ``A, B, C`` of the adjoint system.

    ``A = -(dF_x/dU)^T`` and ``B = -(dF_y/dU)^T``; ``C`` carries the
    linearised bottom-slope source.
    """
    _check(c)
    h, q1, q2 = (np.asarray(v, dtype=float) for v in c)
    z = np.zeros_like(h)
    o = np.ones_like(h)
    a = np.array(
        [
            [z, q1 * q1 / (h * h) - g * h, q1 * q2 / (h * h)],
            [-o, -2 * q1 / h, -q2 / h],
            [z, z, -q1 / h],
        ]
    )
    b = np.array(
        [
            [z, q1 * q2 / (h * h), q2 * q2 / (h * h) - g * h],
            [z, -q2 / h, z],
            [-o, -q1 / h, -2 * q2 / h],
        ]
    )
    gx = g * np.asarray(dpsi[0], dtype=float) * o
    gy = g * np.asarray(dpsi[1], dtype=float) * o
    cm = np.array([[z, gx, gy], [z, z, z], [z, z, z]])
    return a, b, cm


def adjoint_source(c: CellState, lap, target) -> np.ndarray:
    """Adjoint right-hand side ``2 lap(U) - 2 (U - U_d)``, componentwise.

    Channel ``k`` pairs the Laplacian of state channel ``k`` with target
    channel ``k``: ``(h, u_1d)``, ``(q1, u_2d)``, ``(q2, u_3d)``.
    """
    state = np.array([np.asarray(v, dtype=float) for v in c])
    return 2 * np.asarray(lap, dtype=float) - 2 * (state - np.asarray(target, dtype=float))
