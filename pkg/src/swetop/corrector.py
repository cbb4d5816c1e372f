"""Local corrector problem on the reference inclusion.

The weak identity only constrains ``Q (grad K - G)`` inside the unit
inclusion, so the canonical corrector matches gradients there and is flat
outside. A bilinear finite-element solve on a truncated disk is provided to
check that choice: outside the inclusion the coefficient is replaced by a tiny
positive value, which makes the problem well posed without changing the
interior gradient beyond that value's order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ConfigError, SweError

DEFAULT_Q = np.array([0.0, 1.0, 1.0])

# element stiffness of the Laplacian on a square bilinear element, nodes ordered
# (0,0), (1,0), (1,1), (0,1); independent of the element size in 2D
_KE = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0
# integral of each basis gradient over an element of size h, divided by h
_GRAD_INT = 0.5 * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


class SingularSystemError(SweError):
    pass


@dataclass(frozen=True)
class CorrectorField:
    """Corrector sampled at reference points ``points`` of shape ``(n, 2)``.

    ``k`` has shape ``(3, n)`` and ``grad_k`` shape ``(3, 2, n)``. ``inside``
    marks points in the reference inclusion; ``weights`` are quadrature
    weights attached to the points (element areas for the numeric solver).
    ``galerkin_residual`` is the relative residual of the assembled system.
    """

    points: np.ndarray
    k: np.ndarray
    grad_k: np.ndarray
    inside: np.ndarray
    weights: np.ndarray
    galerkin_residual: float = 0.0


def viscous_projection(g: np.ndarray, q_diag=None) -> np.ndarray:
    """Keep the rows of a ``(3, 2)`` gradient that carry viscosity."""
    q = DEFAULT_Q if q_diag is None else np.asarray(q_diag, dtype=float)
    return np.where((q > 0)[:, None], np.asarray(g, dtype=float), 0.0)


def patch_points(radius: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell centres of an ``n x n`` grid on ``[-R, R]^2`` and their area."""
    h = 2 * radius / n
    c = -radius + (np.arange(n) + 0.5) * h
    x, y = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel()]), np.full(n * n, h * h)


def closed_form_corrector(g, q_diag=None, radius: float = 1.0, points=None, weights=None) -> CorrectorField:
    """Gradient-matching corrector ``grad K = P G`` in the inclusion, zero outside.

    ``P`` keeps the viscous rows of ``G``. ``K`` is ``P G x`` inside and 0
    outside; only ``grad_k`` enters the sensitivity formulas.
    """
    if points is None:
        points, weights = patch_points(3.0 * radius, 96)
    points = np.asarray(points, dtype=float)
    if weights is None:
        weights = np.ones(len(points))
    pg = viscous_projection(g, q_diag)
    inside = np.hypot(points[:, 0], points[:, 1]) < radius
    grad_k = np.where(inside, pg[:, :, None], 0.0)
    k = np.where(inside, pg @ points.T, 0.0)
    return CorrectorField(points, k, grad_k, inside, np.asarray(weights, dtype=float))


def weak_residual(field: CorrectorField, g, test_grads: np.ndarray, q_diag=None) -> np.ndarray:
    """``sum over omega of Q (grad K - G) : grad psi`` for each test function.

    ``test_grads`` has shape ``(m, 3, 2, n)``: gradients of ``m`` vector test
    functions at the field's points. Quadrature uses the field's weights.
    """
    q = DEFAULT_Q if q_diag is None else np.asarray(q_diag, dtype=float)
    diff = field.grad_k - np.asarray(g, dtype=float)[:, :, None]
    w = field.weights * field.inside
    return np.einsum("c,cdn,mcdn,n->m", q, diff, test_grads, w)


class _Patch:
    """Bilinear mesh of ``[-R, R]^2`` restricted to elements centred in ``B_R``."""

    def __init__(self, radius: float, n: int, inclusion_radius: float):
        self.h = 2 * radius / n
        self.n = n
        centres, _ = patch_points(radius, n)
        ei, ej = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        keep = np.hypot(centres[:, 0], centres[:, 1]) < radius
        self.centres = centres[keep]
        ei, ej = ei.ravel()[keep], ej.ravel()[keep]
        node = lambda i, j: i * (n + 1) + j  # noqa: E731
        conn = np.stack([node(ei, ej), node(ei + 1, ej), node(ei + 1, ej + 1), node(ei, ej + 1)], axis=1)
        used, self.conn = np.unique(conn, return_inverse=True)
        self.conn = self.conn.reshape(conn.shape)
        self.n_nodes = len(used)
        self.inside = np.hypot(self.centres[:, 0], self.centres[:, 1]) < inclusion_radius

    def stiffness(self, coef: np.ndarray) -> sp.csr_matrix:
        rows = np.repeat(self.conn, 4, axis=1).ravel()
        cols = np.tile(self.conn, (1, 4)).ravel()
        vals = (coef[:, None, None] * _KE[None]).ravel()
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n_nodes, self.n_nodes)).tocsr()

    def load(self, gvec: np.ndarray) -> np.ndarray:
        """``sum over inclusion elements of gvec . grad phi_a``."""
        contrib = self.h * (_GRAD_INT @ gvec)
        out = np.zeros(self.n_nodes)
        np.add.at(out, self.conn[self.inside], np.broadcast_to(contrib, (int(self.inside.sum()), 4)))
        return out

    def element_gradients(self, k: np.ndarray) -> np.ndarray:
        """Gradient of the bilinear interpolant at each element centre, ``(2, n_elem)``."""
        v = k[self.conn]
        gx = 0.5 * ((v[:, 1] - v[:, 0]) + (v[:, 2] - v[:, 3])) / self.h
        gy = 0.5 * ((v[:, 3] - v[:, 0]) + (v[:, 2] - v[:, 1])) / self.h
        return np.stack([gx, gy])


def solve_corrector_numeric(
    g,
    q_diag=None,
    patch_radius: float = 5.0,
    resolution: int = 128,
    inclusion_radius: float = 1.0,
    exterior: float = 1e-6,
    pin: str = "mean",
) -> CorrectorField:
    """Galerkin solve of the corrector identity on ``B_R`` with a natural outer boundary.

    Each viscous channel is a scalar problem whose coefficient is 1 inside
    the inclusion and ``exterior`` outside (the viscosity cancels). The
    constant is pinned by zero nodal mean (``pin="mean"``) or by fixing the
    first node (``pin="node"``).
    """
    if patch_radius < 3 * inclusion_radius:
        raise ConfigError("patch radius must be at least three inclusion radii")
    if resolution < 8:
        raise ConfigError("patch resolution too small")
    if pin not in ("mean", "node"):
        raise ConfigError(f"unknown pin {pin!r}")
    g = np.asarray(g, dtype=float)
    q = DEFAULT_Q if q_diag is None else np.asarray(q_diag, dtype=float)
    mesh = _Patch(patch_radius, resolution, inclusion_radius)
    coef = np.where(mesh.inside, 1.0, exterior)
    stiff = mesh.stiffness(coef)
    nn = mesh.n_nodes
    if pin == "mean":
        ones = sp.csr_matrix(np.ones((1, nn)))
        system = sp.bmat([[stiff, ones.T], [ones, None]], format="csc")
    else:
        system = stiff.tolil()
        system[0, :] = 0
        system[0, 0] = 1.0
        system = system.tocsc()
    lu = spla.splu(system)

    k_nodes = np.zeros((3, nn))
    grad_k = np.zeros((3, 2, len(mesh.centres)))
    worst = 0.0
    for c in range(3):
        if q[c] <= 0 or not np.any(g[c]):
            continue
        rhs = mesh.load(g[c])
        if pin == "mean":
            sol = lu.solve(np.append(rhs, 0.0))[:nn]
        else:
            rhs[0] = 0.0
            sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError("corrector system is singular")
        if pin == "node":
            sol -= sol.mean()
        load = mesh.load(g[c])
        worst = max(worst, float(np.abs(stiff @ sol - load).max() / np.abs(load).max()))
        k_nodes[c] = sol
        grad_k[c] = mesh.element_gradients(sol)

    k_elem = k_nodes[:, mesh.conn].mean(axis=2)
    weights = np.full(len(mesh.centres), mesh.h**2)
    return CorrectorField(mesh.centres, k_elem, grad_k, mesh.inside, weights, worst)
