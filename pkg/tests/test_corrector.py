import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swetop.core import ConfigError
from swetop.corrector import (
    closed_form_corrector,
    solve_corrector_numeric,
    viscous_projection,
    weak_residual,
)

G = np.array([[0.3, -0.2], [1.0, 0.5], [-0.7, 0.25]])


def _interior(field, h):
    r = np.hypot(field.points[:, 0], field.points[:, 1])
    return r < 1.0 - 2 * h


@pytest.fixture(scope="module")
def numeric():
    return solve_corrector_numeric(G, patch_radius=5.0, resolution=128)


def test_zero_gradient_gives_zero_corrector():
    f = closed_form_corrector(np.zeros((3, 2)))
    assert not f.k.any() and not f.grad_k.any()
    n = solve_corrector_numeric(np.zeros((3, 2)), resolution=32)
    assert not n.k.any() and not n.grad_k.any()


def test_closed_form_matches_gradient_inside_and_vanishes_outside():
    f = closed_form_corrector(G)
    pg = viscous_projection(G)
    assert np.all(f.grad_k[:, :, f.inside] == pg[:, :, None])
    assert not f.grad_k[:, :, ~f.inside].any()
    assert not f.grad_k[0].any()


def _smooth_test_gradients(rng, pts, m):
    # gradients of sum a sin(b.x + c) with random a, b, c per channel
    x, y = pts[:, 0], pts[:, 1]
    out = np.zeros((m, 3, 2, len(pts)))
    for i in range(m):
        a, c = rng.normal(size=(2, 3))
        b = rng.normal(size=(3, 2))
        phase = b[:, :1] * x + b[:, 1:] * y + c[:, None]
        out[i] = a[:, None, None] * np.cos(phase)[:, None, :] * b[:, :, None]
    return out


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_closed_form_satisfies_weak_identity(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(3, 2))
    f = closed_form_corrector(g)
    res = weak_residual(f, g, _smooth_test_gradients(rng, f.points, 50))
    assert np.abs(res).max() <= 1e-12


def test_closed_form_satisfies_weak_identity_for_polynomials():
    f = closed_form_corrector(G)
    x, y = f.points[:, 0], f.points[:, 1]
    grads = []
    for a in range(4):
        for b in range(4 - a):
            gx = a * x ** max(a - 1, 0) * y**b
            gy = b * x**a * y ** max(b - 1, 0)
            for c in range(3):
                t = np.zeros((3, 2, len(x)))
                t[c] = gx, gy
                grads.append(t)
    assert np.abs(weak_residual(f, G, np.array(grads))).max() <= 1e-12


def test_numeric_solve_matches_closed_form_inside(numeric):
    h = 10.0 / 128
    inner = _interior(numeric, h)
    dev = np.abs(numeric.grad_k[:, :, inner] - viscous_projection(G)[:, :, None]).max()
    assert dev <= 1e-2
    assert numeric.galerkin_residual <= 1e-10
    assert not numeric.grad_k[0].any()


def test_doubling_the_patch_barely_moves_the_interior_gradient(numeric):
    big = solve_corrector_numeric(G, patch_radius=10.0, resolution=128)
    a = numeric.grad_k[:, :, _interior(numeric, 10.0 / 128)].mean(axis=2)
    b = big.grad_k[:, :, _interior(big, 20.0 / 128)].mean(axis=2)
    assert np.abs(a - b).max() <= 1e-3 * np.abs(a).max()


def test_pinning_choice_does_not_matter():
    a = solve_corrector_numeric(G, resolution=48, pin="mean")
    b = solve_corrector_numeric(G, resolution=48, pin="node")
    assert np.abs(a.grad_k - b.grad_k).max() <= 1e-5


def test_numeric_solve_is_linear_in_gradient():
    rng = np.random.default_rng(4)
    g1, g2 = rng.normal(size=(2, 3, 2))
    a = solve_corrector_numeric(g1, resolution=32).grad_k
    b = solve_corrector_numeric(g2, resolution=32).grad_k
    c = solve_corrector_numeric(2 * g1 - g2, resolution=32).grad_k
    assert np.abs(c - 2 * a + b).max() <= 1e-9 * np.abs(c).max()


def test_channels_without_viscosity_are_ignored():
    f = closed_form_corrector(G, q_diag=[0.0, 1.0, 0.0])
    assert not f.grad_k[0].any() and not f.grad_k[2].any()


@pytest.mark.parametrize("kwargs", [{"patch_radius": 2.0}, {"resolution": 4}, {"pin": "corner"}])
def test_bad_patch_settings(kwargs):
    with pytest.raises(ConfigError):
        solve_corrector_numeric(G, **kwargs)
