import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swetop.core import (
    Bathymetry,
    ConfigError,
    ConservedState,
    DomainError,
    GridSpec,
    OutOfDomainError,
    PerturbationShape,
    TargetField,
    ViscosityParams,
    X_PARITY,
    gradient,
    gradient_T,
    interpolate,
    make_grid,
    pad,
    pad_T,
)


def test_make_grid_shrinks_step_to_divide_horizon():
    g = make_grid(8, 8, 1.0, 1.0, 1.0, 0.3, 9.81)
    assert g.dt == 0.25
    assert g.n_steps == 4


def test_make_grid_keeps_hint_that_divides():
    g = make_grid(3, 3, 0.5, 0.5, 2.0, 2.0, 9.81)
    assert g.dt == 2.0
    assert g.n_steps == 1


@pytest.mark.parametrize(
    "args",
    [(2, 8, 1.0, 1.0, 1.0, 0.1), (8, 2, 1.0, 1.0, 1.0, 0.1), (8, 8, 0.0, 1.0, 1.0, 0.1), (8, 8, 1.0, -1.0, 1.0, 0.1),
     (8, 8, 1.0, 1.0, 1.0, 0.0), (8, 8, 1.0, 1.0, -1.0, 0.1)],
)
def test_make_grid_rejects_bad_arguments(args):
    with pytest.raises(ConfigError):
        make_grid(*args)


@given(
    st.floats(1e-3, 100.0),
    st.floats(1e-4, 10.0),
)
def test_make_grid_step_count_is_exact(t_end, hint):
    g = make_grid(4, 4, 1.0, 1.0, t_end, hint)
    assert g.dt <= hint * (1 + 1e-12)
    assert g.n_steps * g.dt == g.t_end
    assert math.isclose(g.t_end, t_end, rel_tol=1e-12)


def test_grid_centres_and_times():
    g = make_grid(4, 3, 0.5, 2.0, 1.0, 0.25)
    x, y = g.centers()
    assert x.shape == (4, 3)
    assert x[0, 0] == 0.25 and y[0, 0] == 1.0
    assert g.lx == 2.0 and g.ly == 6.0
    np.testing.assert_allclose(g.times(), [0, 0.25, 0.5, 0.75, 1.0])


def test_gridspec_direct_validation():
    with pytest.raises(ConfigError):
        GridSpec(3, 3, 1.0, 1.0, 1.0, 0.0, 1)


def test_state_validation():
    z = np.zeros((4, 4))
    ConservedState(z + 1, z, z).validate()
    with pytest.raises(DomainError):
        ConservedState(z, z, z).validate()
    with pytest.raises(ConfigError):
        ConservedState(z + 1, np.zeros((3, 4)), z).validate()
    with pytest.raises(DomainError):
        ConservedState(z + np.nan, z, z).validate()


def test_constant_bathymetry_has_zero_slope():
    g = make_grid(5, 6, 0.3, 0.2, 1.0, 0.1)
    b = Bathymetry.from_field(np.full(g.shape, 2.5), g)
    assert not b.dpsi_dx.any() and not b.dpsi_dy.any()


def test_bathymetry_slopes_are_one_sided_at_walls():
    g = make_grid(5, 4, 0.5, 1.0, 1.0, 0.1)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=g.shape)
    b = Bathymetry.from_field(psi, g)
    assert b.dpsi_dx[0, 1] == (psi[1, 1] - psi[0, 1]) / 0.5
    assert b.dpsi_dx[2, 1] == (psi[3, 1] - psi[1, 1]) / 1.0
    assert b.dpsi_dy[1, -1] == (psi[1, -1] - psi[1, -2]) / 1.0


def test_viscosity_matrix_has_no_continuity_entry():
    v = ViscosityParams(0.2, 0.3)
    assert v.matrix()[0, 0] == 0.0
    np.testing.assert_array_equal(np.diag(v.matrix()), [0, 0.2, 0.3])
    with pytest.raises(ConfigError):
        ViscosityParams(-1.0, 0.0)


def test_target_broadcasts_single_level():
    g = make_grid(4, 4, 1.0, 1.0, 1.0, 0.5)
    t = TargetField.constant(g, 1.0, 2.0, 3.0)
    assert t.at(7)[1, 0, 0] == 2.0
    assert t.shape == (4, 4)


def test_perturbation_volume_and_interior():
    g = make_grid(32, 32, 1 / 32, 1 / 32, 1.0, 0.1)
    s = PerturbationShape((0.5, 0.5), 0.1)
    assert s.reference_area == math.pi
    assert math.isclose(s.volume, 0.01 * math.pi)
    s.check_interior(g)
    with pytest.raises(OutOfDomainError):
        PerturbationShape((0.05, 0.5), 0.1).check_interior(g)
    # covered area approaches the disk area
    assert abs(s.covered_area(g) - s.volume) / s.volume < 0.1
    with pytest.raises(ConfigError):
        PerturbationShape((0.5, 0.5), 0.0)


@given(st.integers(0, 10_000), st.sampled_from([0, 1]))
def test_pad_transpose(seed, axis):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 5, 4))
    sign = X_PARITY[:, None, None]
    b = rng.normal(size=pad(a, axis + 1, sign).shape)
    assert math.isclose(np.vdot(pad(a, axis + 1, sign), b), np.vdot(a, pad_T(b, axis + 1, sign)), rel_tol=1e-12, abs_tol=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([0, 1]), st.integers(3, 7))
def test_gradient_transpose(seed, axis, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n + 1))
    b = rng.normal(size=a.shape)
    lhs = np.vdot(gradient(a, 0.3, axis), b)
    rhs = np.vdot(a, gradient_T(b, 0.3, axis))
    assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.6, 3.4), st.floats(0.6, 2.4))
def test_bilinear_interpolation_is_exact_for_linear_fields(a, b, x0, y0):
    g = make_grid(8, 6, 0.5, 0.5, 1.0, 0.1)
    x, y = g.centers()
    f = 1.0 + a * x + b * y
    assert math.isclose(interpolate(f, g, x0, y0), 1.0 + a * x0 + b * y0, rel_tol=1e-12, abs_tol=1e-12)
