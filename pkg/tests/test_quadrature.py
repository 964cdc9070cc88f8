"""Quadrature oracles: every closed form is checked against an independent
computation (analytic antiderivative or adaptive scipy quadrature)."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nlparab.quadrature import (
    SPHERE_MEASURE,
    cell_weight_1d,
    central_second_moment_1d,
    central_second_moment_2d,
    clipped_cell_weight_1d,
    far_mass,
    far_mass_1d,
    far_mass_2d,
    power_integral_1d,
    square_angle_factor,
    sup_on_window,
    tensor_gauss_2d,
    trapezoid_partial,
)


def test_sphere_measure():
    assert SPHERE_MEASURE[1] == 2.0
    assert SPHERE_MEASURE[2] == pytest.approx(2.0 * np.pi, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.5, 1.99])
def test_power_integral_matches_quad(alpha):
    lo, hi = 0.25, 3.0
    ref = quad(lambda s: s ** (-1.0 - alpha), lo, hi)[0]
    assert power_integral_1d(lo, hi, alpha) == pytest.approx(ref, rel=1e-10)


def test_power_integral_infinite_upper():
    # lo^-alpha / alpha with alpha = 1, lo = 2.
    assert power_integral_1d(2.0, np.inf, 1.0) == pytest.approx(0.5, rel=1e-15)


def test_power_integral_vectorized():
    lo = np.array([0.5, 1.0, 2.0])
    out = power_integral_1d(lo, 4.0, 1.0)
    assert out == pytest.approx((1.0 / lo - 0.25) / 1.0, rel=1e-14)


def test_power_integral_rejects_nonpositive_lower():
    with pytest.raises(ValueError):
        power_integral_1d(0.0, 1.0, 1.0)


@given(
    lo=st.floats(0.05, 2.0),
    mid_frac=st.floats(0.1, 0.9),
    hi=st.floats(2.5, 10.0),
    alpha=st.floats(0.2, 1.95),
)
def test_power_integral_additive_in_interval(lo, mid_frac, hi, alpha):
    mid = lo + mid_frac * (hi - lo)
    whole = power_integral_1d(lo, hi, alpha)
    parts = power_integral_1d(lo, mid, alpha) + power_integral_1d(mid, hi, alpha)
    assert parts == pytest.approx(whole, rel=1e-11)


def test_cell_weight_matches_quad():
    h, r, alpha = 0.1, 0.3, 1.3
    ref = quad(lambda s: abs(s) ** (-1.0 - alpha), r - h / 2, r + h / 2)[0]
    assert cell_weight_1d(r, h, alpha) == pytest.approx(ref, rel=1e-10)


def test_clipped_cell_weight_cases():
    alpha = 1.0
    # Full containment reduces to the plain integral.
    full = clipped_cell_weight_1d(1.0, 2.0, 0.5, 3.0, alpha)
    assert full == pytest.approx(power_integral_1d(1.0, 2.0, alpha), rel=1e-14)
    # Partial overlap clips to the intersection.
    part = clipped_cell_weight_1d(1.0, 2.0, 1.5, 3.0, alpha)
    assert part == pytest.approx(power_integral_1d(1.5, 2.0, alpha), rel=1e-14)
    # Empty intersection is exactly zero, no division error.
    assert clipped_cell_weight_1d(1.0, 2.0, 2.5, 3.0, alpha) == 0.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.7])
def test_central_second_moment_1d_matches_quad(alpha):
    h = 0.25
    ref = 2.0 * quad(lambda s: s * s * s ** (-1.0 - alpha), 0.0, h / 2)[0]
    assert central_second_moment_1d(h, alpha) == pytest.approx(ref, rel=1e-10)


def test_square_angle_factor_exact_values():
    # alpha = 2: integrand is 1, so J = pi/4. alpha = 1: integral of sec is
    # log(1 + sqrt 2) on [0, pi/4].
    assert square_angle_factor(2.0) == pytest.approx(np.pi / 4.0, rel=1e-13)
    assert square_angle_factor(1.0) == pytest.approx(np.log(1.0 + np.sqrt(2.0)), rel=1e-13)


@pytest.mark.parametrize("alpha", [0.4, 1.2, 1.9])
def test_square_angle_factor_matches_quad(alpha):
    ref = quad(lambda th: np.cos(th) ** (alpha - 2.0), 0.0, np.pi / 4.0)[0]
    assert square_angle_factor(alpha) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_central_second_moment_2d_polar_oracle(alpha):
    # Independent derivation: by symmetry the target is half of the integral
    # of |s|^(-alpha) over the square, computed in polar coordinates as
    # 8 * int_0^{pi/4} ((h/2)/cos th)^(2-alpha) / (2-alpha) dth.
    h = 0.2
    c = h / 2.0
    ref = 0.5 * 8.0 * quad(
        lambda th: (c / np.cos(th)) ** (2.0 - alpha) / (2.0 - alpha), 0.0, np.pi / 4.0
    )[0]
    assert central_second_moment_2d(h, alpha) == pytest.approx(ref, rel=1e-10)


def test_tensor_gauss_weights_and_exactness():
    h = 0.3
    pts, wts = tensor_gauss_2d(6, h)
    assert wts.sum() == pytest.approx(h * h, rel=1e-13)
    # x^2 y^2 over the cell: (h^3/12)^2 / h^2 pattern from the 1D moments.
    val = float(np.sum(wts * pts[:, 0] ** 2 * pts[:, 1] ** 2))
    exact = ((h / 2.0) ** 3 * 2.0 / 3.0) ** 2
    assert val == pytest.approx(exact, rel=1e-12)


def test_far_mass_1d_closed_form():
    # Centered: 2 T^-alpha / alpha. Off-center: the two one-sided pieces.
    assert far_mass_1d(0.0, 2.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    x, T, alpha = 0.7, 2.0, 1.4
    ref = ((T - x) ** -alpha + (T + x) ** -alpha) / alpha
    assert far_mass_1d(x, T, alpha) == pytest.approx(ref, rel=1e-14)


def test_far_mass_1d_rejects_exterior_point():
    with pytest.raises(ValueError):
        far_mass_1d(2.0, 2.0, 1.0)


def test_far_mass_2d_centered_exact():
    # alpha = 1, T = 1: 2 pi * int_1^inf r^-3 r dr = 2 pi.
    assert far_mass_2d(np.zeros((1, 2)), 1.0, 1.0) == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_far_mass_2d_offcenter_spectral():
    x = np.array([[0.6, 0.3]])
    coarse = far_mass_2d(x, 1.5, 1.2, n_theta=64)
    fine = far_mass_2d(x, 1.5, 1.2, n_theta=256)
    assert coarse == pytest.approx(fine, rel=1e-10)


def test_far_mass_dispatch():
    assert far_mass(np.array([0.0]), 2.0, 1, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert far_mass(np.zeros((1, 2)), 1.0, 2, 1.0) == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_trapezoid_partial_exact_on_linear():
    times = np.linspace(0.0, 2.0, 9)
    values = 3.0 * times - 1.0
    a, b = 0.3, 1.7
    exact = 1.5 * (b * b - a * a) - (b - a)
    assert trapezoid_partial(times, values, a, b) == pytest.approx(exact, rel=1e-13)


def test_trapezoid_partial_window_checks():
    times = np.array([0.0, 1.0])
    values = np.array([1.0, 1.0])
    assert trapezoid_partial(times, values, 0.5, 0.5) == 0.0
    with pytest.raises(ValueError):
        trapezoid_partial(times, values, 0.5, 1.5)
    with pytest.raises(ValueError):
        trapezoid_partial(times, values, 0.8, 0.2)


def test_sup_on_window_interpolates_endpoints():
    times = np.array([0.0, 1.0, 2.0])
    values = np.array([0.0, 2.0, 0.0])
    # Node inside the window dominates.
    assert sup_on_window(times, values, 0.5, 1.5) == 2.0
    # No node inside: the larger interpolated endpoint wins.
    assert sup_on_window(times, values, 0.25, 0.75) == pytest.approx(1.5, rel=1e-14)
