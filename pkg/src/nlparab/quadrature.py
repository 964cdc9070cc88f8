"""Closed-form and fixed-rule quadrature for power-law jump kernels.

Everything here works with the *pure* radial factor |x - y|^(-d-alpha); the
coefficient a(t;x,y) and the (2-alpha) normalization are applied by callers.
Keeping the singular factor analytic is what makes cell weights, tails and
far-field completions exact (1D) or near-exact (2D) instead of O(h) at region
boundaries.
"""

from __future__ import annotations

import numpy as np

# Surface measure of the unit sphere S^{d-1}; d=1 is the two-point set {-1,1}.
SPHERE_MEASURE = {1: 2.0, 2: 2.0 * np.pi}


def power_integral_1d(lo, hi, alpha):
    """Integral of s^(-1-alpha) over [lo, hi], 0 < lo <= hi (vectorized).

    Equals (lo^-alpha - hi^-alpha)/alpha; hi may be +inf.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo <= 0.0):
        raise ValueError("power_integral_1d needs strictly positive lower bounds")
    with np.errstate(divide="ignore"):
        upper = np.where(np.isinf(hi), 0.0, hi ** (-alpha))
    return (lo ** (-alpha) - upper) / alpha


def cell_weight_1d(r, h, alpha):
    """Exact integral of |s|^(-1-alpha) over the cell [r-h/2, r+h/2], r >= h."""
    r = np.asarray(r, dtype=float)
    return power_integral_1d(r - 0.5 * h, r + 0.5 * h, alpha)


def clipped_cell_weight_1d(a, b, lo, hi, alpha):
    """Integral of s^(-1-alpha) over [a, b] ∩ [lo, hi] (all positive; vectorized)."""
    lo_c = np.maximum(a, lo)
    hi_c = np.minimum(b, hi)
    lo_c = np.asarray(lo_c, dtype=float)
    hi_c = np.asarray(hi_c, dtype=float)
    empty = lo_c >= hi_c
    lo_safe = np.where(empty, 1.0, lo_c)
    hi_safe = np.where(empty, 1.0, hi_c)
    out = power_integral_1d(lo_safe, hi_safe, alpha)
    return np.where(empty, 0.0, out)


def central_second_moment_1d(h, alpha):
    """Exact integral of s^2 * |s|^(-1-alpha) over the central cell [-h/2, h/2]."""
    return 2.0 * (0.5 * h) ** (2.0 - alpha) / (2.0 - alpha)


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


_SQUARE_ANGLE_CACHE: dict[float, float] = {}


def square_angle_factor(alpha, n=48):
    """J(alpha) = ∫_0^{pi/4} cos(theta)^(alpha-2) dtheta (smooth; Gauss rule)."""
    key = float(alpha)
    if key not in _SQUARE_ANGLE_CACHE:
        x, w = _gauss_legendre(n)
        theta = 0.125 * np.pi * (x + 1.0)
        vals = np.cos(theta) ** (alpha - 2.0)
        _SQUARE_ANGLE_CACHE[key] = float(0.125 * np.pi * np.dot(w, vals))
    return _SQUARE_ANGLE_CACHE[key]


def central_second_moment_2d(h, alpha):
    """Exact ∫_cell s_k^2 |s|^(-2-alpha) ds over the square cell [-h/2, h/2]^2.

    By symmetry this is half of ∫_cell |s|^(-alpha) ds, computed in polar
    coordinates; the angular factor is smooth and integrated by a fixed
    Gauss rule, so the value is exact to rounding.
    """
    c = 0.5 * h
    return 4.0 * c ** (2.0 - alpha) / (2.0 - alpha) * square_angle_factor(alpha)


_GAUSS_CACHE: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def tensor_gauss_2d(n, h):
    """Tensor Gauss points/weights on the square cell [-h/2, h/2]^2."""
    key = (n, float(h))
    if key not in _GAUSS_CACHE:
        x, w = _gauss_legendre(n)
        pts_1d = 0.5 * h * x
        wts_1d = 0.5 * h * w
        px, py = np.meshgrid(pts_1d, pts_1d, indexing="ij")
        wx, wy = np.meshgrid(wts_1d, wts_1d, indexing="ij")
        _GAUSS_CACHE[key] = (
            np.column_stack([px.ravel(), py.ravel()]),
            (wx * wy).ravel(),
        )
    return _GAUSS_CACHE[key]


def far_mass_1d(x, T, alpha):
    """∫_{|y| > T} |x - y|^(-1-alpha) dy for a point |x| < T (vectorized in x)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= T):
        raise ValueError("far_mass_1d needs |x| < T")
    return ((T - x) ** (-alpha) + (T + x) ** (-alpha)) / alpha


def far_mass_2d(x, T, alpha, n_theta=128):
    """∫_{|y| > T} |x - y|^(-2-alpha) dy for a point |x| < T.

    In polar coordinates around x the distance to the circle |y| = T in
    direction theta is s(theta) = sqrt(T^2 - e^2 sin^2 theta) - e cos theta
    with e = |x|, and the radial integral is s(theta)^(-alpha)/alpha. The
    theta integrand is smooth and periodic, so the trapezoid rule converges
    spectrally.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = np.linalg.norm(x, axis=1)
    if np.any(e >= T):
        raise ValueError("far_mass_2d needs |x| < T")
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    s = np.sqrt(T * T - (e[:, None] * np.sin(theta)) ** 2) - e[:, None] * np.cos(theta)
    vals = (s ** (-alpha)).mean(axis=1) * 2.0 * np.pi / alpha
    return vals if vals.size > 1 else float(vals[0])


def far_mass(x, T, d, alpha, n_theta=128):
    """Dimension dispatch for the exterior kernel mass beyond radius T."""
    if d == 1:
        x = np.asarray(x, dtype=float)
        return far_mass_1d(x.reshape(-1), T, alpha) if x.ndim else far_mass_1d(x, T, alpha)
    return far_mass_2d(x, T, alpha, n_theta=n_theta)


def trapezoid_partial(times, values, a, b):
    """Trapezoid integral of piecewise-linear (times, values) over [a, b].

    Endpoints falling between nodes are handled by linear interpolation, so
    the result is the exact integral of the piecewise-linear interpolant.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if a > b:
        raise ValueError("trapezoid_partial needs a <= b")
    if a < times[0] - 1e-12 or b > times[-1] + 1e-12:
        raise ValueError("integration window not covered by the time grid")
    a = max(a, times[0])
    b = min(b, times[-1])
    if a == b:
        return 0.0
    va = float(np.interp(a, times, values))
    vb = float(np.interp(b, times, values))
    inside = (times > a) & (times < b)
    ts = np.concatenate([[a], times[inside], [b]])
    vs = np.concatenate([[va], values[inside], [vb]])
    return float(np.trapezoid(vs, ts))


def sup_on_window(times, values, a, b):
    """Max of the piecewise-linear interpolant of (times, values) on [a, b]."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    va = float(np.interp(a, times, values))
    vb = float(np.interp(b, times, values))
    inside = (times >= a) & (times <= b)
    cands = [va, vb]
    if np.any(inside):
        cands.append(float(values[inside].max()))
    return max(cands)
