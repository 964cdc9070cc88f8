"""Grids, exterior data rules, time profiles, and discrete fields.

Nodes sit on the lattice i*h (the origin is always a node); coverage is the
closed Euclidean ball |x| <= r_trunc of node centers, interior membership is
strict membership in the open domain. x_omega and r_trunc must be integer
multiples of h so that boundary nodes land exactly on the boundary and the
strict rule classifies them (as exterior) unambiguously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, GridError, StructureError
from .quadrature import far_mass

_EPS = 1e-12


def _is_multiple(value, h):
    return abs(value / h - round(value / h)) < 1e-9


class Grid:
    """Uniform lattice covering B_{r_trunc}, with interior domain of half-width x_omega."""

    def __init__(self, d, x_omega, r_trunc, h, domain="ball"):
        if d not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {d}")
        if domain not in ("ball", "box"):
            raise GridError(f"domain must be 'ball' or 'box', got {domain!r}")
        if h <= 0 or h >= x_omega:
            raise GridError(f"need 0 < h < x_omega, got h={h}, x_omega={x_omega}")
        if r_trunc < x_omega + 2.0 * h - 1e-9:
            raise GridError(
                f"need r_trunc >= x_omega + 2h for an exterior ring, got {r_trunc}"
            )
        if not (_is_multiple(x_omega, h) and _is_multiple(r_trunc, h)):
            raise GridError("x_omega and r_trunc must be integer multiples of h")
        self.d = d
        self.domain = domain
        self.x_omega = float(x_omega)
        self.r_trunc = float(r_trunc)
        self.h = float(h)

        m = int(round(r_trunc / h))
        if d == 1:
            idx = np.arange(-m, m + 1, dtype=np.int64)[:, None]
        else:
            rng = np.arange(-m, m + 1, dtype=np.int64)
            gi, gj = np.meshgrid(rng, rng, indexing="ij")
            idx = np.column_stack([gi.ravel(), gj.ravel()])
            keep = np.linalg.norm(idx * h, axis=1) <= r_trunc + 1e-9
            idx = idx[keep]
        self.idx = idx
        self.coords = idx * h
        self.n_nodes = idx.shape[0]

        if domain == "ball":
            inside = np.linalg.norm(self.coords, axis=1) < x_omega - _EPS
        else:
            inside = np.max(np.abs(self.coords), axis=1) < x_omega - _EPS
        self.interior_mask = inside
        self.interior = np.flatnonzero(inside)
        self.ring = np.flatnonzero(~inside)
        self.n_interior = self.interior.size

        self._index_map = {tuple(row): p for p, row in enumerate(idx)}
        if d == 2:
            self._rows = {}
            self._cols = {}
            for p, (i, j) in enumerate(idx):
                self._rows.setdefault(int(j), []).append(p)
                self._cols.setdefault(int(i), []).append(p)
            self._rows = {j: np.asarray(v) for j, v in self._rows.items()}
            self._cols = {i: np.asarray(v) for i, v in self._cols.items()}

    @property
    def t_eff(self):
        """Radius where the far-field completion starts.

        1D: the covered-cell edge, exact. 2D: the equivalent-area radius of
        the covered cell union, so the union-vs-disc boundary mismatch
        cancels to first order in h.
        """
        if self.d == 1:
            return self.r_trunc + 0.5 * self.h
        return self.h * float(np.sqrt(self.n_nodes / np.pi))

    def node_at(self, point):
        """Position of the node whose center is `point` (must exist exactly)."""
        key = tuple(int(round(c / self.h)) for c in np.atleast_1d(point))
        if key not in self._index_map:
            raise GridError(f"no node at {point}")
        return self._index_map[key]

    def neighbor(self, pos, axis, step):
        key = list(self.idx[pos])
        key[axis] += step
        return self._index_map.get(tuple(key))

    def nodes_in_ball(self, center, radius, strict=True):
        """Positions of node centers inside B_radius(center) (strict by default)."""
        dist = np.linalg.norm(self.coords - np.atleast_1d(center), axis=1)
        return np.flatnonzero(dist < radius - _EPS if strict else dist <= radius + _EPS)

    def row_positions(self, j):
        """2D: positions on the horizontal line x2 = j*h, sorted by x1."""
        return self._rows[int(j)]

    def col_positions(self, i):
        return self._cols[int(i)]

    def contains_ball(self, center, radius):
        """Whether B_radius(center) lies inside the open interior domain."""
        center = np.atleast_1d(center)
        if self.domain == "ball":
            return float(np.linalg.norm(center)) + radius <= self.x_omega + _EPS
        return float(np.max(np.abs(center))) + radius <= self.x_omega + _EPS

    def __repr__(self):
        return (
            f"Grid(d={self.d}, {self.domain}, x_omega={self.x_omega}, "
            f"r_trunc={self.r_trunc}, h={self.h}, nodes={self.n_nodes})"
        )


# ---------------------------------------------------------------------------
# Spatial rules: exterior data beyond the grid and initial/source shapes.


class SpatialRule:
    kind = "base"

    def evaluate(self, points):
        raise NotImplementedError

    def support_radius(self):
        """Max |y| where the rule can be nonzero (inf if unbounded)."""
        return np.inf

    def value_sign(self):
        """+1 / -1 / 0 for sign-definite rules, None otherwise."""
        return None

    def describe(self):
        return {"kind": self.kind}


class ZeroRule(SpatialRule):
    kind = "zero"

    def evaluate(self, points):
        return np.zeros(np.atleast_2d(points).shape[0])

    def support_radius(self):
        return 0.0

    def value_sign(self):
        return 0


class ConstantRule(SpatialRule):
    kind = "constant"

    def __init__(self, value):
        self.value = float(value)

    def evaluate(self, points):
        return np.full(np.atleast_2d(points).shape[0], self.value)

    def value_sign(self):
        return 0 if self.value == 0.0 else (1 if self.value > 0 else -1)

    def describe(self):
        return {"kind": self.kind, "value": self.value}


class AnnulusIndicator(SpatialRule):
    """Indicator of {r_inner < |y| < r_outer} (centered at the origin)."""

    kind = "annulus_indicator"

    def __init__(self, r_inner, r_outer):
        if not (0.0 <= r_inner < r_outer):
            raise ConfigError("annulus needs 0 <= r_inner < r_outer")
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)

    def evaluate(self, points):
        dist = np.linalg.norm(np.atleast_2d(points), axis=1)
        return ((dist > self.r_inner) & (dist < self.r_outer)).astype(float)

    def support_radius(self):
        return self.r_outer

    def value_sign(self):
        return 1

    def describe(self):
        return {"kind": self.kind, "r_inner": self.r_inner, "r_outer": self.r_outer}


class BallIndicator(SpatialRule):
    kind = "ball_indicator"

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)

    def evaluate(self, points):
        dist = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return (dist < self.radius).astype(float)

    def support_radius(self):
        return float(np.linalg.norm(self.center)) + self.radius

    def value_sign(self):
        return 1

    def describe(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class GaussianRule(SpatialRule):
    kind = "gaussian"

    def __init__(self, amplitude, sigma, center=None):
        if sigma <= 0:
            raise ConfigError("gaussian needs sigma > 0")
        self.amplitude = float(amplitude)
        self.sigma = float(sigma)
        self.center = None if center is None else np.atleast_1d(np.asarray(center, dtype=float))

    def evaluate(self, points):
        P = np.atleast_2d(points)
        c = np.zeros(P.shape[1]) if self.center is None else self.center
        dist2 = np.sum((P - c) ** 2, axis=1)
        return self.amplitude * np.exp(-0.5 * dist2 / self.sigma ** 2)

    def value_sign(self):
        return 0 if self.amplitude == 0.0 else (1 if self.amplitude > 0 else -1)

    def describe(self):
        d = {"kind": self.kind, "amplitude": self.amplitude, "sigma": self.sigma}
        if self.center is not None:
            d["center"] = self.center.tolist()
        return d


class AnalyticRule(SpatialRule):
    """Closed-form exterior data evaluable anywhere; far integrals by quadrature."""

    kind = "far_tail_closed_form"

    def __init__(self, name, fn, sign=None):
        self.name = name
        self.fn = fn
        self._sign = sign

    def evaluate(self, points):
        return np.asarray(self.fn(np.atleast_2d(points)), dtype=float)

    def value_sign(self):
        return self._sign

    def describe(self):
        return {"kind": self.kind, "name": self.name}


def cosine_rule(axis=0):
    """u(y) = cos(y_axis); the classic consistency-test exterior."""
    rule = AnalyticRule(f"cos_x{axis + 1}", lambda P: np.cos(P[:, axis]))
    rule.fourier_omega = 1.0
    return rule


def rule_intervals_1d(rule):
    """Support of a 1D rule as (lo, hi, value) intervals; None if not closed-form."""
    if isinstance(rule, ZeroRule):
        return []
    if isinstance(rule, ConstantRule):
        return [(-np.inf, np.inf, rule.value)]
    if isinstance(rule, AnnulusIndicator):
        return [(-rule.r_outer, -rule.r_inner, 1.0), (rule.r_inner, rule.r_outer, 1.0)]
    if isinstance(rule, BallIndicator):
        c = float(rule.center[0])
        return [(c - rule.radius, c + rule.radius, 1.0)]
    return None


def rule_line_intervals(rule, axis, other):
    """Restriction of a 2D rule to the line {x_{1-axis} = other}, as intervals.

    Returns a list of (lo, hi, value) triples covering the rule's support on
    the line (piecewise constant rules only), or None when no closed form is
    available and callers must fall back to quadrature.
    """
    if isinstance(rule, ZeroRule):
        return []
    if isinstance(rule, ConstantRule):
        return [(-np.inf, np.inf, rule.value)]
    if isinstance(rule, BallIndicator):
        c_axis = rule.center[axis]
        c_perp = rule.center[1 - axis]
        gap2 = rule.radius ** 2 - (other - c_perp) ** 2
        if gap2 <= 0.0:
            return []
        w = float(np.sqrt(gap2))
        return [(c_axis - w, c_axis + w, 1.0)]
    if isinstance(rule, AnnulusIndicator):
        out2 = rule.r_outer ** 2 - other ** 2
        if out2 <= 0.0:
            return []
        w_out = float(np.sqrt(out2))
        in2 = rule.r_inner ** 2 - other ** 2
        if in2 <= 0.0:
            return [(-w_out, w_out, 1.0)]
        w_in = float(np.sqrt(in2))
        return [(-w_out, -w_in, 1.0), (w_in, w_out, 1.0)]
    return None


# Far-field integrals against the pure kernel |c - y|^(-d-alpha) beyond |y| > T.
# The (2 - alpha) factor and any coefficient are applied by callers.


def far_kernel_load(rule, X, T, d, alpha):
    """Signed ∫_{|y|>T} rule(y) |x - y|^(-d-alpha) dy for each row x of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(rule, ZeroRule):
        return np.zeros(X.shape[0])
    if rule.support_radius() <= T + 1e-12:
        return np.zeros(X.shape[0])
    if isinstance(rule, ConstantRule):
        return rule.value * np.atleast_1d(far_mass(X if d == 2 else X[:, 0], T, d, alpha))
    if d == 1:
        intervals = rule_intervals_1d(rule)
        if intervals is not None:
            out = np.zeros(X.shape[0])
            for i, x in enumerate(X[:, 0]):
                out[i] = _far_interval_integral_1d(intervals, x, T, alpha, lambda v: v)
            return out
        omega = getattr(rule, "fourier_omega", None)
        out = np.empty(X.shape[0])
        for i, x in enumerate(X[:, 0]):
            if omega is not None:
                # cos(omega*y) data: semi-infinite Fourier quadrature on both
                # sides (cos is even, so the left piece folds onto (T, inf)).
                f_right = quad(lambda y: (y - x) ** (-1 - alpha), T, np.inf,
                               weight="cos", wvar=omega)[0]
                f_left = quad(lambda y: (y + x) ** (-1 - alpha), T, np.inf,
                              weight="cos", wvar=omega)[0]
            else:
                f_right = quad(
                    lambda y: float(rule.evaluate([[y]])[0]) * (y - x) ** (-1 - alpha),
                    T, np.inf, limit=200,
                )[0]
                f_left = quad(
                    lambda y: float(rule.evaluate([[y]])[0]) * (x - y) ** (-1 - alpha),
                    -np.inf, -T, limit=200,
                )[0]
            out[i] = f_right + f_left
        return out
    raise ConfigError(
        f"far-field load for rule kind {rule.kind!r} is not available in 2D; "
        "use zero/constant/indicator exterior data"
    )


def far_kernel_mass(rule, center, T, d, alpha, mode="abs"):
    """∫_{|y|>T} phi(rule(y)) |center - y|^(-d-alpha) dy, phi per mode.

    mode: 'abs' -> |.| , 'pos' -> max(., 0), 'neg' -> max(-., 0), 'signed'.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if isinstance(rule, ZeroRule) or rule.support_radius() <= T + 1e-12:
        return 0.0
    if isinstance(rule, ConstantRule):
        v = {
            "abs": abs(rule.value),
            "pos": max(rule.value, 0.0),
            "neg": max(-rule.value, 0.0),
            "signed": rule.value,
        }[mode]
        if v == 0.0:
            return 0.0
        return v * float(np.atleast_1d(far_mass(center[None, :] if d == 2 else center, T, d, alpha))[0])
    if d == 1:
        x = float(center[0])
        phi = {
            "abs": abs,
            "pos": lambda s: max(s, 0.0),
            "neg": lambda s: max(-s, 0.0),
            "signed": lambda s: s,
        }[mode]
        intervals = rule_intervals_1d(rule)
        if intervals is not None:
            return float(_far_interval_integral_1d(intervals, x, T, alpha, phi))

        def ig_right(y):
            return phi(float(rule.evaluate([[y]])[0])) * (y - x) ** (-1 - alpha)

        def ig_left(y):
            return phi(float(rule.evaluate([[y]])[0])) * (x - y) ** (-1 - alpha)

        return quad(ig_right, T, np.inf, limit=200)[0] + quad(ig_left, -np.inf, -T, limit=200)[0]
    raise ConfigError(f"2D far-field mass unavailable for rule kind {rule.kind!r}")


def _far_interval_integral_1d(intervals, x, T, alpha, transform):
    """Sum of transform(value) * ∫ |y-x|^(-1-alpha) over interval parts beyond |y|>T."""
    from .quadrature import power_integral_1d

    total = 0.0
    for lo, hi, val in intervals:
        v = transform(val)
        if v == 0.0:
            continue
        a, b = max(lo, T), hi
        if b > a:
            total += v * float(power_integral_1d(a - x, b - x, alpha))
        a2, b2 = lo, min(hi, -T)
        if b2 > a2:
            total += v * float(power_integral_1d(x - b2, x - a2, alpha))
    return total


def far_l1alpha_mass(rule, T, d, alpha):
    """∫_{|y|>T} |rule(y)| (1 + |y|)^(-d-alpha) dy."""
    if isinstance(rule, ZeroRule) or rule.support_radius() <= T + 1e-12:
        return 0.0
    if isinstance(rule, ConstantRule):
        if d == 1:
            return 2.0 * abs(rule.value) * (1.0 + T) ** (-alpha) / alpha
        # 2D: 2*pi ∫_T^inf (1+s)^(-2-alpha) s ds, elementary.
        val = (1.0 + T) ** (-alpha) / alpha - (1.0 + T) ** (-1.0 - alpha) / (1.0 + alpha)
        return 2.0 * np.pi * abs(rule.value) * val
    if d == 1:
        intervals = rule_intervals_1d(rule)
        if intervals is not None:
            from .quadrature import power_integral_1d

            total = 0.0
            for lo, hi, val in intervals:
                if val == 0.0:
                    continue
                a, b = max(lo, T), hi
                if b > a:
                    total += abs(val) * float(power_integral_1d(1.0 + a, 1.0 + b, alpha))
                a2, b2 = lo, min(hi, -T)
                if b2 > a2:
                    total += abs(val) * float(power_integral_1d(1.0 - b2, 1.0 - a2, alpha))
            return total
        ig = lambda y: float(np.abs(rule.evaluate([[y]]))[0]) * (1.0 + abs(y)) ** (-1 - alpha)
        return quad(ig, T, np.inf, limit=200)[0] + quad(ig, -np.inf, -T, limit=200)[0]
    raise ConfigError(f"2D far-field L1_alpha mass unavailable for rule kind {rule.kind!r}")


# ---------------------------------------------------------------------------
# Time profiles.


class TimeProfile:
    kind = "base"

    def value(self, t):
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind}


class ConstantProfile(TimeProfile):
    kind = "constant"

    def __init__(self, level=1.0):
        self.level = float(level)

    def value(self, t):
        return self.level

    def describe(self):
        return {"kind": self.kind, "level": self.level}


class LinearProfile(TimeProfile):
    kind = "linear"

    def __init__(self, rate=1.0):
        self.rate = float(rate)

    def value(self, t):
        return self.rate * t

    def describe(self):
        return {"kind": self.kind, "rate": self.rate}


class PulseProfile(TimeProfile):
    kind = "pulse"

    def __init__(self, t_on, t_off, level=1.0):
        if t_off <= t_on:
            raise ConfigError("pulse needs t_off > t_on")
        self.t_on = float(t_on)
        self.t_off = float(t_off)
        self.level = float(level)

    def value(self, t):
        return self.level if self.t_on <= t < self.t_off else 0.0

    def describe(self):
        return {"kind": self.kind, "t_on": self.t_on, "t_off": self.t_off, "level": self.level}


class LogInvSqProfile(TimeProfile):
    """f(t) = (log t)^(-2) on (0, 1), zero for t <= 0.

    Continuous at 0+ but with unbounded derivative; the counterexample data.
    Undefined at t >= 1 (f blows up at 1), so scenarios must end before 1.
    """

    kind = "log_inv_sq"

    def value(self, t):
        if t <= 0.0:
            return 0.0
        if t >= 1.0:
            raise ConfigError("log_inv_sq profile is only defined for t < 1")
        return float(np.log(t) ** (-2.0))

    def derivative(self, t):
        if t <= 0.0:
            return 0.0
        return float(-2.0 * np.log(t) ** (-3.0) / t)


class LogInvSqRateProfile(TimeProfile):
    """f'(t) = -2 (log t)^(-3) / t on (0, 1), zero for t <= 0."""

    kind = "log_inv_sq_rate"

    def value(self, t):
        if t <= 0.0:
            return 0.0
        if t >= 1.0:
            raise ConfigError("log_inv_sq_rate profile is only defined for t < 1")
        return float(-2.0 * np.log(t) ** (-3.0) / t)


class CustomProfile(TimeProfile):
    kind = "custom"

    def __init__(self, fn):
        self.fn = fn

    def value(self, t):
        return float(self.fn(t))


# ---------------------------------------------------------------------------
# Discrete fields.


@dataclass
class Field:
    """Values on all covered nodes plus the far field beyond r_trunc.

    far_terms is a tuple of (weight, SpatialRule); the field beyond coverage
    is sum_k weight_k * rule_k(y). Ring values are authoritative inside
    r_trunc.
    """

    grid: Grid
    values: np.ndarray
    far_terms: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ConfigError(
                f"field values shape {self.values.shape} != ({self.grid.n_nodes},)"
            )

    @classmethod
    def from_rule(cls, grid, rule, weight=1.0, far=True):
        vals = weight * rule.evaluate(grid.coords)
        terms = ((weight, rule),) if far else ()
        return cls(grid, vals, terms)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n_nodes, float(c)), ((float(c), ConstantRule(1.0)),))

    def _clipped_terms(self, mode):
        out = []
        for w, rule in self.far_terms:
            sign = rule.value_sign()
            if sign is None:
                raise StructureError(
                    f"cannot clip far field with sign-indefinite rule {rule.kind!r}"
                )
            term_sign = np.sign(w) * sign
            if term_sign == 0:
                continue
            if (mode == "pos" and term_sign > 0) or (mode == "neg" and term_sign < 0):
                out.append((w if mode == "pos" else -w, rule))
        return tuple(out)

    def positive_part(self):
        return Field(self.grid, np.maximum(self.values, 0.0), self._clipped_terms("pos"))

    def negative_part(self):
        """The nonnegative function u_- = max(-u, 0)."""
        return Field(self.grid, np.maximum(-self.values, 0.0), self._clipped_terms("neg"))

    def far_mass(self, center, alpha, mode="abs"):
        """Far completion ∫ beyond t_eff of |field| (or pos/neg part) vs the pure kernel."""
        total = 0.0
        signs = []
        for w, rule in self.far_terms:
            s = rule.value_sign()
            if s is not None:
                signs.append(np.sign(w) * s)
        mixed = len({s for s in signs if s != 0}) > 1 or any(
            rule.value_sign() is None for _, rule in self.far_terms
        )
        if mixed and len(self.far_terms) > 1 and mode != "signed":
            raise StructureError("mixed-sign far terms: clipped far mass not representable")
        for w, rule in self.far_terms:
            if w == 0.0:
                continue
            if mode == "signed":
                total += w * far_kernel_mass(
                    rule, center, self.grid.t_eff, self.grid.d, alpha, "signed"
                )
            else:
                m = far_kernel_mass(rule, center, self.grid.t_eff, self.grid.d, alpha, "abs")
                term_sign = np.sign(w) * (rule.value_sign() or 1)
                if mode == "abs":
                    total += abs(w) * m
                elif mode == "pos" and term_sign > 0:
                    total += abs(w) * m
                elif mode == "neg" and term_sign < 0:
                    total += abs(w) * m
        return total


@dataclass
class SpaceTimeField:
    """Stored time slices of a solution (or constructed space-time data)."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    far_rules: tuple = ()
    far_weights: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.grid.n_nodes):
            raise ConfigError("space-time values shape mismatch")
        if self.far_rules and self.far_weights is None:
            raise ConfigError("far_rules without far_weights")

    @property
    def n_times(self):
        return self.times.size

    def field_at(self, i):
        terms = ()
        if self.far_rules:
            terms = tuple(
                (float(self.far_weights[i, k]), rule) for k, rule in enumerate(self.far_rules)
            )
        return Field(self.grid, self.values[i], terms)

    def time_indices_in(self, a, b, strict=True):
        if strict:
            return np.flatnonzero((self.times > a + _EPS) & (self.times < b - _EPS))
        return np.flatnonzero((self.times >= a - _EPS) & (self.times <= b + _EPS))
