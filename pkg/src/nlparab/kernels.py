"""Jump kernels: parameters, coefficient rules, and condition checkers.

The model kernel is K(t; x, y) = a(t; x, y) * (2 - alpha) * |x - y|^(-d-alpha)
with a symmetric coefficient a taking values in [lam, Lam]. The axes-singular
structure replaces the absolutely continuous measure by a sum of
one-dimensional jump measures along the coordinate axes; it has no pointwise
density, so eval_kernel rejects it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SingularityError, StructureError
from .quadrature import SPHERE_MEASURE

ABSOLUTELY_CONTINUOUS = "absolutely_continuous"
AXES_SINGULAR = "axes_singular"


@dataclass(frozen=True)
class FracParams:
    """Dimension, order and ellipticity bounds of the kernel class."""

    d: int
    alpha: float
    lam: float = 1.0
    Lam: float = 1.0
    alpha0: float = 0.1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.d}")
        if not (0.0 < self.alpha0 <= self.alpha < 2.0):
            raise ConfigError(
                f"need 0 < alpha0 <= alpha < 2, got alpha0={self.alpha0}, alpha={self.alpha}"
            )
        if not (0.0 < self.lam <= self.Lam):
            raise ConfigError(f"need 0 < lam <= Lam, got lam={self.lam}, Lam={self.Lam}")

    @property
    def norm_const(self):
        """The (2 - alpha) normalization making the alpha -> 2 limit local."""
        return 2.0 - self.alpha


def _splitmix64(x):
    """Deterministic 64-bit mix (vectorized); used for per-cell random values."""
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return x ^ (x >> np.uint64(31))


class CoefficientRule:
    """Symmetric coefficient a(t; x, y) from a small parametric family.

    Cell-based rules evaluate a scalar field at the midpoint (x + y)/2, which
    is symmetric by construction and keeps values inside the cell range.
    """

    kind = "base"
    time_dependent = False

    def values_pair(self, t, X, Y):
        raise NotImplementedError

    def value_range(self):
        """(low, high) bounds of the rule's values, or None if unknown."""
        return None

    def mean_value(self, t=0.0):
        """Representative value used for far-field completions."""
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind}


class ConstantCoefficient(CoefficientRule):
    kind = "constant"

    def __init__(self, value=1.0):
        if value <= 0:
            raise ConfigError("coefficient must be positive")
        self.value = float(value)

    def values_pair(self, t, X, Y):
        return np.full(np.atleast_2d(X).shape[0], self.value)

    def value_range(self):
        return (self.value, self.value)

    def mean_value(self, t=0.0):
        return self.value

    def describe(self):
        return {"kind": self.kind, "value": self.value}


class CheckerboardCoefficient(CoefficientRule):
    kind = "checkerboard"

    def __init__(self, cell_size, low, high):
        if cell_size <= 0 or low <= 0 or high < low:
            raise ConfigError("checkerboard needs cell_size > 0 and 0 < low <= high")
        self.cell_size = float(cell_size)
        self.low = float(low)
        self.high = float(high)

    def _field(self, P):
        cells = np.floor(P / self.cell_size).astype(np.int64)
        parity = cells.sum(axis=1) % 2
        return np.where(parity == 0, self.low, self.high)

    def values_pair(self, t, X, Y):
        mid = 0.5 * (np.atleast_2d(X) + np.atleast_2d(Y))
        return self._field(mid)

    def value_range(self):
        return (self.low, self.high)

    def mean_value(self, t=0.0):
        return 0.5 * (self.low + self.high)

    def describe(self):
        return {"kind": self.kind, "cell_size": self.cell_size, "low": self.low, "high": self.high}


class TimeOscillatingCoefficient(CoefficientRule):
    kind = "time_oscillating"
    time_dependent = True

    def __init__(self, period, low, high):
        if period <= 0 or low <= 0 or high < low:
            raise ConfigError("time_oscillating needs period > 0 and 0 < low <= high")
        self.period = float(period)
        self.low = float(low)
        self.high = float(high)

    def _value(self, t):
        mid = 0.5 * (self.low + self.high)
        amp = 0.5 * (self.high - self.low)
        return mid + amp * np.sin(2.0 * np.pi * t / self.period)

    def values_pair(self, t, X, Y):
        return np.full(np.atleast_2d(X).shape[0], self._value(t))

    def value_range(self):
        return (self.low, self.high)

    def mean_value(self, t=0.0):
        return float(self._value(t))

    def describe(self):
        return {"kind": self.kind, "period": self.period, "low": self.low, "high": self.high}


class RandomPiecewiseCoefficient(CoefficientRule):
    """Per-cell values uniform in [low, high], deterministic in (seed, cell)."""

    kind = "random_piecewise"

    def __init__(self, seed, cell_size, low, high):
        if cell_size <= 0 or low <= 0 or high < low:
            raise ConfigError("random_piecewise needs cell_size > 0 and 0 < low <= high")
        self.seed = int(seed)
        self.cell_size = float(cell_size)
        self.low = float(low)
        self.high = float(high)

    def _field(self, P):
        cells = np.floor(P / self.cell_size).astype(np.int64)
        # Mix the seed with the cell index; constants below are arbitrary odd
        # multipliers decorrelating the axes.
        acc = np.uint64((self.seed * 0x2545F4914F6CDD1D) & 0xFFFFFFFFFFFFFFFF)
        acc = acc + cells[:, 0].astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        if cells.shape[1] > 1:
            acc = acc + cells[:, 1].astype(np.uint64) * np.uint64(0xD6E8FEB86659FD93)
        u = _splitmix64(acc).astype(np.float64) / float(2**64)
        return self.low + (self.high - self.low) * u

    def values_pair(self, t, X, Y):
        mid = 0.5 * (np.atleast_2d(X) + np.atleast_2d(Y))
        return self._field(mid)

    def value_range(self):
        return (self.low, self.high)

    def mean_value(self, t=0.0):
        return 0.5 * (self.low + self.high)

    def describe(self):
        return {
            "kind": self.kind,
            "seed": self.seed,
            "cell_size": self.cell_size,
            "low": self.low,
            "high": self.high,
        }


class CustomCoefficient(CoefficientRule):
    """Arbitrary two-point callable; testing hook, not exposed in configs.

    The callable is evaluated raw (no symmetrization), so the symmetry checker
    can catch asymmetric coefficients.
    """

    kind = "custom"

    def __init__(self, fn, low=None, high=None, time_dependent=False):
        self.fn = fn
        self.low = low
        self.high = high
        self.time_dependent = bool(time_dependent)

    def values_pair(self, t, X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        return np.asarray([float(self.fn(t, x, y)) for x, y in zip(X, Y)])

    def value_range(self):
        if self.low is None or self.high is None:
            return None
        return (self.low, self.high)

    def mean_value(self, t=0.0):
        if self.low is not None and self.high is not None:
            return 0.5 * (self.low + self.high)
        raise ConfigError("custom coefficient without bounds has no far-field value")


@dataclass
class KernelSpec:
    """Kernel parameters + coefficient rule + structural type."""

    params: FracParams
    coefficient: CoefficientRule = field(default_factory=ConstantCoefficient)
    structure: str = ABSOLUTELY_CONTINUOUS

    def __post_init__(self):
        if self.structure not in (ABSOLUTELY_CONTINUOUS, AXES_SINGULAR):
            raise ConfigError(f"unknown kernel structure {self.structure!r}")
        rng = self.coefficient.value_range()
        if rng is not None:
            low, high = rng
            if low < self.params.lam - 1e-12 or high > self.params.Lam + 1e-12:
                raise ConfigError(
                    f"coefficient range [{low}, {high}] violates "
                    f"[lam, Lam] = [{self.params.lam}, {self.params.Lam}]"
                )
        if self.structure == AXES_SINGULAR:
            if self.params.d != 2:
                raise ConfigError("axes-singular structure requires d = 2")
            if not (
                isinstance(self.coefficient, ConstantCoefficient)
                and self.coefficient.value == 1.0
            ):
                raise ConfigError("axes-singular structure permits only the constant-1 coefficient")

    @property
    def time_dependent(self):
        return self.coefficient.time_dependent


def eval_kernel(spec, t, x, y):
    """Pointwise K(t; x, y) for absolutely continuous kernels."""
    if spec.structure != ABSOLUTELY_CONTINUOUS:
        raise StructureError("the axes-singular measure has no pointwise density")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = np.linalg.norm(x - y)
    if r < 1e-300:
        raise SingularityError("kernel evaluation on the diagonal x = y")
    a = float(spec.coefficient.values_pair(t, x[None, :], y[None, :])[0])
    p = spec.params
    return a * p.norm_const * r ** (-p.d - p.alpha)


@dataclass
class ConditionReport:
    """Outcome of a kernel condition check."""

    name: str
    passed: bool
    measured: dict
    details: dict = field(default_factory=dict)


def _sample_points(params, rng, n, box):
    return rng.uniform(-box, box, size=(n, params.d))


def _cell_sweep_pairs(spec, box):
    """Deterministic per-cell midpoint pairs for cell-based coefficient rules."""
    cell = getattr(spec.coefficient, "cell_size", None)
    if cell is None:
        return None
    centers_1d = np.arange(-box + 0.5 * cell, box, cell)
    if centers_1d.size == 0 or centers_1d.size > 64:
        return None
    if spec.params.d == 1:
        centers = centers_1d[:, None]
    else:
        cx, cy = np.meshgrid(centers_1d, centers_1d, indexing="ij")
        centers = np.column_stack([cx.ravel(), cy.ravel()])
        if centers.shape[0] > 256:
            centers = centers[:: centers.shape[0] // 256 + 1]
    # Pair each cell center with a shifted partner in the same and the next cell.
    shift = np.zeros_like(centers)
    shift[:, 0] = 0.4 * cell
    return np.concatenate([centers, centers]), np.concatenate(
        [centers + shift, centers + 2.0 * shift]
    )


def check_bounds(spec, n_samples=500, seed=0, box=2.0, tol=1e-10):
    """Sampled coefficient ratios K / ((2-alpha)|x-y|^(-d-alpha)) vs [lam, Lam]."""
    p = spec.params
    rng = np.random.default_rng(seed)
    X = _sample_points(p, rng, n_samples, box)
    Y = _sample_points(p, rng, n_samples, box)
    keep = np.linalg.norm(X - Y, axis=1) > 1e-8
    X, Y = X[keep], Y[keep]
    sweep = _cell_sweep_pairs(spec, box)
    if sweep is not None:
        X = np.concatenate([X, sweep[0]])
        Y = np.concatenate([Y, sweep[1]])
    t = float(rng.uniform(0.0, 1.0))
    ratios = spec.coefficient.values_pair(t, X, Y)
    lo, hi = float(ratios.min()), float(ratios.max())
    passed = lo >= p.lam - tol and hi <= p.Lam + tol
    return ConditionReport(
        "bounds",
        passed,
        {"min_ratio": lo, "max_ratio": hi, "lam": p.lam, "Lam": p.Lam},
        {"samples": int(X.shape[0]), "seed": seed, "t": t},
    )


def check_symmetry(spec, n_samples=500, seed=0, box=2.0, tol=1e-12):
    """Max relative deviation |K(x,y) - K(y,x)| / K(x,y) over samples."""
    p = spec.params
    rng = np.random.default_rng(seed)
    X = _sample_points(p, rng, n_samples, box)
    Y = _sample_points(p, rng, n_samples, box)
    keep = np.linalg.norm(X - Y, axis=1) > 1e-8
    X, Y = X[keep], Y[keep]
    t = float(rng.uniform(0.0, 1.0))
    fwd = spec.coefficient.values_pair(t, X, Y)
    bwd = spec.coefficient.values_pair(t, Y, X)
    dev = float(np.max(np.abs(fwd - bwd) / np.maximum(np.abs(fwd), 1e-300)))
    return ConditionReport(
        "symmetry",
        dev <= tol,
        {"max_relative_deviation": dev, "tol": tol},
        {"samples": int(X.shape[0]), "seed": seed},
    )


def check_cutoff(spec, rhos=(0.5, 1.0, 2.0), ceiling=None, tol=1e-9):
    """Exterior kernel mass sup_x ∫_{|y-x|>rho} K dy vs the closed form.

    For the model kernel the integral is exactly
    a * (2-alpha) * omega_d * rho^(-alpha) / alpha, so the check reduces to
    the coefficient bound times the closed form. The reported constant is
    sup over rho of rho^alpha times the integral.
    """
    p = spec.params
    rng = spec.coefficient.value_range()
    if rng is None:
        raise ConfigError("check_cutoff needs a coefficient with known bounds")
    bound_a = rng[1]
    omega = SPHERE_MEASURE[p.d]
    closed = bound_a * p.norm_const * omega / p.alpha
    integrals = {float(r): closed * float(r) ** (-p.alpha) for r in rhos}
    if ceiling is None:
        ceiling = p.Lam * p.norm_const * omega / p.alpha
    passed = closed <= ceiling + tol
    return ConditionReport(
        "cutoff",
        passed,
        {"constant": closed, "ceiling": ceiling, "integrals": integrals},
        {"rhos": list(map(float, rhos))},
    )


def _ball_average_points(d, n):
    """Midpoint lattice on the unit ball (scaled by callers)."""
    if d == 1:
        s = (np.arange(n) + 0.5) / n * 2.0 - 1.0
        return s[:, None]
    m = int(np.sqrt(n)) + 1
    s = (np.arange(m) + 0.5) / m * 2.0 - 1.0
    gx, gy = np.meshgrid(s, s, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts[np.linalg.norm(pts, axis=1) < 1.0]


def check_ujs(spec, n_samples=300, seed=0, box=2.0, ceiling=None, avg_points=64):
    """K(t;x,y) vs the ball average of K(t;z,y) over z in B_r(x).

    r runs over min(1/4, |x-y|/4) * {1, 1/2}; the average uses a midpoint
    lattice. Pass iff the max ratio stays below the ceiling (default
    Lam/lam * 4^(d+alpha), implied by the kernel bounds and the triangle
    inequality).
    """
    p = spec.params
    if spec.structure != ABSOLUTELY_CONTINUOUS:
        raise StructureError("UJS check applies to absolutely continuous kernels")
    if ceiling is None:
        ceiling = p.Lam / p.lam * 4.0 ** (p.d + p.alpha)
    rng = np.random.default_rng(seed)
    X = _sample_points(p, rng, n_samples, box)
    Y = _sample_points(p, rng, n_samples, box)
    keep = np.linalg.norm(X - Y, axis=1) > 1e-3
    X, Y = X[keep], Y[keep]
    t = float(rng.uniform(0.0, 1.0))
    unit = _ball_average_points(p.d, avg_points)
    worst = 0.0
    for x, y in zip(X, Y):
        dist = float(np.linalg.norm(x - y))
        for fac in (1.0, 0.5):
            r = min(0.25, dist / 4.0) * fac
            Z = x[None, :] + r * unit
            dz = np.linalg.norm(Z - y[None, :], axis=1)
            avg = float(
                np.mean(
                    spec.coefficient.values_pair(t, Z, np.broadcast_to(y, Z.shape))
                    * dz ** (-p.d - p.alpha)
                )
            )
            val = eval_kernel(spec, t, x, y) / (p.norm_const * avg)
            worst = max(worst, val)
    return ConditionReport(
        "ujs",
        worst <= ceiling,
        {"max_ratio": worst, "ceiling": ceiling},
        {"samples": int(X.shape[0]), "seed": seed, "avg_points": avg_points},
    )


def check_poinc_sob(spec, grid, n_fields=8, seed=0, r=None, rho=None):
    """Measured constants in the localized Poincare and Sobolev inequalities.

    Random discrete fields on the grid; energies through the discretization
    module (doubled to the two-sided double-integral normalization). The
    report carries the largest admissible lambda for each inequality; the
    check passes iff both are strictly positive. When alpha >= d the Sobolev
    exponent d/(d-alpha) degenerates and the L^inf norm is used instead.
    """
    from .operators import energy_form

    p = spec.params
    if r is None:
        r = 0.5 * grid.x_omega
    if rho is None:
        rho = 0.25 * grid.x_omega
    rng = np.random.default_rng(seed)
    ball_r = grid.nodes_in_ball(np.zeros(p.d), r)
    ball_rr = grid.nodes_in_ball(np.zeros(p.d), r + rho)
    hd = grid.h ** p.d
    lam_p = np.inf
    lam_s = np.inf
    for _ in range(n_fields):
        v = rng.standard_normal(grid.n_nodes)
        # Poincare on B_r.
        vb = v[ball_r]
        var = hd * float(np.sum((vb - vb.mean()) ** 2))
        energy_r = 2.0 * energy_form(spec, grid, 0.0, v, v, region=("ball", np.zeros(p.d), r))
        if var > 1e-14:
            lam_p = min(lam_p, r ** p.alpha * energy_r / var)
        # Sobolev on B_r with slack ring rho.
        v2 = v[ball_r] ** 2
        if p.alpha < p.d:
            q = p.d / (p.d - p.alpha)
            lhs = (hd * float(np.sum(v2 ** q))) ** (1.0 / q)
        else:
            lhs = float(np.max(v2))
        energy_rr = 2.0 * energy_form(
            spec, grid, 0.0, v, v, region=("ball", np.zeros(p.d), r + rho)
        )
        l1 = hd * float(np.sum(v[ball_rr] ** 2))
        if lhs > 1e-14:
            lam_s = min(lam_s, (energy_rr + rho ** (-p.alpha) * l1) / lhs)
    passed = lam_p > 0.0 and lam_s > 0.0
    return ConditionReport(
        "poinc_sob",
        passed,
        {"lambda_poincare": float(lam_p), "lambda_sobolev": float(lam_s)},
        {"fields": n_fields, "seed": seed, "r": float(r), "rho": float(rho)},
    )
