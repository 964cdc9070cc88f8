"""Exterior-data blow-up study on the line.

The data g(t, x) = delta f(t) + f'(t) 1_{2<|x|<3} with f(t) = (log t)^{-2}
switches on at t = 0 with zero value and nonnegative slope, yet the solution
it drives stays above delta f(t) throughout B_1.  Since f beats every power
t^gamma near 0, no Hoelder estimate in time can hold at (0, x) for x in B_1,
even though the exterior tail of the solution stays integrable in time.

Three certificates back this up numerically: the subsolution margin at
construction (delta below the minimal annulus kernel mass over B_1, with a
factor-2 safety gap), the comparison lower bound u >= delta f - tol on the
solved trajectory, and the divergence of the partial tail integrals in
L^{1+gamma} against their convergent L^1 counterparts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ConfigError, GridError
from .grids import (
    AnnulusIndicator,
    ConstantRule,
    Grid,
    LogInvSqProfile,
    LogInvSqRateProfile,
    ZeroRule,
)
from .kernels import ConstantCoefficient, KernelSpec
from .operators import assemble_operator
from .quadrature import power_integral_1d, trapezoid_partial
from .solver import Scenario, SolveOptions, format_float, solve, write_csv_atomic
from .tails import tail_series

ANNULUS_INNER = 2.0
ANNULUS_OUTER = 3.0
T_START = -1.0


# ---------------------------------------------------------------------------
# The admissible data level.


def annulus_kernel_mass(params, x):
    """(2-alpha) * integral of |x-y|^(-1-alpha) over {2 < |y| < 3}, closed form."""
    x = float(x)
    a = params.alpha
    right = power_integral_1d(ANNULUS_INNER - x, ANNULUS_OUTER - x, a)
    left = power_integral_1d(ANNULUS_INNER + x, ANNULUS_OUTER + x, a)
    return float(params.norm_const * (right + left))


def unit_tail_constant(params):
    """tail(1; 1, 0) = 2 (2-alpha) / alpha in one dimension."""
    return float(2.0 * params.norm_const / params.alpha)


def compute_delta(params, grid):
    """Largest certifiable data level: the minimal annulus kernel mass over B_1 nodes.

    Any delta at or below this value makes delta - (mass at x) nonpositive at
    every node of the closed unit ball, which is the subsolution inequality
    the lower-bound certificate rests on.  The mass is a region-exact
    integral, so the scan over nodes only locates the minimizer; by symmetry
    and convexity it sits at the origin, which the tests confirm.
    """
    if params.d != 1:
        raise ConfigError("the blow-up example is one-dimensional")
    if grid.d != 1:
        raise GridError("need a one-dimensional grid")
    if grid.h > 1.0 / 16.0 + 1e-12:
        raise GridError(f"grid too coarse for the certificate: h = {grid.h} > 1/16")
    if grid.r_trunc < ANNULUS_OUTER - 1e-12:
        raise GridError(
            f"coverage must reach the outer annulus radius {ANNULUS_OUTER}, "
            f"got r_trunc = {grid.r_trunc}"
        )
    nodes = grid.nodes_in_ball(np.zeros(1), 1.0, strict=False)
    delta_star = min(annulus_kernel_mass(params, grid.coords[p, 0]) for p in nodes)
    assert delta_star > 0.0
    return float(delta_star)


# ---------------------------------------------------------------------------
# Certified scenario construction.


@dataclass
class CounterexampleSpec:
    """Certified ingredients of the blow-up scenario.

    delta defaults to half the admissible level delta_star, so the margin
    delta - (annulus mass at x) <= -delta_star/2 holds at every B_1 node and
    survives the O(h) gap between the exact mass and its discrete counterpart.
    Construction raises CertificateError for any delta above delta_star/2.
    """

    params: object
    h: float = 1.0 / 16.0
    delta: float | None = None
    k_max: int = 31
    per_level: int = 4
    t_end: float = 0.5
    scheme: str = "explicit"
    grid: Grid = field(init=False)
    delta_star: float = field(init=False)
    certificate_margin: float = field(init=False)

    def __post_init__(self):
        p = self.params
        if p.d != 1:
            raise ConfigError("the blow-up example is one-dimensional")
        if p.lam != 1.0 or p.Lam != 1.0:
            raise ConfigError("the example runs with the unit coefficient, lam = Lam = 1")
        if not (0.0 < self.t_end < 1.0):
            raise ConfigError("t_end must lie in (0, 1); the profile blows up at 1")
        if self.k_max < 10:
            raise ConfigError("k_max < 10 leaves too few dyadic levels")
        if self.per_level < 1:
            raise ConfigError("per_level must be >= 1")
        if self.scheme not in ("explicit", "implicit"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        self.grid = Grid(d=1, x_omega=1.0, r_trunc=3.0, h=self.h)
        self.delta_star = compute_delta(p, self.grid)
        if self.delta is None:
            self.delta = 0.5 * self.delta_star
        self.delta = float(self.delta)
        self.certificate_margin = self.delta_star - self.delta
        if self.delta <= 0.0:
            raise CertificateError("delta must be positive")
        if self.certificate_margin < 0.5 * self.delta_star - 1e-12:
            raise CertificateError(
                f"delta = {self.delta} exceeds the certified level "
                f"delta_star/2 = {0.5 * self.delta_star}"
            )

    def kernel_spec(self):
        return KernelSpec(self.params, ConstantCoefficient(1.0))

    def k_onset(self):
        """Smallest k with 2^-k <= t_end."""
        return max(0, math.ceil(-math.log2(self.t_end) - 1e-12))

    def dyadic_times(self):
        """(k, 2^-k) pairs present in the schedule, coarsest first."""
        return [(k, 2.0 ** -k) for k in range(self.k_onset(), self.k_max + 1)]


def _schedule(cspec, dt_cfl):
    """Dyadic nodes 2^-k, each octave split per_level-fold, union a uniform grid.

    The uniform component at the stability step keeps the pre-onset stretch
    and the tail of the interval resolved; near t = 0 the dyadic refinement
    dominates.  The solver splits any remaining long interval on its own, so
    the union only controls where slices are stored.
    """
    parts = [np.array([T_START, 0.0, cspec.t_end])]
    m = cspec.per_level
    upper = cspec.t_end
    for k in range(cspec.k_onset(), cspec.k_max + 1):
        t_k = 2.0 ** -k
        if t_k < upper - 1e-15:
            parts.append(np.linspace(t_k, upper, m + 1))
        upper = t_k
    parts.append(np.linspace(0.0, upper, m + 1))
    n_uniform = int(math.ceil((cspec.t_end - T_START) / dt_cfl))
    parts.append(np.linspace(T_START, cspec.t_end, n_uniform + 1))
    ts = np.unique(np.concatenate(parts))
    keep = np.ones(ts.size, dtype=bool)
    keep[1:] = np.diff(ts) > 1e-13
    return ts[keep]


def build_counterexample(cspec):
    """Scenario: zero state at t = -1, data switching on at 0 with the log profile."""
    kspec = cspec.kernel_spec()
    probe = assemble_operator(kspec, cspec.grid)
    times = _schedule(cspec, 0.9 / probe.max_diag)
    g_terms = (
        (LogInvSqProfile(), ConstantRule(cspec.delta)),
        (LogInvSqRateProfile(), AnnulusIndicator(ANNULUS_INNER, ANNULUS_OUTER)),
    )
    return Scenario(
        spec=kspec,
        grid=cspec.grid,
        t_start=T_START,
        t_end=cspec.t_end,
        initial=ZeroRule(),
        g_terms=g_terms,
        times=times,
    )


def default_solve_options(cspec):
    return SolveOptions(
        scheme=cspec.scheme,
        stride=1,
        flag_times=tuple(t for _, t in cspec.dyadic_times()),
    )


def run_counterexample(cspec):
    return solve(build_counterexample(cspec), default_solve_options(cspec))


# ---------------------------------------------------------------------------
# Certificate 1: the comparison lower bound u >= delta f on B_1.


@dataclass
class LowerBoundReport:
    rows: list
    holds: bool
    monotone_ok: bool
    worst_drop: float
    params: dict

    def to_rows(self):
        header = ["t", "min_u_B1", "delta_f", "tol", "margin"]
        return header, [list(r) for r in self.rows]


def _time_error_budget(s, schedule, cspec, rate):
    """10 * (local schedule step) * (local sup of the data slope on B_1).

    On B_1 the data is delta f(t), so the relevant slope is delta f'.  The
    sup runs over the half-octave window behind the sample; f' is monotone
    there for small times and the dense sampling covers the rest.
    """
    if s <= 0.0:
        return 0.0
    lo = 0.5 * s
    pts = schedule[(schedule >= lo - 1e-15) & (schedule <= s + 1e-15)]
    dt_loc = float(np.diff(pts).max()) if pts.size >= 2 else s - lo
    sup_slope = cspec.delta * max(rate.value(t) for t in np.linspace(lo, s, 65))
    return 10.0 * dt_loc * sup_slope


def check_monotone_onset(solution, cspec, tol=None):
    """Stored slices must be pointwise nondecreasing on B_1 for t >= 0."""
    stf = solution.field
    idx = np.flatnonzero(stf.times >= -1e-15)
    b1 = cspec.grid.nodes_in_ball(np.zeros(1), 1.0, strict=False)
    vals = stf.values[np.ix_(idx, b1)]
    drops = np.diff(vals, axis=0)
    worst = float(drops.min()) if drops.size else 0.0
    if tol is None:
        tol = 1e-10 * max(1.0, float(np.abs(vals).max()))
    return worst >= -tol, worst


def certify_lower_bound(solution, cspec, sample_times=None):
    """Check u(t, x) >= delta f(t) - tol at every B_1 node for the sampled times."""
    prof, rate = LogInvSqProfile(), LogInvSqRateProfile()
    if sample_times is None:
        sample_times = [
            t for k, t in cspec.dyadic_times() if 4 <= k <= 12 and t <= cspec.t_end + 1e-12
        ]
    b1 = cspec.grid.nodes_in_ball(np.zeros(1), 1.0, strict=False)
    schedule = np.asarray(solution.scenario.times, dtype=float)
    rows = []
    holds = True
    for s in sorted(float(t) for t in sample_times):
        fld = solution.field_at_time(s)
        target = cspec.delta * prof.value(s)
        tol = _time_error_budget(s, schedule, cspec, rate)
        got = float(fld.values[b1].min())
        margin = got - (target - tol)
        rows.append((s, got, target, tol, margin))
        holds = holds and margin >= 0.0
    monotone_ok, worst_drop = check_monotone_onset(solution, cspec)
    return LowerBoundReport(
        rows=rows,
        holds=holds,
        monotone_ok=monotone_ok,
        worst_drop=worst_drop,
        params={
            "delta": cspec.delta,
            "delta_star": cspec.delta_star,
            "certificate_margin": cspec.certificate_margin,
            "alpha": cspec.params.alpha,
            "h": cspec.grid.h,
            "scheme": cspec.scheme,
        },
    )


# ---------------------------------------------------------------------------
# Certificate 2: Hoelder failure and the tail integrability split.


@dataclass
class FailureReport:
    gamma_grid: tuple
    ks: list
    pointwise: list
    tails: list
    partials: list
    checks: dict
    params: dict

    @property
    def holds(self):
        return all(self.checks.values())


def _stored_index(stf, t):
    i = int(np.argmin(np.abs(stf.times - t)))
    if abs(stf.times[i] - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigError(f"time {t} not stored (nearest {stf.times[i]})")
    return i


def holder_lower_bound(cspec, gamma, k):
    """delta f(2^-k) / 2^(-k gamma), the closed-form divergent minorant."""
    return cspec.delta * (k * math.log(2.0)) ** (-2.0) * 2.0 ** (gamma * k)


def partial_growth(partials, gamma, k_lo=None, k_mid=None, k_hi=None):
    """Late-window mass gain of the partial integrals over the early one.

    The divergence of the L^{1+gamma} partials is logarithmically slow, so
    their total only multiplies at astronomically deep k; what is visible at
    desk scale is the accelerating increment: the mass added per block of
    levels keeps growing, while the L^1 increments shrink.  Returns
    (P(k_hi) - P(k_mid)) / (P(k_mid) - P(k_lo)); defaults split the k-range
    in half.
    """
    vals = {r["k"]: r[gamma] for r in partials}
    ks = sorted(vals)
    k_lo = ks[0] if k_lo is None else k_lo
    k_hi = ks[-1] if k_hi is None else k_hi
    k_mid = ks[len(ks) // 2] if k_mid is None else k_mid
    early = vals[k_mid] - vals[k_lo]
    late = vals[k_hi] - vals[k_mid]
    return late / early if early > 0.0 else float("inf")


def certify_failure(solution, cspec, gamma_grid=(0.1, 0.25, 0.5, 1.0), k_range=None):
    """Hoelder quotients at the origin, tail sandwich, and partial tail integrals.

    The quotient u(t_k, 0)/t_k^gamma is reported next to its exact minorant
    delta f(t_k)/t_k^gamma, which grows without bound; the measured values
    dominate it by the lower-bound certificate.  The tail obeys a two-sided
    comparison against f + f', and its partial time integrals from 2^-k to
    t_end converge in L^1 while the L^{1+gamma} partials keep growing.
    """
    p = cspec.params
    prof, rate = LogInvSqProfile(), LogInvSqRateProfile()
    if k_range is None:
        k_range = range(max(4, cspec.k_onset()), min(cspec.k_max - 1, 30) + 1)
    ks = sorted(int(k) for k in k_range)
    if len(ks) < 6:
        raise ConfigError(f"need at least 6 dyadic levels, got {len(ks)}")
    if ks[0] < cspec.k_onset() or ks[-1] > cspec.k_max:
        raise ConfigError(
            f"k-range [{ks[0]}, {ks[-1]}] leaves the schedule "
            f"[{cspec.k_onset()}, {cspec.k_max}]"
        )
    gammas = tuple(float(g) for g in gamma_grid)
    grid = cspec.grid
    origin = grid.node_at(np.zeros(1))
    stf = solution.field
    series = tail_series(stf, p.alpha, 1.0, np.zeros(1), part="abs")

    ann_tail = annulus_kernel_mass(p, 0.0)
    unit_tail = unit_tail_constant(p)
    c1 = ann_tail * min(cspec.delta / ann_tail, 1.0)
    c2 = max(cspec.delta * unit_tail, ann_tail)

    pointwise, tails = [], []
    sandwich_ok = True
    for k in ks:
        t_k = 2.0 ** -k
        i = _stored_index(stf, t_k)
        u0 = float(stf.values[i, origin])
        f_k, fp_k = prof.value(t_k), rate.value(t_k)
        lower = cspec.delta * f_k
        pointwise.append(
            {
                "k": k,
                "t": t_k,
                "u0": u0,
                "lower": lower,
                "q": {g: u0 / t_k**g for g in gammas},
                "q_lower": {g: lower / t_k**g for g in gammas},
            }
        )
        tail_k = float(series[i])
        comparator = f_k + fp_k
        ok = c1 * comparator <= tail_k <= c2 * comparator
        sandwich_ok = sandwich_ok and ok
        tails.append(
            {"k": k, "t": t_k, "tail": tail_k, "comparator": comparator, "ok": ok}
        )

    partials = []
    for k in ks:
        lo = 2.0 ** -k
        row = {"k": k, "l1": float(trapezoid_partial(stf.times, series, lo, cspec.t_end))}
        for g in gammas:
            row[g] = float(
                trapezoid_partial(stf.times, series ** (1.0 + g), lo, cspec.t_end)
            )
        partials.append(row)

    l1 = np.array([r["l1"] for r in partials])
    l1_inc = np.diff(l1)
    l1_converges = bool(
        np.all(l1_inc > 0.0)
        and np.all(np.diff(l1_inc) < 0.0)
        and l1_inc[-1] <= 1e-3 * l1[-1]
    )
    lp_increase = all(
        np.all(np.diff([r[g] for r in partials]) > 0.0) for g in gammas
    )
    growth = {g: partial_growth(partials, g) for g in gammas}
    # The minorant delta f(t)/t^gamma is exactly computable at any k, so its
    # divergence is certified beyond the solved range: strictly increasing
    # from the first level past k* = 2/(gamma log 2).
    diverges = True
    k_stars = {}
    for g in gammas:
        k_star = 2.0 / (g * math.log(2.0))
        k_stars[g] = k_star
        probe = [holder_lower_bound(cspec, g, k) for k in range(int(k_star) + 1, int(k_star) + 16)]
        diverges = diverges and bool(np.all(np.diff(probe) > 0.0))

    checks = {
        "holder_lower_bound_diverges": diverges,
        "tail_sandwich": sandwich_ok,
        "l1_tail_converges": l1_converges,
        "lp_partials_increase": lp_increase,
    }
    return FailureReport(
        gamma_grid=gammas,
        ks=ks,
        pointwise=pointwise,
        tails=tails,
        partials=partials,
        checks=checks,
        params={
            "delta": cspec.delta,
            "delta_star": cspec.delta_star,
            "alpha": p.alpha,
            "h": grid.h,
            "c1": c1,
            "c2": c2,
            "unit_tail": unit_tail,
            "annulus_tail": ann_tail,
            "k_star": k_stars,
            "partial_growth": growth,
        },
    )


# ---------------------------------------------------------------------------
# CSV exports.


def export_pointwise_csv(report, path):
    """Rows (k, t_k, u(t_k, 0), delta f(t_k), q_gamma, q_gamma_lower ...)."""
    gs = report.gamma_grid
    header = (
        ["k", "t_k", "u_origin", "delta_f"]
        + [f"q_{g:g}" for g in gs]
        + [f"q_{g:g}_lower" for g in gs]
    )
    rows = [
        [str(r["k"]), r["t"], r["u0"], r["lower"]]
        + [r["q"][g] for g in gs]
        + [r["q_lower"][g] for g in gs]
        for r in report.pointwise
    ]
    write_csv_atomic(path, header, rows)


def export_tail_csv(report, path):
    """Rows (k, partial L^1 tail integral, partial L^{1+gamma} tail integrals)."""
    gs = report.gamma_grid
    header = ["k", "partial_l1_tail"] + [f"partial_l1p{g:g}_tail" for g in gs]
    rows = [[str(r["k"]), r["l1"]] + [r[g] for g in gs] for r in report.partials]
    write_csv_atomic(path, header, rows)
