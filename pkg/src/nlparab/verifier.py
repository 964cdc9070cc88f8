"""Two-sided measurement of every estimate the laboratory studies.

Each op measures the left and right sides of one inequality on a computed
solution and returns a Report with named summands and full parameter
provenance. Constants are measured, never asserted against theory: an inf of
exactly 0 yields a flagged infinite-constant report (that flag is the failure
signal the axes experiment looks for), and 0/0 a degenerate one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cylinders import cyl_stats, cylinder, resolve
from .errors import ConfigError, GridError, StructureError
from .grids import SpaceTimeField
from .kernels import AXES_SINGULAR
from .tails import tail_L1_in_time, tail_Lp_in_time, tail_axes_fun

_NONNEG_TOL = 1e-12


@dataclass
class Report:
    inequality: str
    left: float
    right: float
    constant: float
    summands: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def finite(self):
        return np.isfinite(self.constant)

    def to_row(self):
        row = {
            "inequality": self.inequality,
            "left": self.left,
            "right": self.right,
            "constant": self.constant,
            "flags": ";".join(self.flags),
        }
        for k, v in self.summands.items():
            row[f"summand_{k}"] = v
        for k, v in self.params.items():
            row[f"param_{k}"] = v
        return row


def _provenance(solution, t0, x0, R, extra=None):
    sc = solution.scenario
    p = sc.spec.params
    out = {
        "alpha": p.alpha, "lam": p.lam, "Lam": p.Lam, "d": p.d,
        "R": R, "t0": t0, "x0": tuple(np.atleast_1d(x0).tolist()),
        "h": sc.grid.h, "x_omega": sc.grid.x_omega, "r_trunc": sc.grid.r_trunc,
        "scheme": solution.options.scheme,
        "coefficient": sc.spec.coefficient.describe()["kind"],
    }
    if extra:
        out.update(extra)
    return out


def _constant(left, right):
    """left/right with degenerate and infinite outcomes as flags, not errors."""
    if right > 0.0:
        return left / right, []
    if left > 0.0:
        return np.inf, ["infinite-constant"]
    return np.nan, ["degenerate"]


def _check_containment(solution, t0, x0, R, factor=4.0, backward_only=False):
    sc = solution.scenario
    span = (factor * R) ** sc.spec.params.alpha
    lo = t0 - span
    hi = t0 if backward_only else t0 + span
    eps = 1e-9
    if lo < sc.t_start - eps or hi > sc.t_end + eps:
        raise GridError(
            f"hypothesis window ({lo}, {hi}) not inside solved interval "
            f"({sc.t_start}, {sc.t_end})"
        )
    if not sc.grid.contains_ball(x0, factor * R):
        raise GridError(f"B_{factor}R(x0) not inside the interior domain")


def _check_nonneg(solution, where="global"):
    vals = solution.field.values
    if where == "interior":
        vals = vals[:, solution.scenario.grid.interior]
    if float(vals.min()) < -_NONNEG_TOL:
        raise StructureError(
            f"solution must be nonnegative ({where}); min = {float(vals.min())}"
        )


def _window_field(solution, a, b):
    """Sub-SpaceTimeField covering [a, b] with one extra slice each side."""
    stf = solution.field
    t = stf.times
    i0 = int(np.searchsorted(t, a, side="right") - 1)
    i1 = int(np.searchsorted(t, b, side="left") + 1)
    i0 = max(i0, 0)
    i1 = min(i1, t.size)
    if i1 - i0 < 2:
        raise GridError(f"time window ({a}, {b}) needs at least two stored slices")
    if t[i0] > a + 1e-12 or t[i1 - 1] < b - 1e-12:
        raise GridError(f"time window ({a}, {b}) not covered by stored slices")
    return SpaceTimeField(
        stf.grid, t[i0:i1], stf.values[i0:i1],
        far_rules=stf.far_rules,
        far_weights=None if stf.far_weights is None else stf.far_weights[i0:i1],
    )


def _avg_tail(solution, alpha, R, x0, a, b, part):
    sub = _window_field(solution, a, b)
    return tail_L1_in_time(sub, alpha, R, x0, (a, b), part=part, averaged=True)


def harnack_quotient(solution, t0, x0, R):
    """sup over I-_R(t0 - R^alpha) x B_R vs inf over I+_R(t0) x B_R."""
    alpha = solution.scenario.spec.params.alpha
    _check_containment(solution, t0, x0, R)
    _check_nonneg(solution, "global")
    back = cylinder("I_minus", t0 - R ** alpha, x0, R, alpha)
    fwd = cylinder("I_plus", t0, x0, R, alpha)
    sup_b = cyl_stats(solution, back)[0]
    inf_f = cyl_stats(solution, fwd)[1]
    const, flags = _constant(sup_b, inf_f)
    return Report(
        inequality="harnack",
        left=sup_b, right=inf_f, constant=const,
        summands={"sup_backward": sup_b, "inf_forward": inf_f},
        params=_provenance(solution, t0, x0, R),
        flags=flags,
    )


def harnack_with_tails(solution, t0, x0, R):
    """Harnack for u nonnegative on the cylinder only: tails on both sides."""
    alpha = solution.scenario.spec.params.alpha
    _check_containment(solution, t0, x0, R)
    _check_nonneg(solution, "interior")
    back = cylinder("I_minus", t0 - R ** alpha, x0, R, alpha)
    fwd = cylinder("I_plus", t0, x0, R, alpha)
    sup_b = cyl_stats(solution, back)[0]
    inf_f = cyl_stats(solution, fwd)[1]
    a_b, b_b = back.time_window()
    left_tail = _avg_tail(solution, alpha, R, x0, a_b, b_b, part="pos")
    big = cylinder("I", t0, x0, 4.0 * R, alpha)
    a4, b4 = big.time_window()
    right_tail = _avg_tail(solution, alpha, 4.0 * R, x0, a4, b4, part="neg")
    left = sup_b + left_tail
    right_inf = inf_f
    const, flags = _constant(left, right_inf + right_tail)
    return Report(
        inequality="harnack-with-tails",
        left=left, right=right_inf + right_tail, constant=const,
        summands={
            "sup_backward": sup_b,
            "tail_pos_avg": left_tail,
            "inf_forward": inf_f,
            "tail_neg_avg": right_tail,
        },
        params=_provenance(solution, t0, x0, R),
        flags=flags,
    )


def weak_harnack_ratio(solution, t0, x0, R):
    """Space-time mean + averaged tail over the backward cylinder vs forward inf."""
    alpha = solution.scenario.spec.params.alpha
    _check_containment(solution, t0, x0, R)
    _check_nonneg(solution, "global")
    back = cylinder("I_minus", t0 - R ** alpha, x0, R, alpha)
    fwd = cylinder("I_plus", t0, x0, R, alpha)
    mean_b = cyl_stats(solution, back)[2]
    inf_f = cyl_stats(solution, fwd)[1]
    a_b, b_b = back.time_window()
    tail_avg = _avg_tail(solution, alpha, R, x0, a_b, b_b, part="abs")
    left = mean_b + tail_avg
    const, flags = _constant(left, inf_f)
    return Report(
        inequality="weak-harnack",
        left=left, right=inf_f, constant=const,
        summands={"mean_backward": mean_b, "tail_avg": tail_avg, "inf_forward": inf_f},
        params=_provenance(solution, t0, x0, R),
        flags=flags,
    )


def locbd_ratio(solution, t0, x0, R):
    """sup of u+ on the small backward cylinder vs RMS + averaged tail on the big one."""
    alpha = solution.scenario.spec.params.alpha
    _check_containment(solution, t0, x0, R)
    small = cylinder("I_minus", t0, x0, 0.5 * R, alpha)
    big = cylinder("I_minus", t0, x0, R, alpha)
    stf = solution.field
    t_idx, n_idx = resolve(small, stf.grid, stf.times, 4, 4)
    sup_small = float(np.maximum(stf.values[np.ix_(t_idx, n_idx)], 0.0).max())
    t_idx, n_idx = resolve(big, stf.grid, stf.times, 4, 4)
    rms_big = float(np.sqrt(np.mean(np.maximum(stf.values[np.ix_(t_idx, n_idx)], 0.0) ** 2)))
    a_b, b_b = big.time_window()
    tail_avg = _avg_tail(solution, alpha, R, x0, a_b, b_b, part="pos")
    right = rms_big + tail_avg
    const, flags = _constant(sup_small, right)
    return Report(
        inequality="local-boundedness",
        left=sup_small, right=right, constant=const,
        summands={"sup_half": sup_small, "rms": rms_big, "tail_pos_avg": tail_avg},
        params=_provenance(solution, t0, x0, R),
        flags=flags,
    )


def holder_report(solution, t0, x0, R, gammas=(0.1, 0.2, 0.5), eps=0.5,
                  target_pairs=10_000):
    """Parabolic Hoelder quotient sup over decimated pairs vs RMS + L^(1+eps) tail.

    Left per gamma: R^gamma * max over pairs in I-_R(t0) x B_R of
    |u(t,x)-u(s,y)| / (|t-s|^(1/alpha) + |x-y|)^gamma. Pairs come from an
    exhaustive scan of a decimated sub-lattice with >= target_pairs pairs.
    """
    alpha = solution.scenario.spec.params.alpha
    for gm in gammas:
        if not (0.0 < gm < 1.0):
            raise ConfigError(f"gamma must lie in (0, 1), got {gm}")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    _check_containment(solution, t0, x0, R, backward_only=True)
    stf = solution.field
    small = cylinder("I_minus", t0, x0, R, alpha)
    t_idx, n_idx = resolve(small, stf.grid, stf.times, 2, 2)
    pts, vals = _decimated_points(stf, t_idx, n_idx, target_pairs)
    dt_pow = np.abs(pts[:, None, 0] - pts[None, :, 0]) ** (1.0 / alpha)
    dx = np.linalg.norm(pts[:, None, 1:] - pts[None, :, 1:], axis=2)
    dist = dt_pow + dx
    dv = np.abs(vals[:, None] - vals[None, :])
    iu = np.triu_indices(len(vals), k=1)
    dist_u, dv_u = dist[iu], dv[iu]
    big = cylinder("I_minus", t0, x0, 2.0 * R, alpha)
    tb_idx, nb_idx = resolve(big, stf.grid, stf.times, 4, 4)
    rms = float(np.sqrt(np.mean(stf.values[np.ix_(tb_idx, nb_idx)] ** 2)))
    a_b, b_b = big.time_window()
    sub = _window_field(solution, a_b, b_b)
    tail_lp = tail_Lp_in_time(
        sub, alpha, 0.5 * R, x0, (a_b, b_b), p=1.0 + eps, part="abs", averaged=True
    )
    right = rms + tail_lp
    reports = []
    for gm in gammas:
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dist_u > 0, dv_u / dist_u ** gm, 0.0)
        left = float(R ** gm * q.max()) if q.size else 0.0
        const, flags = _constant(left, right)
        reports.append(Report(
            inequality="holder",
            left=left, right=right, constant=const,
            summands={"quotient_sup": left, "rms": rms, "tail_lp_avg": tail_lp,
                      "n_pairs": float(dv_u.size)},
            params=_provenance(solution, t0, x0, R, {"gamma": gm, "eps": eps}),
            flags=flags,
        ))
    return reports


def _decimated_points(stf, t_idx, n_idx, target_pairs):
    """Thin the (time, node) product so the all-pairs count is near target_pairs.

    The product lattice is flattened and sampled with a uniform stride, which
    spreads the kept points across both axes deterministically.
    """
    n_points = max(int(np.ceil(np.sqrt(2.0 * target_pairs))) + 1, 2)
    total = t_idx.size * n_idx.size
    stride = max(1, total // n_points)
    flat = np.arange(0, total, stride)
    ti, ni = np.divmod(flat, n_idx.size)
    grid = stf.grid
    pts = np.column_stack([
        stf.times[t_idx[ti]],
        grid.coords[n_idx[ni]].reshape(flat.size, -1),
    ])
    vals = stf.values[t_idx[ti], n_idx[ni]]
    return pts, vals


def axes_harnack(solution, t0, x0, R):
    """Harnack two-sider for the axes operator, with and without tail_axes."""
    sc = solution.scenario
    if sc.spec.structure != AXES_SINGULAR:
        raise StructureError("axes_harnack needs an axes-operator solution")
    alpha = sc.spec.params.alpha
    _check_containment(solution, t0, x0, R)
    _check_nonneg(solution, "global")
    back = cylinder("I_minus", t0 - R ** alpha, x0, R, alpha)
    fwd = cylinder("I_plus", t0, x0, R, alpha)
    sup_b = cyl_stats(solution, back, min_slices=2, min_nodes=2)[0]
    inf_f = cyl_stats(solution, fwd, min_slices=2, min_nodes=2)[1]
    win = cylinder("I_minus", t0, x0, R, alpha).time_window()
    sub = _window_field(solution, *win)
    series = np.array([
        tail_axes_fun(sub.field_at(i), alpha, R, x0) for i in range(sub.n_times)
    ])
    from .quadrature import trapezoid_partial

    tail_avg = trapezoid_partial(sub.times, series, *win) / (win[1] - win[0])
    free_const, free_flags = _constant(sup_b, inf_f)
    incl_const, incl_flags = _constant(sup_b, inf_f + tail_avg)
    return Report(
        inequality="axes-harnack",
        left=sup_b, right=inf_f + tail_avg, constant=incl_const,
        summands={
            "sup_backward": sup_b,
            "inf_forward": inf_f,
            "tail_axes_avg": tail_avg,
            "tail_free_constant": free_const,
        },
        params=_provenance(solution, t0, x0, R),
        flags=sorted(set(free_flags) | set(incl_flags)),
    )


# ---------------------------------------------------------------------------
# Iteration lemma utility.


@dataclass
class IterationReport:
    bound: float
    chain: np.ndarray
    tau: float
    hypothesis_ok: bool | None = None
    max_violation: float | None = None
    f_at_half: float | None = None

    @property
    def holds(self):
        return self.f_at_half is None or self.f_at_half <= self.bound + 1e-12


def iterate_absorb(A, B, C, gamma1, gamma2, theta, R, f_samples=None, depth=48):
    """Absorb the theta f(s) term through a geometric radius chain.

    Hypothesis: f(r) <= A (s-r)^(-gamma1) + B (s-r)^(-gamma2) + C + theta f(s)
    for R/2 <= r < s <= R. Chain r_i = R/2 + (R/2)(1 - tau^i) with tau chosen
    so theta tau^(-max(gamma1, gamma2)) < 1; summing the geometric series gives
    bound = A ((R/2)(1-tau))^(-gamma1) / (1 - theta tau^(-gamma1))
          + B ((R/2)(1-tau))^(-gamma2) / (1 - theta tau^(-gamma2))
          + C / (1 - theta).
    f_samples, if given as (radii, values) on [R/2, R], is checked against the
    hypothesis on all sampled pairs and against the conclusion at R/2.
    """
    if not (0.0 < theta < 1.0):
        raise ConfigError("theta must lie in (0, 1)")
    if gamma1 < 0 or gamma2 < 0 or R <= 0:
        raise ConfigError("need gamma1, gamma2 >= 0 and R > 0")
    gmax = max(gamma1, gamma2)
    tau = 0.5 if gmax == 0.0 else 0.5 * (1.0 + theta ** (1.0 / gmax))
    if theta * tau ** (-gmax) >= 1.0:
        raise ConfigError(f"no admissible chain ratio: theta={theta}, gamma={gmax}")
    step0 = 0.5 * R * (1.0 - tau)

    def geom(coef, gamma):
        if coef == 0.0:
            return 0.0
        return coef * step0 ** (-gamma) / (1.0 - theta * tau ** (-gamma))

    bound = geom(A, gamma1) + geom(B, gamma2) + C / (1.0 - theta)
    chain = 0.5 * R + 0.5 * R * (1.0 - tau ** np.arange(depth + 1))
    hypothesis_ok = None
    max_violation = None
    f_half = None
    if f_samples is not None:
        radii = np.asarray(f_samples[0], dtype=float)
        fvals = np.asarray(f_samples[1], dtype=float)
        order = np.argsort(radii)
        radii, fvals = radii[order], fvals[order]
        worst = -np.inf
        for i in range(radii.size):
            for j in range(i + 1, radii.size):
                gap = radii[j] - radii[i]
                if gap <= 0:
                    continue
                rhs = C + theta * fvals[j]
                if A:
                    rhs += A * gap ** (-gamma1)
                if B:
                    rhs += B * gap ** (-gamma2)
                worst = max(worst, fvals[i] - rhs)
        max_violation = float(worst) if np.isfinite(worst) else 0.0
        hypothesis_ok = max_violation <= 1e-9
        f_half = float(np.interp(0.5 * R, radii, fvals))
    return IterationReport(
        bound=float(bound), chain=chain, tau=float(tau),
        hypothesis_ok=hypothesis_ok, max_violation=max_violation, f_at_half=f_half,
    )
