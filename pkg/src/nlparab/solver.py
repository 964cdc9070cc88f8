"""Time stepping for the nonlocal parabolic equation with exterior data.

Explicit Euler is kept monotone (dt * max|A_ii| <= cfl_factor <= 1), which
makes the discrete comparison principle a structural fact rather than a
tolerance. Implicit Euler solves the symmetric positive definite system
(I - dt A) in increment form, so constant states produce an exactly zero
right-hand side and are preserved bit-for-bit by both schemes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import splu

from .errors import ConfigError, SolverError
from .grids import ConstantRule, Field, SpaceTimeField, SpatialRule, ZeroRule
from .operators import assemble_operator, energy_form


def uniform_times(t_start, t_end, n_steps):
    if n_steps < 1 or t_end <= t_start:
        raise ConfigError("need n_steps >= 1 and t_end > t_start")
    return np.linspace(t_start, t_end, n_steps + 1)


@dataclass
class Scenario:
    """One well-posed initial/exterior-value problem on a time interval."""

    spec: object
    grid: object
    t_start: float
    t_end: float
    initial: object
    g_terms: tuple = ()
    f_terms: tuple = ()
    times: np.ndarray | None = None
    dt: float | None = None
    n_steps: int | None = None

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ConfigError("scenario needs t_end > t_start")
        self.g_terms = tuple(self.g_terms)
        self.f_terms = tuple(self.f_terms)
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=float)
            if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
                raise ConfigError("scenario times must be increasing with >= 2 nodes")
            if abs(self.times[0] - self.t_start) > 1e-12 or abs(self.times[-1] - self.t_end) > 1e-12:
                raise ConfigError("scenario times must span [t_start, t_end]")
        elif self.dt is not None:
            n = int(round((self.t_end - self.t_start) / self.dt))
            if abs(n * self.dt - (self.t_end - self.t_start)) > 1e-9 * max(1.0, abs(self.t_end)):
                raise ConfigError("dt must divide the time interval")
            self.times = uniform_times(self.t_start, self.t_end, n)
        elif self.n_steps is not None:
            self.times = uniform_times(self.t_start, self.t_end, self.n_steps)
        else:
            raise ConfigError("scenario needs times, dt, or n_steps")

    def g_ring_values(self, t, ring_cache):
        vals = np.zeros(self.grid.ring.size)
        for k, (profile, _rule) in enumerate(self.g_terms):
            vals += profile.value(t) * ring_cache[k]
        return vals

    def initial_field(self):
        if isinstance(self.initial, Field):
            return self.initial
        if isinstance(self.initial, SpatialRule):
            return Field.from_rule(self.grid, self.initial, far=False)
        vals = np.asarray(self.initial, dtype=float)
        return Field(self.grid, vals)


@dataclass
class SolveOptions:
    scheme: str = "explicit"
    cfl_factor: float = 0.9
    stride: int = 1
    store_times: tuple = ()
    flag_times: tuple = ()
    allow_substepping: bool = True

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.cfl_factor <= 1.0):
            raise ConfigError("cfl_factor must lie in (0, 1]")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")


@dataclass
class Solution:
    """Stored slices of a computed solution plus a diagnostics ledger."""

    field: SpaceTimeField
    scenario: Scenario
    options: SolveOptions
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.field.times

    def field_at_time(self, t):
        i = int(np.argmin(np.abs(self.field.times - t)))
        if abs(self.field.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"time {t} not stored (nearest {self.field.times[i]})")
        return self.field.field_at(i)


def _scalar_far_terms(g_terms):
    """(profiles, values) when every exterior rule has a constant far value, else None."""
    out = []
    for profile, rule in g_terms:
        if isinstance(rule, ZeroRule):
            out.append((profile, 0.0))
        elif isinstance(rule, ConstantRule):
            out.append((profile, rule.value))
        else:
            return None
    return out


def solve(scenario, options=None):
    options = options or SolveOptions()
    sc = scenario
    grid, spec = sc.grid, sc.spec
    times = sc.times
    interior, ring = grid.interior, grid.ring

    ring_cache = [rule.evaluate(grid.coords[ring]) for _, rule in sc.g_terms]
    f_cache = [rule.evaluate(grid.coords[interior]) for _, rule in sc.f_terms]
    scalar_far = _scalar_far_terms(sc.g_terms)

    g0 = sc.g_ring_values(times[0], ring_cache)
    if isinstance(sc.initial, SpatialRule):
        # A rule prescribes u0 on the interior only; exterior comes from g.
        u_all = np.zeros(grid.n_nodes)
        u_all[interior] = sc.initial.evaluate(grid.coords[interior])
    else:
        u_all = sc.initial_field().values.copy()
        if u_all[ring].size and np.max(np.abs(u_all[ring] - g0)) > 1e-9:
            raise ConfigError("initial data disagrees with g(t_start) on exterior nodes")
    u_all[ring] = g0

    coeff_td = spec.coefficient.time_dependent
    op = assemble_operator(spec, grid, times[0])
    dt_max = options.cfl_factor / op.max_diag
    far_vec_cache = {}

    def far_at(t, current_op):
        if scalar_far is not None:
            return ("value", sum(p.value(t) * v for p, v in scalar_far))
        load = np.zeros(interior.size)
        for k, (profile, rule) in enumerate(sc.g_terms):
            w = profile.value(t)
            if w == 0.0:
                continue
            if k not in far_vec_cache:
                far_vec_cache[k] = current_op.project_rule(rule) - (
                    (current_op.W_all[:, ring] @ ring_cache[k])
                    if current_op.dense_path
                    else current_op.W_ring @ ring_cache[k]
                )
            load += w * far_vec_cache[k]
        return ("load", load)

    def f_at(t):
        if not sc.f_terms:
            return 0.0
        out = np.zeros(interior.size)
        for k, (profile, _rule) in enumerate(sc.f_terms):
            out += profile.value(t) * f_cache[k]
        return out

    store_now = {float(t) for t in options.store_times}
    flagged = {float(t) for t in options.flag_times}
    stored_t, stored_u, stored_flags = [], [], []

    def store(t):
        stored_t.append(t)
        stored_u.append(u_all.copy())
        stored_flags.append(_matches_any(t, flagged))

    store(times[0])
    mins, maxs = [float(u_all.min())], [float(u_all.max())]

    chol = None
    chol_key = None
    step_count = 0
    for n in range(len(times) - 1):
        ta, tb = float(times[n]), float(times[n + 1])
        if coeff_td and n > 0:
            op = assemble_operator(spec, grid, ta)
            dt_max = options.cfl_factor / op.max_diag
            far_vec_cache.clear()
        if options.scheme == "explicit":
            m = max(1, int(math.ceil((tb - ta) / dt_max - 1e-12)))
            if m > 1 and not options.allow_substepping:
                raise SolverError(
                    f"explicit dt = {tb - ta:.6g} exceeds the CFL limit "
                    f"{dt_max:.6g} (cfl_factor/max|A_ii|)",
                    step=n,
                    time=ta,
                )
            dt = (tb - ta) / m
            for j in range(m):
                t_now = ta + j * dt
                u_all[ring] = sc.g_ring_values(t_now, ring_cache)
                kind, far = far_at(t_now, op)
                incr = op.apply(
                    u_all,
                    far_value=far if kind == "value" else None,
                    far_load=far if kind == "load" else None,
                )
                u_all[interior] += dt * (incr + f_at(t_now))
                step_count += 1
            u_all[ring] = sc.g_ring_values(tb, ring_cache)
        else:
            dt = tb - ta
            u_all[ring] = sc.g_ring_values(tb, ring_cache)
            kind, far = far_at(tb, op)
            base = op.apply(
                u_all,
                far_value=far if kind == "value" else None,
                far_load=far if kind == "load" else None,
            )
            rhs = dt * (base + f_at(tb))
            key = (round(dt, 15), ta if coeff_td else None)
            if chol_key != key:
                if op.dense_path or not sp.issparse(op.A):
                    M = -dt * op.A
                    M[np.arange(M.shape[0]), np.arange(M.shape[0])] += 1.0
                    chol = ("dense", cho_factor(M, lower=True))
                else:
                    M = (sp.identity(op.A.shape[0], format="csc") - dt * op.A.tocsc())
                    chol = ("sparse", splu(M))
                chol_key = key
            if chol[0] == "dense":
                delta = cho_solve(chol[1], rhs)
            else:
                delta = chol[1].solve(rhs)
            u_all[interior] += delta
            step_count += 1
        if not np.all(np.isfinite(u_all[interior])):
            raise SolverError("non-finite state", step=n + 1, time=tb)
        if (n + 1) % options.stride == 0 or n + 1 == len(times) - 1 or _matches_any(tb, store_now | flagged):
            store(tb)
            mins.append(float(u_all.min()))
            maxs.append(float(u_all.max()))

    far_rules = tuple(rule for _, rule in sc.g_terms)
    far_weights = None
    if far_rules:
        far_weights = np.array(
            [[profile.value(t) for profile, _ in sc.g_terms] for t in stored_t]
        )
    stf = SpaceTimeField(
        grid, np.asarray(stored_t), np.asarray(stored_u),
        far_rules=far_rules, far_weights=far_weights,
    )
    diagnostics = {
        "scheme": options.scheme,
        "steps_taken": step_count,
        "schedule_nodes": len(times),
        "stride": options.stride,
        "max_diag": op.max_diag,
        "dt_max_explicit": dt_max,
        "min_per_stored": mins,
        "max_per_stored": maxs,
        "flagged_times": [t for t, f in zip(stored_t, stored_flags) if f],
        "truncation": op.meta.get("truncation", {}),
    }
    return Solution(field=stf, scenario=sc, options=options, diagnostics=diagnostics)


def _matches_any(t, targets, rel=1e-9):
    return any(abs(t - s) <= rel * max(1.0, abs(s)) for s in targets)


# ---------------------------------------------------------------------------
# Weak-form residual audit.


@dataclass
class ResidualReport:
    max_residual: float
    per_step: np.ndarray
    n_test_functions: int
    scheme: str


def _bump_values(grid, center, width_cells):
    """Tensor-product pyramid bump centered on a node, support width_cells*h."""
    w = width_cells * grid.h
    prof = np.maximum(0.0, 1.0 - np.abs(grid.coords - center) / w)
    return np.prod(prof, axis=1)


def default_test_family(grid, n_centers=5, widths=(2, 4)):
    """Interior-supported bumps at spread-out interior nodes, two widths each."""
    interior = grid.interior
    order = np.lexsort(tuple(grid.coords[interior].T))
    picks = [interior[order[int(round(q * (interior.size - 1)))]]
             for q in (0.15, 0.3, 0.5, 0.7, 0.85)][:n_centers]
    fam = []
    for pos in dict.fromkeys(picks):
        for w in widths:
            phi = _bump_values(grid, grid.coords[pos], w)
            phi[grid.ring] = 0.0
            if phi[grid.interior].max() > 0:
                fam.append(phi)
    return fam


def residual_check(solution, scenario=None, test_family=None):
    """Max weak-form defect |(d_t u, phi) + E(u, phi) - (f, phi)| over stored steps.

    The energy is evaluated at the time-endpoint opposite to the scheme's
    (state-wise), so the defect is O(dt) rather than identically zero, making
    this an audit of the scheme against the weak formulation instead of a
    re-execution of it.
    """
    sc = scenario or solution.scenario
    grid, spec = sc.grid, sc.spec
    if solution.options.stride != 1:
        raise ConfigError("residual_check needs a stride-1 solution")
    fam = test_family or default_test_family(grid)
    hd = grid.h ** grid.d
    stf = solution.field
    explicit = solution.options.scheme == "explicit"
    f_cache = [rule.evaluate(grid.coords) for _, rule in sc.f_terms]
    res = np.zeros(stf.n_times - 1)
    for n in range(stf.n_times - 1):
        ta, tb = stf.times[n], stf.times[n + 1]
        dt = tb - ta
        t_scheme, t_state = (ta, n + 1) if explicit else (tb, n)
        u_state = stf.field_at(t_state)
        du = (stf.values[n + 1] - stf.values[n])[grid.interior] / dt
        fvals = np.zeros(grid.n_nodes)
        for k, (profile, _rule) in enumerate(sc.f_terms):
            fvals += profile.value(t_scheme) * f_cache[k]
        worst = 0.0
        for phi in fam:
            e = energy_form(spec, grid, t_scheme, u_state, phi, region="full-cross")
            r = hd * float(np.dot(du, phi[grid.interior])) + e
            r -= hd * float(np.dot(fvals[grid.interior], phi[grid.interior]))
            worst = max(worst, abs(r))
        res[n] = worst
    return ResidualReport(
        max_residual=float(res.max()) if res.size else 0.0,
        per_step=res,
        n_test_functions=len(fam),
        scheme=solution.options.scheme,
    )


def comparison_check(scenario_low, scenario_high, options=None, tol=1e-12):
    """Solve both and verify u_low <= u_high + tol at every stored node/time."""
    if scenario_low.grid is not scenario_high.grid:
        raise ConfigError("comparison needs a shared grid")
    if not np.array_equal(scenario_low.times, scenario_high.times):
        raise ConfigError("comparison needs a shared time schedule")
    lo = solve(scenario_low, options)
    hi = solve(scenario_high, options)
    gap = float(np.max(lo.field.values - hi.field.values))
    return gap <= tol, gap, lo, hi


# ---------------------------------------------------------------------------
# CSV export (deterministic formatting shared by the experiment drivers).


def format_float(x):
    """Shortest round-trip decimal form; the single formatter for all CSVs."""
    return repr(float(x))


def write_text_atomic(path, text):
    """Write text via temp file + rename so readers never see partial output."""
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json_atomic(path, obj):
    """Atomic JSON dump with sorted keys; floats keep their repr round-trip."""
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_csv_atomic(path, header, rows):
    """Write CSV via temp file + rename; every cell passes through format_float."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else format_float(c) for c in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def export_solution_csv(stf, path):
    """Dump a SpaceTimeField as rows (t, x1[, x2], u), times outermost."""
    grid = stf.grid
    header = ["t", "x1", "u"] if grid.d == 1 else ["t", "x1", "x2", "u"]
    def rows():
        for i, t in enumerate(stf.times):
            for p in range(grid.n_nodes):
                coords = [grid.coords[p, k] for k in range(grid.d)]
                yield [t, *coords, stf.values[i, p]]
    write_csv_atomic(path, header, rows())
