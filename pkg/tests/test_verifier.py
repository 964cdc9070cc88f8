"""Inequality reports on known solutions with hand-computable two-siders.

The constant-one solution is the main oracle: every cylinder statistic is 1
and every tail over radius R is the exact constant-field tail, so each op's
left/right decomposition can be checked summand by summand.
"""

import numpy as np
import pytest

from nlparab.errors import ConfigError, GridError, StructureError
from nlparab.grids import (
    BallIndicator,
    ConstantProfile,
    ConstantRule,
    Field,
    GaussianRule,
    Grid,
    SpaceTimeField,
    ZeroRule,
)
from nlparab.kernels import FracParams, KernelSpec
from nlparab.solver import Scenario, SolveOptions, Solution, solve
from nlparab.verifier import (
    axes_harnack,
    harnack_quotient,
    harnack_with_tails,
    holder_report,
    iterate_absorb,
    locbd_ratio,
    weak_harnack_ratio,
)

T0, X0, R = 4.5, [0.0], 1.0


@pytest.fixture(scope="module")
def grid_wide():
    return Grid(1, 4.5, 6.0, 0.125)


def ones_scenario(grid, level=1.0):
    return Scenario(
        KernelSpec(FracParams(1, 1.0)), grid, 0.0, 9.0,
        initial=Field.constant(grid, level),
        g_terms=((ConstantProfile(1.0), ConstantRule(level)),),
        n_steps=90,
    )


@pytest.fixture(scope="module")
def sol_one(grid_wide):
    return solve(ones_scenario(grid_wide), SolveOptions(scheme="implicit"))


@pytest.fixture(scope="module")
def sol_zero(grid_wide):
    sc = Scenario(
        KernelSpec(FracParams(1, 1.0)), grid_wide, 0.0, 9.0,
        initial=ZeroRule(), g_terms=((ConstantProfile(1.0), ZeroRule()),),
        n_steps=90,
    )
    return solve(sc, SolveOptions(scheme="implicit"))


def handmade(grid, values_fn):
    """Solution wrapper around prescribed slice values (no time stepping)."""
    sc = ones_scenario(grid)
    vals = np.array([values_fn(t) for t in sc.times])
    stf = SpaceTimeField(grid, sc.times, vals)
    return Solution(field=stf, scenario=sc, options=SolveOptions(), diagnostics={})


def test_harnack_on_constant(sol_one):
    rep = harnack_quotient(sol_one, T0, X0, R)
    assert rep.constant == pytest.approx(1.0, abs=1e-9)
    assert rep.left == pytest.approx(1.0, abs=1e-9)
    assert rep.flags == []
    assert rep.finite


def test_weak_harnack_on_constant(sol_one):
    # mean 1 plus the exact tail of the constant field (2 at alpha=1, R=1)
    # against forward inf 1.
    rep = weak_harnack_ratio(sol_one, T0, X0, R)
    assert rep.summands["tail_avg"] == pytest.approx(2.0, abs=1e-9)
    assert rep.constant == pytest.approx(3.0, abs=1e-6)


def test_harnack_with_tails_on_constant(sol_one):
    rep = harnack_with_tails(sol_one, T0, X0, R)
    assert rep.left == pytest.approx(3.0, abs=1e-6)
    assert rep.summands["tail_neg_avg"] == 0.0
    assert rep.constant == pytest.approx(3.0, abs=1e-6)


def test_locbd_on_constant(sol_one):
    rep = locbd_ratio(sol_one, T0, X0, R)
    assert rep.summands["rms"] == pytest.approx(1.0, abs=1e-9)
    assert rep.constant == pytest.approx(1.0 / 3.0, abs=1e-6)
    assert rep.constant <= 1.0


def test_holder_on_constant(sol_one):
    reps = holder_report(sol_one, T0, X0, R)
    assert len(reps) == 3
    for rep in reps:
        assert rep.left == 0.0
        assert rep.constant == 0.0
        assert rep.flags == []
        assert rep.summands["n_pairs"] > 0


def test_report_row_layout(sol_one):
    row = harnack_quotient(sol_one, T0, X0, R).to_row()
    assert row["inequality"] == "harnack"
    assert row["flags"] == ""
    assert "summand_sup_backward" in row
    assert row["param_alpha"] == 1.0
    assert row["param_R"] == R


def test_zero_solution_degenerates(sol_zero):
    for op in (harnack_quotient, weak_harnack_ratio, harnack_with_tails, locbd_ratio):
        rep = op(sol_zero, T0, X0, R)
        assert "degenerate" in rep.flags
        assert not rep.finite
    for rep in holder_report(sol_zero, T0, X0, R):
        assert "degenerate" in rep.flags


def test_vanishing_forward_inf_flags_infinite(grid_wide):
    sol = handmade(
        grid_wide,
        lambda t: np.ones(grid_wide.n_nodes) if t <= T0 else np.zeros(grid_wide.n_nodes),
    )
    rep = harnack_quotient(sol, T0, X0, R)
    assert rep.flags == ["infinite-constant"]
    assert rep.constant == np.inf
    assert not rep.finite


def test_containment_guard(sol_one):
    with pytest.raises(GridError):
        harnack_quotient(sol_one, T0, [2.0], R)  # B_4R pokes out of the domain
    with pytest.raises(GridError):
        harnack_quotient(sol_one, 1.0, X0, R)  # window starts before t_start


def test_negativity_guard(grid_wide):
    ring = grid_wide.ring

    def slices(_t):
        v = np.ones(grid_wide.n_nodes)
        v[ring] = -0.5
        return v

    sol = handmade(grid_wide, slices)
    with pytest.raises(StructureError):
        harnack_quotient(sol, T0, X0, R)  # global sign check sees the exterior
    rep = harnack_with_tails(sol, T0, X0, R)  # interior-only check passes
    assert rep.finite
    assert rep.summands["tail_neg_avg"] > 0.0


def test_holder_parameter_validation(sol_one):
    with pytest.raises(ConfigError):
        holder_report(sol_one, T0, X0, R, gammas=(1.5,))
    with pytest.raises(ConfigError):
        holder_report(sol_one, T0, X0, R, gammas=(0.0,))
    with pytest.raises(ConfigError):
        holder_report(sol_one, T0, X0, R, eps=0.0)


# ---------------------------------------------------------------------------
# Scaling audit: a dyadic parabolic rescale maps the discretization onto
# itself node for node, so the measured constants must agree.


def gaussian_solution(x_omega, sigma, t_end, n_steps):
    grid = Grid(1, x_omega, 2.0 * x_omega, x_omega / 64.0)
    sc = Scenario(
        KernelSpec(FracParams(1, 1.0)), grid, 0.0, t_end,
        initial=GaussianRule(1.0, sigma),
        g_terms=((ConstantProfile(1.0), ZeroRule()),),
        n_steps=n_steps,
    )
    return solve(sc, SolveOptions(scheme="implicit"))


def test_scaling_audit():
    base = gaussian_solution(2.0, 0.25, 2.2, 55)
    scaled = gaussian_solution(1.0, 0.125, 1.1, 55)
    c_base = harnack_quotient(base, 1.1, [0.0], 0.25).constant
    c_scaled = harnack_quotient(scaled, 0.55, [0.0], 0.125).constant
    assert abs(c_scaled / c_base - 1.0) <= 0.15


def test_mean_below_sup(grid_wide):
    sol = gaussian_solution(2.0, 0.25, 2.2, 55)
    sup = harnack_quotient(sol, 1.1, [0.0], 0.25).summands["sup_backward"]
    mean = weak_harnack_ratio(sol, 1.1, [0.0], 0.25).summands["mean_backward"]
    assert mean <= sup + 1e-12


# ---------------------------------------------------------------------------
# Axes operator.


@pytest.fixture(scope="module")
def axes_grid_box():
    return Grid(2, 1.25, 2.5, 0.125, domain="box")


def axes_scenario(grid, initial, g_rule):
    spec = KernelSpec(FracParams(2, 1.0), structure="axes_singular")
    return Scenario(
        spec, grid, 0.0, 2.6,
        initial=initial, g_terms=((ConstantProfile(1.0), g_rule),),
        n_steps=40,
    )


def test_axes_harnack_on_constant(axes_grid_box):
    grid = axes_grid_box
    sc = axes_scenario(grid, Field.constant(grid, 1.0), ConstantRule(1.0))
    sol = solve(sc, SolveOptions(scheme="implicit"))
    rep = axes_harnack(sol, 1.3, [0.0, 0.0], 0.3125)
    assert rep.summands["tail_free_constant"] == pytest.approx(1.0, abs=1e-8)
    # At the center the four half-line tails integrate to exactly 4/R scaled
    # by R^alpha; boundary rows only push the sup up.
    assert rep.summands["tail_axes_avg"] >= 4.0 - 1e-9
    assert rep.constant < 0.5
    assert rep.flags == []


def test_axes_harnack_axis_supported_data(axes_grid_box):
    grid = axes_grid_box
    sc = axes_scenario(grid, ZeroRule(), BallIndicator([1.5, 0.0], 0.2))
    sol = solve(sc, SolveOptions(scheme="implicit"))
    rep = axes_harnack(sol, 1.3, [0.0, 0.0], 0.3125)
    assert rep.finite
    assert rep.left > 0.0
    assert rep.right > 0.0
    assert rep.summands["inf_forward"] > 0.0


def test_axes_harnack_requires_axes_structure(sol_one):
    with pytest.raises(StructureError):
        axes_harnack(sol_one, T0, X0, R)


# ---------------------------------------------------------------------------
# Iteration lemma.


def test_iteration_pure_absorption_bound():
    rep = iterate_absorb(0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 1.0)
    assert rep.bound == 2.0
    assert rep.tau == 0.5
    assert rep.chain[0] == 0.5
    assert np.all(np.diff(rep.chain) > 0)
    assert rep.chain[-1] <= 1.0


def test_iteration_zero_function_holds():
    radii = np.linspace(0.5, 1.0, 9)
    rep = iterate_absorb(1.0, 0.0, 0.0, 0.5, 0.0, 0.5, 1.0,
                         f_samples=(radii, np.zeros_like(radii)))
    assert rep.hypothesis_ok
    assert rep.holds
    assert rep.f_at_half == 0.0


def test_iteration_blowup_function_absorbed():
    # f(r) = rho/(1-r) satisfies f(r) <= 2 rho (s-r)^-1 + f(s)/2 on [1/2, 1):
    # with u = 1-r, v = 1-s the claim 1/u - 1/(2v) <= 2/(u-v) reduces to
    # 3uv - 2v^2 - u^2 <= 4uv, which holds since u, v > 0.
    rho = 0.3
    radii = np.linspace(0.5, 0.96, 24)
    vals = rho / (1.0 - radii)
    rep = iterate_absorb(2.0 * rho, 0.0, 0.0, 1.0, 0.0, 0.5, 1.0,
                         f_samples=(radii, vals))
    assert rep.hypothesis_ok
    assert rep.max_violation <= 1e-9
    # tau = 3/4, step0 = 1/8: bound = 2 rho * 8 / (1 - 2/3) = 48 rho.
    assert rep.bound == pytest.approx(48.0 * rho, rel=1e-12)
    assert rep.f_at_half == pytest.approx(2.0 * rho, rel=1e-12)
    assert rep.holds


def test_iteration_detects_violation():
    radii = np.array([0.5, 0.94, 0.96])
    vals = 1.0 / (1.0 - radii) ** 2
    rep = iterate_absorb(0.01, 0.0, 0.0, 1.0, 0.0, 0.1, 1.0,
                         f_samples=(radii, vals))
    assert rep.hypothesis_ok is False
    assert rep.max_violation > 0.0


def test_iteration_parameter_validation():
    with pytest.raises(ConfigError):
        iterate_absorb(1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        iterate_absorb(1.0, 0.0, 0.0, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        iterate_absorb(1.0, 0.0, 0.0, -0.5, 0.0, 0.5, 1.0)
    with pytest.raises(ConfigError):
        iterate_absorb(1.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0)
