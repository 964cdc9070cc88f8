"""Time stepping: exactness on constants, comparison, residual order, CFL."""

import numpy as np
import pytest

from nlparab.errors import ConfigError, SolverError
from nlparab.grids import (
    ConstantProfile,
    ConstantRule,
    Field,
    GaussianRule,
    Grid,
    ZeroRule,
)
from nlparab.kernels import FracParams, KernelSpec
from nlparab.solver import (
    Scenario,
    SolveOptions,
    comparison_check,
    residual_check,
    solve,
    uniform_times,
)


def spec_1d(alpha=1.0):
    return KernelSpec(FracParams(1, alpha))


def constant_scenario(grid, level=1.0, t_end=0.5, n_steps=8):
    return Scenario(
        spec_1d(), grid, 0.0, t_end,
        initial=Field.constant(grid, level),
        g_terms=((ConstantProfile(1.0), ConstantRule(level)),),
        n_steps=n_steps,
    )


def gaussian_scenario(grid, t_end=0.5, n_steps=20, amplitude=1.0):
    return Scenario(
        spec_1d(1.5), grid, 0.0, t_end,
        initial=GaussianRule(amplitude, 0.25),
        g_terms=((ConstantProfile(1.0), ZeroRule()),),
        n_steps=n_steps,
    )


def test_uniform_times():
    t = uniform_times(0.0, 1.0, 4)
    np.testing.assert_allclose(t, [0.0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ConfigError):
        uniform_times(1.0, 0.0, 4)


def test_scenario_validation(grid_1d):
    with pytest.raises(ConfigError):
        Scenario(spec_1d(), grid_1d, 1.0, 0.5, initial=ZeroRule(), n_steps=4)
    with pytest.raises(ConfigError):
        Scenario(spec_1d(), grid_1d, 0.0, 1.0, initial=ZeroRule(),
                 times=np.array([0.0, 0.5, 0.9]))
    with pytest.raises(ConfigError):
        Scenario(spec_1d(), grid_1d, 0.0, 1.0, initial=ZeroRule(), dt=0.3)
    with pytest.raises(ConfigError):
        Scenario(spec_1d(), grid_1d, 0.0, 1.0, initial=ZeroRule())


def test_initial_must_match_exterior(grid_1d):
    # Field initial data carries exterior node values; they must agree with g.
    with pytest.raises(ConfigError):
        solve(Scenario(
            spec_1d(), grid_1d, 0.0, 0.5,
            initial=Field.constant(grid_1d, 1.0),
            g_terms=((ConstantProfile(1.0), ConstantRule(2.0)),),
            n_steps=4,
        ))


@pytest.mark.parametrize("scheme", ["explicit", "implicit"])
def test_constant_preserved_exactly(grid_1d_fine, scheme):
    sol = solve(constant_scenario(grid_1d_fine), SolveOptions(scheme=scheme))
    assert float(np.max(np.abs(sol.field.values - 1.0))) <= 1e-12


@pytest.mark.parametrize("scheme", ["explicit", "implicit"])
def test_nonnegativity_and_decay(grid_1d_fine, scheme):
    sol = solve(gaussian_scenario(grid_1d_fine), SolveOptions(scheme=scheme))
    assert float(sol.field.values.min()) >= -1e-12
    # With zero exterior and no source the running max cannot grow.
    maxs = sol.diagnostics["max_per_stored"]
    assert all(b <= a + 1e-12 for a, b in zip(maxs, maxs[1:]))


def test_comparison_orders_solutions(grid_1d_fine):
    lo = Scenario(
        spec_1d(1.5), grid_1d_fine, 0.0, 0.5,
        initial=ZeroRule(), g_terms=((ConstantProfile(1.0), ZeroRule()),),
        n_steps=20,
    )
    hi = gaussian_scenario(grid_1d_fine)
    ok, gap, sol_lo, sol_hi = comparison_check(lo, hi)
    assert ok
    assert gap <= 1e-12
    assert sol_lo.field.values.shape == sol_hi.field.values.shape


def test_comparison_requires_shared_discretization(grid_1d_fine):
    other_grid = Grid(1, 1.0, 3.0, 1.0 / 16.0)
    a = gaussian_scenario(grid_1d_fine)
    b = gaussian_scenario(other_grid)
    with pytest.raises(ConfigError):
        comparison_check(a, b)
    c = gaussian_scenario(grid_1d_fine, n_steps=10)
    with pytest.raises(ConfigError):
        comparison_check(a, c)


def test_residual_first_order_in_dt(grid_1d_fine):
    coarse = solve(gaussian_scenario(grid_1d_fine, n_steps=20), SolveOptions(scheme="implicit"))
    fine = solve(gaussian_scenario(grid_1d_fine, n_steps=40), SolveOptions(scheme="implicit"))
    rc = residual_check(coarse)
    rf = residual_check(fine)
    assert rc.n_test_functions > 0
    assert rc.max_residual > 0.0
    # Backward-Euler defect against the opposite-endpoint weak form is O(dt).
    # Compare at the final step, past the initial layer where the defect
    # constant itself still moves on the dt scale.
    assert 1.7 <= rc.per_step[-1] / rf.per_step[-1] <= 2.3


def test_deterministic_replay(grid_1d_fine):
    a = solve(gaussian_scenario(grid_1d_fine))
    b = solve(gaussian_scenario(grid_1d_fine))
    assert np.array_equal(a.field.values, b.field.values)


def test_cfl_refusal_without_substepping(grid_1d_fine):
    sc = gaussian_scenario(grid_1d_fine, n_steps=4)  # dt far above the CFL limit
    with pytest.raises(SolverError) as exc:
        solve(sc, SolveOptions(scheme="explicit", allow_substepping=False))
    assert exc.value.step == 0
    assert "CFL" in str(exc.value)


def test_cfl_substepping_default(grid_1d_fine):
    sc = gaussian_scenario(grid_1d_fine, n_steps=4)
    sol = solve(sc, SolveOptions(scheme="explicit"))
    assert sol.diagnostics["steps_taken"] > 4
    assert float(sol.field.values.min()) >= -1e-12


def test_stride_and_store_times(grid_1d_fine):
    sc = gaussian_scenario(grid_1d_fine, t_end=1.0, n_steps=10)
    sol = solve(sc, SolveOptions(scheme="implicit", stride=5, store_times=(0.3,)))
    stored = sol.field.times
    assert 0.0 in stored and 1.0 in stored
    assert 0.5 in stored  # stride hit
    assert np.any(np.isclose(stored, 0.3))  # forced store
    assert stored.size == 4
    f = sol.field_at_time(0.3)
    assert f.values.shape == (grid_1d_fine.n_nodes,)
    with pytest.raises(ConfigError):
        sol.field_at_time(0.77)


def test_solve_options_validation():
    with pytest.raises(ConfigError):
        SolveOptions(scheme="leapfrog")
    with pytest.raises(ConfigError):
        SolveOptions(cfl_factor=0.0)
    with pytest.raises(ConfigError):
        SolveOptions(stride=0)


def test_flag_times_recorded(grid_1d_fine):
    sc = gaussian_scenario(grid_1d_fine, t_end=1.0, n_steps=10)
    sol = solve(sc, SolveOptions(scheme="implicit", flag_times=(0.4,)))
    flagged = sol.diagnostics["flagged_times"]
    assert len(flagged) == 1 and abs(flagged[0] - 0.4) < 1e-9
