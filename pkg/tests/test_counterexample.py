"""Blow-up construction: admissible level, certificates, tail integrability split.

The data level arithmetic is closed-form (power integrals over the annulus),
so those tests pin exact fractions. The solved pipeline is deterministic with
the explicit scheme, so decade-level partial tail integrals are frozen to the
digit; they were cross-checked against direct quadrature of the exact data
tail delta*f*tail(1) + f'*annulus_mass, which the discrete series reproduces
to rounding.
"""

import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad

from nlparab.counterexample import (
    CounterexampleSpec,
    annulus_kernel_mass,
    certify_failure,
    certify_lower_bound,
    compute_delta,
    export_pointwise_csv,
    export_tail_csv,
    holder_lower_bound,
    partial_growth,
    run_counterexample,
)
from nlparab.errors import CertificateError, ConfigError, GridError
from nlparab.grids import Grid
from nlparab.kernels import FracParams

P1 = FracParams(1, 1.0)


def test_annulus_mass_exact_fractions():
    assert annulus_kernel_mass(P1, 0.0) == pytest.approx(1.0 / 3.0, rel=1e-14)
    assert annulus_kernel_mass(P1, 1.0) == pytest.approx(7.0 / 12.0, rel=1e-14)


def test_annulus_mass_matches_quadrature():
    p = FracParams(1, 1.5)
    x = 0.4
    ref = sum(
        quad(lambda y: p.norm_const * abs(x - y) ** (-1.0 - p.alpha), a, b)[0]
        for a, b in ((2.0, 3.0), (-3.0, -2.0))
    )
    assert annulus_kernel_mass(p, x) == pytest.approx(ref, rel=1e-10)


def test_unit_tail_constant():
    from nlparab.counterexample import unit_tail_constant

    assert unit_tail_constant(P1) == pytest.approx(2.0, rel=1e-14)
    assert unit_tail_constant(FracParams(1, 0.5)) == pytest.approx(6.0, rel=1e-14)


def test_compute_delta_value_and_guards():
    grid = Grid(1, 1.0, 3.0, 1.0 / 16.0)
    # Min of the convex symmetric mass profile sits at the origin node.
    assert compute_delta(P1, grid) == pytest.approx(1.0 / 3.0, rel=1e-14)
    with pytest.raises(ConfigError):
        compute_delta(FracParams(2, 1.0), grid)
    with pytest.raises(GridError):
        compute_delta(P1, Grid(2, 1.0, 3.0, 0.125))
    with pytest.raises(GridError):
        compute_delta(P1, Grid(1, 1.0, 3.0, 0.125))  # too coarse
    with pytest.raises(GridError):
        compute_delta(P1, Grid(1, 1.0, 2.0, 1.0 / 16.0))  # misses the annulus


def test_spec_defaults_and_margin():
    cs = CounterexampleSpec(P1)
    assert cs.delta == pytest.approx(cs.delta_star / 2.0, rel=1e-14)
    assert cs.certificate_margin == pytest.approx(cs.delta_star / 2.0, rel=1e-14)
    assert cs.k_onset() == 1
    ks = [k for k, _ in cs.dyadic_times()]
    assert ks[0] == 1 and ks[-1] == cs.k_max


def test_spec_validation():
    with pytest.raises(CertificateError):
        CounterexampleSpec(P1, delta=0.2)  # above delta_star/2
    with pytest.raises(CertificateError):
        CounterexampleSpec(P1, delta=-0.1)
    with pytest.raises(ConfigError):
        CounterexampleSpec(FracParams(2, 1.0))
    with pytest.raises(ConfigError):
        CounterexampleSpec(FracParams(1, 1.0, lam=0.5, Lam=2.0))
    with pytest.raises(ConfigError):
        CounterexampleSpec(P1, t_end=1.0)
    with pytest.raises(ConfigError):
        CounterexampleSpec(P1, k_max=9)
    with pytest.raises(ConfigError):
        CounterexampleSpec(P1, per_level=0)
    with pytest.raises(ConfigError):
        CounterexampleSpec(P1, scheme="midpoint")


def test_holder_minorant_diverges():
    cs = CounterexampleSpec(P1)
    vals = [holder_lower_bound(cs, 0.2, k) for k in range(20, 41)]
    assert np.all(np.diff(vals) > 0.0)
    assert vals[0] == pytest.approx(0.013875793206704054, rel=1e-12)
    assert vals[-1] == pytest.approx(0.055503172826816216, rel=1e-12)
    # Below k* = 2/(gamma log 2) the minorant still decreases.
    assert holder_lower_bound(cs, 0.2, 5) > holder_lower_bound(cs, 0.2, 10)


def test_partial_growth_synthetic():
    partials = [{"k": 10, 0.5: 1.0}, {"k": 20, 0.5: 2.0}, {"k": 30, 0.5: 4.0}]
    assert partial_growth(partials, 0.5) == 2.0
    assert partial_growth(partials, 0.5, 10, 20, 30) == 2.0
    flat = [{"k": 10, 0.5: 1.0}, {"k": 20, 0.5: 1.0}, {"k": 30, 0.5: 2.0}]
    assert partial_growth(flat, 0.5) == math.inf


@pytest.fixture(scope="module")
def default_run():
    cs = CounterexampleSpec(P1)
    return cs, run_counterexample(cs)


def test_lower_bound_certificate(default_run):
    cs, sol = default_run
    report = certify_lower_bound(sol, cs)
    assert report.holds
    assert report.monotone_ok
    assert all(margin >= 0.0 for *_, margin in report.rows)
    ks_sampled = len(report.rows)
    assert ks_sampled == 9  # k = 4..12


def test_failure_certificate(default_run):
    cs, sol = default_run
    report = certify_failure(sol, cs)
    assert report.holds
    assert report.checks == {
        "holder_lower_bound_diverges": True,
        "tail_sandwich": True,
        "l1_tail_converges": True,
        "lp_partials_increase": True,
    }
    for row in report.pointwise:
        # Deep levels trail the exact minorant by the local time-step error;
        # the budgeted certificate covers k <= 12 and is checked elsewhere.
        if row["k"] <= 12:
            assert row["u0"] >= row["lower"] - 1e-12


def test_decade_partials_frozen(default_run):
    cs, sol = default_run
    report = certify_failure(sol, cs)
    vals = {r["k"]: r for r in report.partials}
    assert vals[10]["l1"] == pytest.approx(0.7552096527240524, rel=1e-10)
    assert vals[20]["l1"] == pytest.approx(0.7600840048866594, rel=1e-10)
    assert vals[30]["l1"] == pytest.approx(0.7609865608963264, rel=1e-10)
    assert vals[10][0.5] == pytest.approx(1.085749540170805, rel=1e-10)
    assert vals[20][0.5] == pytest.approx(1.1038584853968296, rel=1e-10)
    assert vals[30][0.5] == pytest.approx(1.1649547660454749, rel=1e-10)
    growth = partial_growth(report.partials, 0.5, 10, 20, 30)
    assert growth == pytest.approx(3.3738177395800544, rel=1e-10)
    # The L^1 partials gained ~8e-4 over the same decades: convergent tail.
    assert vals[30]["l1"] - vals[10]["l1"] < 0.01


def test_k_range_validation(default_run):
    cs, sol = default_run
    with pytest.raises(ConfigError):
        certify_failure(sol, cs, k_range=range(4, 9))  # fewer than 6 levels
    with pytest.raises(ConfigError):
        certify_failure(sol, cs, k_range=range(20, 35))  # leaves the schedule


def test_csv_exports(default_run, tmp_path):
    cs, sol = default_run
    report = certify_failure(sol, cs)
    pw, tl = tmp_path / "pointwise.csv", tmp_path / "tails.csv"
    export_pointwise_csv(report, str(pw))
    export_tail_csv(report, str(tl))
    with open(pw) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["k", "t_k", "u_origin", "delta_f"]
    assert "q_0.5" in rows[0] and "q_0.5_lower" in rows[0]
    assert len(rows) == 1 + len(report.pointwise)
    float(rows[1][1])  # cells parse
    with open(tl) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "k" and rows[0][1] == "partial_l1_tail"
    assert len(rows) == 1 + len(report.partials)
