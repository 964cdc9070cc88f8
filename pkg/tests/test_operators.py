"""Discretized operator: consistency, structure, energies and seminorms.

The cos test pins the operator against the classical value: with the
(2 - alpha) normalization and alpha = 1, applying -L to cos at the origin
must approach integral of (1 - cos y)/y^2 = pi.
"""

import numpy as np
import pytest

from nlparab.grids import ConstantRule, Field, Grid, cosine_rule
from nlparab.kernels import (
    CheckerboardCoefficient,
    FracParams,
    KernelSpec,
)
from nlparab.operators import (
    apply_L_at,
    assemble_axes_operator,
    assemble_operator,
    energy_form,
    norm_L1alpha,
    norm_V,
    pure_rows,
    seminorm_H,
    seminorm_V,
)

from conftest import make_spec


def cos_error(h, r_trunc=16.0):
    grid = Grid(1, 1.0, r_trunc, h)
    spec = KernelSpec(FracParams(1, 1.0))
    fld = Field.from_rule(grid, cosine_rule())
    val = -apply_L_at(spec, grid, 0.0, fld, grid.node_at([0.0]))
    return abs(val - np.pi)


def test_cos_consistency_frozen_errors():
    e7 = cos_error(2.0 ** -7)
    e8 = cos_error(2.0 ** -8)
    assert e7 == pytest.approx(3.898248883817068e-3, rel=1e-9)
    assert e8 == pytest.approx(1.951127222298954e-3, rel=1e-9)
    # First-order consistency: halving h halves the error.
    assert 1.8 <= e7 / e8 <= 2.2


def test_constants_annihilated_dense(grid_1d_fine):
    spec = make_spec(1, 1.3)
    op = assemble_operator(spec, grid_1d_fine)
    out = op.apply(np.ones(grid_1d_fine.n_nodes), far_value=1.0)
    # The difference form makes this exact, not just small.
    assert np.all(out == 0.0)


def test_constants_annihilated_axes():
    grid = Grid(2, 1.0, 2.0, 0.25, domain="box")
    spec = make_spec(2, 1.0, structure="axes_singular")
    op = assemble_axes_operator(spec, grid)
    out = op.apply(np.ones(grid.n_nodes), far_value=1.0)
    assert np.max(np.abs(out)) <= 1e-10 * op.max_diag


def test_m_matrix_structure(grid_1d):
    op = assemble_operator(make_spec(1, 1.5), grid_1d)
    n = grid_1d.n_interior
    offdiag = op.A[~np.eye(n, dtype=bool)]
    assert np.all(offdiag >= 0.0)
    assert np.all(np.diag(op.A) < 0.0)
    assert np.all(op.far_c > 0.0)
    assert op.max_diag == pytest.approx(float(np.max(-np.diag(op.A))))


def test_interior_block_symmetric():
    grid = Grid(1, 1.0, 3.0, 0.125)
    coeff = CheckerboardCoefficient(0.25, 0.5, 2.0)
    op = assemble_operator(make_spec(1, 1.2, lam=0.5, Lam=2.0, coefficient=coeff), grid)
    np.testing.assert_allclose(op.A, op.A.T, rtol=1e-12, atol=1e-12)


def test_apply_matches_pointwise(grid_1d_fine):
    coeff = CheckerboardCoefficient(0.25, 0.5, 2.0)
    spec = make_spec(1, 1.4, lam=0.5, Lam=2.0, coefficient=coeff)
    rng = np.random.default_rng(5)
    vals = rng.standard_normal(grid_1d_fine.n_nodes)
    fld = Field(grid_1d_fine, vals, far_terms=((0.7, ConstantRule(1.0)),))
    op = assemble_operator(spec, grid_1d_fine)
    out = op.apply(vals, far_value=0.7)
    for k, pos in enumerate(grid_1d_fine.interior[::3]):
        direct = apply_L_at(spec, grid_1d_fine, 0.0, fld, pos)
        assert out[3 * k] == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_axes_couplings_are_axis_aligned():
    grid = Grid(2, 1.0, 2.0, 0.25, domain="box")
    op = assemble_axes_operator(make_spec(2, 1.0, structure="axes_singular"), grid)
    A = op.A.tocoo()
    for r, c in zip(A.row, A.col):
        xi = grid.coords[grid.interior[r]]
        xj = grid.coords[grid.interior[c]]
        assert xi[0] == xj[0] or xi[1] == xj[1]
    W = op.W_ring.tocoo()
    for r, c in zip(W.row, W.col):
        xi = grid.coords[grid.interior[r]]
        xj = grid.coords[grid.ring[c]]
        assert xi[0] == xj[0] or xi[1] == xj[1]


def test_energy_form_symmetric_and_nonnegative(grid_1d):
    spec = make_spec(1, 1.0)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(grid_1d.n_nodes)
    v = rng.standard_normal(grid_1d.n_nodes)
    assert energy_form(spec, grid_1d, 0.0, u, v) == pytest.approx(
        energy_form(spec, grid_1d, 0.0, v, u), rel=1e-12
    )
    assert energy_form(spec, grid_1d, 0.0, u, u) >= 0.0


def test_energy_form_is_weak_pairing(grid_1d):
    # E(u, phi) = (-L_h u, phi)_h for phi supported in the interior; this
    # ties the quadratic form to the assembled operator.
    spec = make_spec(1, 1.5)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(grid_1d.n_nodes)
    phi = np.zeros(grid_1d.n_nodes)
    phi[grid_1d.interior] = rng.standard_normal(grid_1d.n_interior)
    op = assemble_operator(spec, grid_1d)
    lhs = energy_form(spec, grid_1d, 0.0, u, phi)
    rhs = grid_1d.h * float(np.dot(-op.apply(u, far_value=0.0), phi[grid_1d.interior]))
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_energy_ball_region_smaller_than_full(grid_1d):
    spec = make_spec(1, 1.0)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(grid_1d.n_nodes)
    full = energy_form(spec, grid_1d, 0.0, u, u)
    local = energy_form(spec, grid_1d, 0.0, u, u, region=("ball", np.zeros(1), 0.75))
    assert 0.0 <= local <= full + 1e-12


def test_seminorms_and_norms(grid_1d_fine):
    spec = make_spec(1, 1.0)
    center, radius = np.zeros(1), 0.5
    const = Field.constant(grid_1d_fine, 4.0)
    assert seminorm_V(const, spec, grid_1d_fine, center, radius) == 0.0
    rng = np.random.default_rng(2)
    u = rng.standard_normal(grid_1d_fine.n_nodes)
    sH = seminorm_H(u, spec, grid_1d_fine, center, radius)
    sV = seminorm_V(u, spec, grid_1d_fine, center, radius)
    assert 0.0 <= sH <= sV
    ball = grid_1d_fine.nodes_in_ball(center, radius)
    l2sq = grid_1d_fine.h * float(np.sum(u[ball] ** 2))
    assert norm_V(u, spec, grid_1d_fine, center, radius) == pytest.approx(
        np.sqrt(l2sq + sV * sV), rel=1e-13
    )


def test_norm_l1alpha_constant(grid_1d_fine):
    # integral of (1+|y|)^(-2) over the line is 2; midpoint sum + exact far
    # completion gets there to O(h^2).
    f = Field.constant(grid_1d_fine, 1.0)
    assert norm_L1alpha(f, 1.0) == pytest.approx(2.0, rel=5e-3)


def test_pure_rows_far_constant(grid_1d):
    # The per-row far mass is the closed-form exterior integral beyond t_eff.
    from nlparab.quadrature import far_mass_1d

    _, c_raw = pure_rows(grid_1d, 1.0, [grid_1d.node_at([0.0])])
    assert c_raw[0] == pytest.approx(far_mass_1d(0.0, grid_1d.t_eff, 1.0), rel=1e-13)
