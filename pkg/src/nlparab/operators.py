"""Operator assembly, energy forms, and function-space seminorms.

Off-diagonal weights integrate the kernel exactly over target cells (1D:
closed form; 2D: tensor Gauss, upgraded next to the singular cell). The
singular central cell is handled by a symmetric second-difference stencil
whose weight is the exactly integrated second moment of the kernel over that
cell, applied to nearest neighbors. Diagonals are minus the full row sum
including exterior couplings and the analytic far-field mass, so constants
are annihilated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, StructureError
from .grids import ConstantRule, Field, ZeroRule, far_kernel_load, far_l1alpha_mass, rule_line_intervals
from .kernels import AXES_SINGULAR, ConstantCoefficient, TimeOscillatingCoefficient
from .quadrature import (
    cell_weight_1d,
    central_second_moment_1d,
    central_second_moment_2d,
    clipped_cell_weight_1d,
    far_mass,
    tensor_gauss_2d,
)

# Dense weight matrices (interior x covered) above this entry count fall back
# to matrix-path application without bit-exact constant preservation.
DENSE_LIMIT = 16_000_000


def _pure_pv_weight(d, h, alpha):
    """Raw second-difference neighbor weight for the singular cell (no (2-alpha), no a)."""
    m2 = central_second_moment_1d(h, alpha) if d == 1 else central_second_moment_2d(h, alpha)
    return m2 / (2.0 * h * h)


def pure_rows(grid, alpha, positions):
    """Raw kernel weights (cell integrals of |x-y|^(-d-alpha)) and far masses.

    Returns (W, c) with W[k, j] the weight from node positions[k] to covered
    node j (zero on the diagonal; nearest neighbors carry the extra
    second-difference weight for the singular cell) and c[k] the raw kernel
    mass beyond the covered-cell edge t_eff.
    """
    cache = getattr(grid, "_pure_cache", None)
    if cache is None:
        cache = grid._pure_cache = {}
    key = float(alpha)
    full = cache.get(key)
    if full is None and grid.n_nodes <= 4096:
        full = _pure_rows_direct(grid, alpha, np.arange(grid.n_nodes))
        cache[key] = full
    if full is not None:
        W_all, c_all = full
        return W_all[positions], c_all[positions]
    return _pure_rows_direct(grid, alpha, positions)


def _pure_rows_direct(grid, alpha, positions):
    h = grid.h
    coords = grid.coords
    n = grid.n_nodes
    W = np.zeros((len(positions), n))
    pv = _pure_pv_weight(grid.d, h, alpha)
    if grid.d == 1:
        xs = coords[:, 0]
        for k, p in enumerate(positions):
            r = np.abs(xs - xs[p])
            mask = r > 0.5 * h
            W[k, mask] = cell_weight_1d(r[mask], h, alpha)
            for step in (-1, 1):
                q = grid.neighbor(p, 0, step)
                if q is not None:
                    W[k, q] += pv
        c = far_mass(coords[positions, 0], grid.t_eff, 1, alpha)
    else:
        pts2, wts2 = tensor_gauss_2d(2, h)
        pts4, wts4 = tensor_gauss_2d(4, h)
        for k, p in enumerate(positions):
            offs = coords - coords[p]
            didx = np.abs(grid.idx - grid.idx[p]).max(axis=1)
            far_cells = didx >= 2
            vals = np.zeros(n)
            sub = offs[far_cells]
            for g, wg in zip(pts2, wts2):
                vals[far_cells] += wg * np.sum((sub + g) ** 2, axis=1) ** (-0.5 * (2.0 + alpha))
            adj = didx == 1
            subn = offs[adj]
            acc = np.zeros(subn.shape[0])
            for g, wg in zip(pts4, wts4):
                acc += wg * np.sum((subn + g) ** 2, axis=1) ** (-0.5 * (2.0 + alpha))
            vals[adj] = acc
            W[k] = vals
            W[k, p] = 0.0
            for axis in (0, 1):
                for step in (-1, 1):
                    q = grid.neighbor(p, axis, step)
                    if q is not None:
                        W[k, q] += pv
        c = np.atleast_1d(far_mass(coords[positions], grid.t_eff, 2, alpha))
    return W, np.asarray(c, dtype=float)


def coefficient_factors(spec, grid, t, positions):
    """Pairwise coefficient values a(t; x_k, y_j) for rows k, or a scalar."""
    coeff = spec.coefficient
    if isinstance(coeff, (ConstantCoefficient, TimeOscillatingCoefficient)):
        return coeff.mean_value(t)
    out = np.empty((len(positions), grid.n_nodes))
    for k, p in enumerate(positions):
        X = np.broadcast_to(grid.coords[p], grid.coords.shape)
        out[k] = coeff.values_pair(t, X, grid.coords)
    return out


@dataclass
class AssembledOperator:
    """Discrete -L over interior nodes plus exterior/far couplings."""

    spec: object
    grid: object
    t: float
    A: object
    far_c: np.ndarray
    row_sums: np.ndarray
    W_all: np.ndarray | None = None
    W_ring: object | None = None
    axes_geometry: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_diag(self):
        return float(np.max(self.row_sums))

    @property
    def dense_path(self):
        return self.W_all is not None

    def apply(self, u_all, far_value=None, far_load=None):
        """L_h u at interior nodes, in difference form on the dense path.

        far_value: scalar far field (constant/zero exterior terms), applied as
        far_c * (far_value - u_i) so constants are annihilated bit-exactly.
        far_load: precomputed signed far integral vector (overrides far_value).
        """
        grid = self.grid
        u_int = u_all[grid.interior]
        if self.dense_path:
            out = np.empty(grid.n_interior)
            chunk = max(1, 2_000_000 // max(grid.n_nodes, 1))
            for s in range(0, grid.n_interior, chunk):
                e = min(s + chunk, grid.n_interior)
                diff = u_all[None, :] - u_int[s:e, None]
                out[s:e] = np.einsum("ij,ij->i", self.W_all[s:e], diff)
        else:
            out = self.A @ u_int + self.W_ring @ u_all[grid.ring] + self.far_c * u_int
            # A's diagonal already holds -row_sums (couplings + far mass); the
            # far_c*u term above cancels the far part so it can be re-applied
            # in difference or load form below.
        if far_load is not None:
            out += far_load - self.far_c * u_int
        elif far_value is not None:
            out += self.far_c * (far_value - u_int)
        else:
            out += -self.far_c * u_int
        return out

    def project_rule(self, rule):
        """Load vector for exterior data `rule` (ring couplings + far field)."""
        grid = self.grid
        p = self.spec.params
        ring_vals = rule.evaluate(grid.coords[grid.ring])
        if self.dense_path:
            ring_part = self.W_all[:, grid.ring] @ ring_vals
        else:
            ring_part = self.W_ring @ ring_vals
        if self.axes_geometry is not None:
            far_part = self._axes_far_load(rule)
        else:
            a_far = self.meta.get("far_coefficient", 1.0)
            far_part = a_far * p.norm_const * far_kernel_load(
                rule, grid.coords[grid.interior], grid.t_eff, p.d, p.alpha
            )
        return ring_part + far_part

    def _axes_far_load(self, rule):
        p = self.spec.params
        out = np.zeros(self.grid.n_interior)
        for axis in (0, 1):
            geo = self.axes_geometry[axis]
            for k in range(self.grid.n_interior):
                s_i, lo_edge, hi_edge, other = geo[k]
                out[k] += p.norm_const * _line_far_integral(
                    rule, axis, other, s_i, lo_edge, hi_edge, p.alpha
                )
        return out


def _line_far_integral(rule, axis, other, s_i, lo_edge, hi_edge, alpha):
    """∫ rule along the axis line beyond [lo_edge, hi_edge], vs |s - s_i|^(-1-alpha)."""
    intervals = rule_line_intervals(rule, axis, other)
    if intervals is None:
        from scipy.integrate import quad

        def point(s):
            pt = np.empty(2)
            pt[axis] = s
            pt[1 - axis] = other
            return pt[None, :]

        hi = quad(lambda s: float(rule.evaluate(point(s))[0]) * (s - s_i) ** (-1 - alpha),
                  hi_edge, np.inf, limit=200)[0]
        lo = quad(lambda s: float(rule.evaluate(point(s))[0]) * (s_i - s) ** (-1 - alpha),
                  -np.inf, lo_edge, limit=200)[0]
        return hi + lo
    total = 0.0
    for (a, b, value) in intervals:
        if value == 0.0:
            continue
        # Right far piece: [max(a, hi_edge), b] mapped to distances from s_i.
        ra, rb = max(a, hi_edge), b
        if rb > ra:
            total += value * clipped_cell_weight_1d(ra - s_i, rb - s_i, 1e-300, np.inf, alpha)
        la, lb = a, min(b, lo_edge)
        if lb > la:
            total += value * clipped_cell_weight_1d(s_i - lb, s_i - la, 1e-300, np.inf, alpha)
    return float(total)


def assemble_operator(spec, grid, t=0.0):
    """Assemble -L_h for an absolutely continuous kernel at time t."""
    if spec.structure == AXES_SINGULAR:
        return assemble_axes_operator(spec, grid, t)
    p = spec.params
    if p.d != grid.d:
        raise ConfigError(f"kernel dimension {p.d} != grid dimension {grid.d}")
    n_int, n_all = grid.n_interior, grid.n_nodes
    if n_int * n_all > DENSE_LIMIT:
        raise ConfigError(
            "generic-kernel assembly would exceed the dense weight budget; "
            "use a coarser grid (the axes structure has its own sparse path)"
        )
    W_raw, c_raw = pure_rows(grid, p.alpha, grid.interior)
    a = coefficient_factors(spec, grid, t, grid.interior)
    W_all = p.norm_const * (a * W_raw)
    a_far = spec.coefficient.mean_value(t)
    far_c = p.norm_const * a_far * c_raw
    row_sums = W_all.sum(axis=1) + far_c
    A = W_all[:, grid.interior].copy()
    A[np.arange(n_int), np.arange(n_int)] = -row_sums
    meta = {
        "far_coefficient": a_far,
        "t_eff": grid.t_eff,
        "coefficient": spec.coefficient.describe(),
        "truncation": {
            "far_mass_max": float(far_c.max()) if n_int else 0.0,
            "far_coefficient_halfwidth": _far_coeff_halfwidth(spec),
        },
    }
    return AssembledOperator(
        spec=spec, grid=grid, t=t, A=A, far_c=far_c, row_sums=row_sums,
        W_all=W_all, W_ring=None, meta=meta,
    )


def _far_coeff_halfwidth(spec):
    rng = spec.coefficient.value_range()
    if rng is None:
        return None
    return 0.5 * (rng[1] - rng[0])


def assemble_axes_operator(spec, grid, t=0.0):
    """Assemble the axes-singular operator: 1D fractional operators along grid lines."""
    if spec.structure != AXES_SINGULAR:
        raise StructureError("assemble_axes_operator needs an axes-singular spec")
    if grid.d != 2 or grid.domain != "box":
        raise ConfigError("axes operator needs a 2D grid with box interior domain")
    p = spec.params
    alpha, h, nc = p.alpha, grid.h, p.norm_const
    pv = _pure_pv_weight(1, h, alpha)
    n_int = grid.n_interior
    int_pos_of = {pp: k for k, pp in enumerate(grid.interior)}
    ring_pos_of = {pp: k for k, pp in enumerate(grid.ring)}
    rows_A, cols_A, data_A = [], [], []
    rows_W, cols_W, data_W = [], [], []
    far_c = np.zeros(n_int)
    row_sums = np.zeros(n_int)
    geometry = {0: [None] * n_int, 1: [None] * n_int}

    for axis in (0, 1):
        lines = grid._rows if axis == 0 else grid._cols
        for fixed, pos in lines.items():
            s = grid.coords[pos, axis]
            order = np.argsort(s)
            pos = pos[order]
            s = s[order]
            lo_edge = s[0] - 0.5 * h
            hi_edge = s[-1] + 0.5 * h
            other = fixed * h
            interior_here = [(li, pp) for li, pp in enumerate(pos) if grid.interior_mask[pp]]
            for li, pp in interior_here:
                k = int_pos_of[pp]
                r = np.abs(s - s[li])
                w = np.zeros(len(pos))
                mask = r > 0.5 * h
                w[mask] = cell_weight_1d(r[mask], h, alpha)
                if li > 0:
                    w[li - 1] += pv
                if li + 1 < len(pos):
                    w[li + 1] += pv
                w *= nc
                c_line = nc * (
                    (s[li] - lo_edge) ** (-alpha) + (hi_edge - s[li]) ** (-alpha)
                ) / alpha
                far_c[k] += c_line
                row_sums[k] += w.sum() + c_line
                geometry[axis][k] = (float(s[li]), float(lo_edge), float(hi_edge), float(other))
                for lj, qq in enumerate(pos):
                    if lj == li or w[lj] == 0.0:
                        continue
                    if grid.interior_mask[qq]:
                        rows_A.append(k)
                        cols_A.append(int_pos_of[qq])
                        data_A.append(w[lj])
                    else:
                        rows_W.append(k)
                        cols_W.append(ring_pos_of[qq])
                        data_W.append(w[lj])

    rows_A.extend(range(n_int))
    cols_A.extend(range(n_int))
    data_A.extend((-row_sums).tolist())
    A = sp.csr_matrix((data_A, (rows_A, cols_A)), shape=(n_int, n_int))
    W_ring = sp.csr_matrix((data_W, (rows_W, cols_W)), shape=(n_int, grid.ring.size))
    meta = {"structure": AXES_SINGULAR, "t_eff": grid.t_eff}
    return AssembledOperator(
        spec=spec, grid=grid, t=t, A=A, far_c=far_c, row_sums=row_sums,
        W_all=None, W_ring=W_ring, axes_geometry=geometry, meta=meta,
    )


def apply_L_at(spec, grid, t, fld, pos):
    """Pointwise L_h u at a single node of a Field (exact far-field handling)."""
    p = spec.params
    W_raw, c_raw = pure_rows(grid, p.alpha, [pos])
    a = coefficient_factors(spec, grid, t, [pos])
    a_row = a if np.isscalar(a) else a[0]
    w = p.norm_const * (a_row * W_raw[0])
    u = fld.values
    out = float(np.dot(w, u - u[pos]))
    a_far = spec.coefficient.mean_value(t)
    c = p.norm_const * a_far * float(c_raw[0])
    far_signed = 0.0
    for wt, rule in fld.far_terms:
        if wt == 0.0:
            continue
        far_signed += wt * float(
            np.atleast_1d(
                far_kernel_load(rule, grid.coords[pos][None, :], grid.t_eff, p.d, p.alpha)
            )[0]
        )
    out += a_far * p.norm_const * far_signed - c * u[pos]
    return out


# ---------------------------------------------------------------------------
# Energy forms and seminorms.


def _region_positions(grid, region):
    if region == "full-cross":
        return None
    kind, center, radius = region
    if kind != "ball":
        raise ConfigError(f"unknown energy region {region!r}")
    return grid.nodes_in_ball(center, radius)


def energy_form(spec, grid, t, u, v, region="full-cross"):
    """Dirichlet-form energy: sum over unordered node pairs of
    w_ij (u_i - u_j)(v_i - v_j) * h^d, half the two-sided double integral.

    With this normalization E(u, phi) = (-L_h u, phi)_h for phi supported in
    the interior, which is the identity the weak-form residual uses. Fields
    are assumed zero beyond coverage unless passed as Field with constant far
    terms. full-cross is every pair meeting the interior, plus far-field
    terms.
    """
    if spec.structure == AXES_SINGULAR:
        raise StructureError("energy_form is not provided for the axes-singular structure")
    p = spec.params
    uu = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    vv = v.values if isinstance(v, Field) else np.asarray(v, dtype=float)
    hd = grid.h ** p.d
    ball = _region_positions(grid, region)
    if ball is not None:
        if ball.size == 0:
            return 0.0
        W_raw, _ = pure_rows(grid, p.alpha, ball)
        a = coefficient_factors(spec, grid, t, ball)
        W = p.norm_const * (a * W_raw)
        total = 0.0
        du = uu[ball][:, None] - uu[None, ball]
        dv = vv[ball][:, None] - vv[None, ball]
        total = float(np.sum(W[:, ball] * du * dv))
        return 0.5 * hd * total
    # full-cross: ordered pairs (i, j) with i or j interior.
    W_raw, c_raw = pure_rows(grid, p.alpha, grid.interior)
    a = coefficient_factors(spec, grid, t, grid.interior)
    W = p.norm_const * (a * W_raw)
    u_int = uu[grid.interior]
    v_int = vv[grid.interior]
    du_all = u_int[:, None] - uu[None, :]
    dv_all = v_int[:, None] - vv[None, :]
    prod = W * du_all * dv_all
    total = prod.sum()
    ext_mask = np.ones(grid.n_nodes, dtype=bool)
    ext_mask[grid.interior] = False
    total += prod[:, ext_mask].sum()
    a_far = spec.coefficient.mean_value(t)
    far_c = p.norm_const * a_far * c_raw
    u_far, v_far = _constant_far_value(u), _constant_far_value(v)
    total += 2.0 * float(np.sum(far_c * (u_int - u_far) * (v_int - v_far)))
    return 0.5 * hd * float(total)


def _constant_far_value(u):
    if not isinstance(u, Field) or not u.far_terms:
        return 0.0
    val = 0.0
    for w, rule in u.far_terms:
        if isinstance(rule, ZeroRule):
            continue
        if isinstance(rule, ConstantRule):
            val += w * rule.value
        elif rule.support_radius() <= u.grid.t_eff + 1e-12:
            continue
        else:
            raise StructureError("energy far field needs zero/constant/compact exterior terms")
    return val


def seminorm_V(u, spec, grid, center, radius):
    """[u]_{V^{alpha/2}(B | R^d)}: one-sided double integral, paper normalization."""
    p = spec.params
    ball = grid.nodes_in_ball(center, radius)
    if ball.size == 0:
        return 0.0
    W_raw, c_raw = pure_rows(grid, p.alpha, ball)
    uu = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    du = uu[ball][:, None] - uu[None, :]
    total = float(np.sum(W_raw * du * du))
    u_far = _constant_far_value(u) if isinstance(u, Field) else 0.0
    total += float(np.sum(c_raw * (uu[ball] - u_far) ** 2))
    return float(np.sqrt(p.norm_const * grid.h ** p.d * total))


def seminorm_H(u, spec, grid, center, radius):
    """[u]_{H^{alpha/2}(B)}: both variables restricted to the ball."""
    p = spec.params
    ball = grid.nodes_in_ball(center, radius)
    if ball.size == 0:
        return 0.0
    W_raw, _ = pure_rows(grid, p.alpha, ball)
    uu = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    du = uu[ball][:, None] - uu[None, ball]
    total = float(np.sum(W_raw[:, ball] * du * du))
    return float(np.sqrt(p.norm_const * grid.h ** p.d * total))


def norm_V(u, spec, grid, center, radius):
    """(‖u‖²_{L²(B)} + [u]²_V)^{1/2}."""
    p = spec.params
    ball = grid.nodes_in_ball(center, radius)
    uu = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    l2sq = grid.h ** p.d * float(np.sum(uu[ball] ** 2))
    vsq = seminorm_V(u, spec, grid, center, radius) ** 2
    return float(np.sqrt(l2sq + vsq))


def norm_L1alpha(u, alpha, grid=None):
    """‖u‖_{L¹_alpha} = ∫ |u| (1+|y|)^(-d-alpha) dy, grid sum + far completion."""
    if isinstance(u, Field):
        grid = u.grid
        vals = u.values
        terms = u.far_terms
    else:
        vals = np.asarray(u, dtype=float)
        terms = ()
        if grid is None:
            raise ConfigError("norm_L1alpha needs a grid for raw arrays")
    d = grid.d
    dist = np.linalg.norm(grid.coords, axis=1)
    total = grid.h ** d * float(np.sum(np.abs(vals) * (1.0 + dist) ** (-d - alpha)))
    for w, rule in terms:
        total += abs(w) * far_l1alpha_mass(rule, grid.t_eff, d, alpha)
    return total
