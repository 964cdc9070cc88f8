"""Tail functionals: far-field influence integrals outside balls.

All spatial integrals are region-exact with respect to the ball boundary: a
cell straddling |y - x0| = R contributes only its outside part (closed form
in 1D, subcell decomposition in 2D), so constants reproduce the analytic
tail values to rounding rather than to O(h).
"""

from __future__ import annotations

import numpy as np

from .errors import GridError, StructureError
from .grids import Field, SpaceTimeField, far_kernel_mass, rule_line_intervals
from .kernels import FracParams
from .quadrature import (
    SPHERE_MEASURE,
    clipped_cell_weight_1d,
    sup_on_window,
    trapezoid_partial,
)

_SUBCELLS = 16


def _alpha_of(alpha):
    return alpha.alpha if isinstance(alpha, FracParams) else float(alpha)


def _check_geometry(grid, R, x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if R <= 2.0 * grid.h:
        raise GridError(f"tail radius R={R} must exceed 2h={2 * grid.h}")
    if float(np.linalg.norm(x0)) + R > grid.r_trunc + 1e-9:
        raise GridError("ball B_R(x0) must lie inside grid coverage")
    return x0


def _outside_segments_1d(grid, x0, R):
    """Per-cell intersections with {|y - x0| > R}: list of (node, ya, yb)."""
    c = grid.coords[:, 0]
    h = grid.h
    lo, hi = c - 0.5 * h, c + 0.5 * h
    left_b = np.minimum(hi, x0 - R)
    right_a = np.maximum(lo, x0 + R)
    segs = []
    for j in range(grid.n_nodes):
        if left_b[j] > lo[j]:
            segs.append((j, lo[j], left_b[j]))
        if hi[j] > right_a[j]:
            segs.append((j, right_a[j], hi[j]))
    return segs


def _outside_pieces_2d(grid, x0, R):
    """(full_idx, boundary_idx, sub_points, sub_owner) for {|y-x0|>R}.

    Full cells are entirely outside; boundary cells are represented by the
    midpoints of their outside subcells (sub_owner maps points to cells).
    """
    h = grid.h
    dist = np.linalg.norm(grid.coords - x0, axis=1)
    half_diag = h / np.sqrt(2.0)
    full = np.flatnonzero(dist - half_diag > R)
    inner = np.flatnonzero(dist + half_diag <= R)
    mask = np.ones(grid.n_nodes, dtype=bool)
    mask[full] = False
    mask[inner] = False
    boundary = np.flatnonzero(mask)
    offs = (np.arange(_SUBCELLS) + 0.5) / _SUBCELLS - 0.5
    gx, gy = np.meshgrid(offs * h, offs * h, indexing="ij")
    sub = np.column_stack([gx.ravel(), gy.ravel()])
    pts, owner = [], []
    for j in boundary:
        cand = grid.coords[j] + sub
        keep = np.linalg.norm(cand - x0, axis=1) > R
        if keep.any():
            pts.append(cand[keep])
            owner.append(np.full(int(keep.sum()), j))
    if pts:
        return full, np.concatenate(owner), np.concatenate(pts)
    return full, np.zeros(0, dtype=int), np.zeros((0, 2))


def tail_with_audit(v, alpha, R, x0=None):
    """tail(v; R, x0) plus a truncation audit for data cut at r_trunc."""
    if not isinstance(v, Field):
        raise StructureError("tail needs a Field (values + exterior rules)")
    grid = v.grid
    a = _alpha_of(alpha)
    x0 = _check_geometry(grid, R, np.zeros(grid.d) if x0 is None else x0)
    absvals = np.abs(v.values)
    if grid.d == 1:
        total = 0.0
        z = x0[0]
        for j, ya, yb in _outside_segments_1d(grid, z, R):
            if absvals[j] == 0.0:
                continue
            total += absvals[j] * clipped_cell_weight_1d(
                min(abs(ya - z), abs(yb - z)), max(abs(ya - z), abs(yb - z)),
                0.0, np.inf, a,
            )
    else:
        full, owner, pts = _outside_pieces_2d(grid, x0, R)
        total = 0.0
        if full.size:
            total += _cell_kernel_sum(grid, full, absvals, x0, a)
        if owner.size:
            w = np.linalg.norm(pts - x0, axis=1) ** (-2.0 - a)
            total += float(np.sum(absvals[owner] * w)) * (grid.h / _SUBCELLS) ** 2
    nc = 2.0 - a
    far = v.far_mass(x0, a, mode="abs")
    trunc = 0.0
    if not v.far_terms:
        sup_v = float(absvals.max()) if absvals.size else 0.0
        trunc = sup_v * nc * SPHERE_MEASURE[grid.d] * grid.t_eff ** (-a) / a
    value = nc * total + nc * far
    return float(value), {"far_completion": nc * far, "truncation_bound": trunc}


def _cell_kernel_sum(grid, idx, absvals, x0, alpha):
    """Tensor 2-pt Gauss sum of |v_j| * ∫_cell |y-x0|^(-2-alpha) over cells idx."""
    from .quadrature import tensor_gauss_2d

    pts, wts = tensor_gauss_2d(2, grid.h)
    offs = grid.coords[idx] - x0
    acc = np.zeros(idx.size)
    for g, wg in zip(pts, wts):
        acc += wg * np.sum((offs + g) ** 2, axis=1) ** (-0.5 * (2.0 + alpha))
    return float(np.dot(absvals[idx], acc))


def tail(v, alpha, R, x0=None):
    """tail(v; R, x0) = (2-alpha) ∫_{|y-x0|>R} |v(y)| |x0-y|^(-d-alpha) dy."""
    return tail_with_audit(v, alpha, R, x0)[0]


def _slice_part(fld, part):
    if part == "abs":
        return fld
    if part == "pos":
        return fld.positive_part()
    if part == "neg":
        return fld.negative_part()
    raise ValueError(f"unknown part {part!r}")


def tail_series(u, alpha, R, x0=None, part="abs"):
    """tail(u(t); R, x0) at every stored time of a SpaceTimeField."""
    if not isinstance(u, SpaceTimeField):
        raise StructureError("time tails need a SpaceTimeField")
    return np.array(
        [tail(_slice_part(u.field_at(i), part), alpha, R, x0) for i in range(u.n_times)]
    )


def tail_L1_in_time(u, alpha, R, x0, interval, part="abs", averaged=False, series=None):
    """∫_J tail(u(t); R, x0) dt by trapezoid on stored slices (⨍ if averaged)."""
    a, b = interval
    s = tail_series(u, alpha, R, x0, part) if series is None else series
    val = trapezoid_partial(u.times, s, a, b)
    return val / (b - a) if averaged else val


def tail_Linf_in_time(u, alpha, R, x0, interval, part="pos", series=None):
    """sup_{t in J} tail(u_+(t); R, x0) over stored slices (endpoint-interpolated)."""
    a, b = interval
    s = tail_series(u, alpha, R, x0, part) if series is None else series
    return sup_on_window(u.times, s, a, b)


def tail_Lp_in_time(u, alpha, R, x0, interval, p, part="abs", averaged=False, series=None):
    """(∫_J tail^p dt)^(1/p), with the mean ⨍ inside the root if averaged."""
    a, b = interval
    s = tail_series(u, alpha, R, x0, part) if series is None else series
    val = trapezoid_partial(u.times, np.asarray(s) ** p, a, b)
    if averaged:
        val /= b - a
    return val ** (1.0 / p)


def tail_K_fun(v, spec, r, R, x0=None, t=0.0):
    """sup_{x in B_r(x0)} ∫_{|y-x0|>R} |v(y)| K(t; x, y) dy (kernel-weighted tail)."""
    from .kernels import AXES_SINGULAR

    if spec.structure == AXES_SINGULAR:
        raise StructureError("tail_K needs an absolutely continuous kernel; use tail_axes_fun")
    if not isinstance(v, Field):
        raise StructureError("tail_K needs a Field")
    grid = v.grid
    p = spec.params
    a = p.alpha
    x0 = _check_geometry(grid, R, np.zeros(grid.d) if x0 is None else x0)
    if r >= R:
        raise GridError("tail_K needs r < R")
    base = grid.nodes_in_ball(x0, r, strict=False)
    if base.size == 0:
        raise GridError("no grid nodes in B_r(x0)")
    absvals = np.abs(v.values)
    nc = p.norm_const
    a_far = spec.coefficient.mean_value(t)
    best = -np.inf
    if grid.d == 1:
        segs = _outside_segments_1d(grid, x0[0], R)
        for pos in base:
            x = grid.coords[pos]
            total = 0.0
            for j, ya, yb in segs:
                if absvals[j] == 0.0:
                    continue
                lo_d = min(abs(ya - x[0]), abs(yb - x[0]))
                hi_d = max(abs(ya - x[0]), abs(yb - x[0]))
                coeff = float(spec.coefficient.values_pair(t, x[None, :], grid.coords[j][None, :])[0])
                total += absvals[j] * coeff * clipped_cell_weight_1d(lo_d, hi_d, 0.0, np.inf, a)
            total = nc * total + nc * a_far * v.far_mass(x, a, mode="abs")
            best = max(best, total)
    else:
        full, owner, pts = _outside_pieces_2d(grid, x0, R)
        subarea = (grid.h / _SUBCELLS) ** 2
        for pos in base:
            x = grid.coords[pos]
            total = 0.0
            if full.size:
                coeffs = spec.coefficient.values_pair(
                    t, np.broadcast_to(x, (full.size, 2)), grid.coords[full]
                )
                from .quadrature import tensor_gauss_2d

                gpts, gwts = tensor_gauss_2d(2, grid.h)
                offs = grid.coords[full] - x
                acc = np.zeros(full.size)
                for g, wg in zip(gpts, gwts):
                    acc += wg * np.sum((offs + g) ** 2, axis=1) ** (-0.5 * (2.0 + a))
                total += float(np.dot(absvals[full] * coeffs, acc))
            if owner.size:
                coeffs = spec.coefficient.values_pair(
                    t, np.broadcast_to(x, (owner.size, 2)), pts
                )
                w = np.sum((pts - x) ** 2, axis=1) ** (-0.5 * (2.0 + a))
                total += float(np.sum(absvals[owner] * coeffs * w)) * subarea
            total = nc * total + nc * a_far * v.far_mass(x, a, mode="abs")
            best = max(best, total)
    return float(best)


def tail_axes_fun(v, params, R, x0=None, t=None):
    """sup_{x in B_R(x0)} R^alpha * sum_i ∫_{line_i(x) outside B_R(x0)} |v| d(axis weight).

    The weight along axis i is |(x0)_i - y_i|^(-1-alpha), so the directional
    integral depends only on which grid line x lies on; values are shared per
    row and per column. No (2-alpha) normalization (the axes measure is not
    comparable to the fractional kernel; that is the point of the structure).
    """
    if not isinstance(v, Field):
        raise StructureError("tail_axes needs a Field")
    grid = v.grid
    if grid.d != 2:
        raise StructureError("tail_axes is defined on 2D box grids")
    a = _alpha_of(params)
    x0 = _check_geometry(grid, R, np.zeros(2) if x0 is None else x0)
    # Open ball: a base point on the sphere can have its whole axis line
    # outside B_R(x0), where the |(x0)_i - y_i|^(-1-alpha) weight is
    # non-integrable across y_i = (x0)_i.
    base = grid.nodes_in_ball(x0, R, strict=True)
    if base.size == 0:
        raise GridError("no grid nodes in B_R(x0)")
    absvals = np.abs(v.values)
    h = grid.h
    line_value = {}

    def _line_integral(axis, fixed_idx):
        key = (axis, int(fixed_idx))
        if key in line_value:
            return line_value[key]
        pos = (grid._rows if axis == 0 else grid._cols)[int(fixed_idx)]
        s = grid.coords[pos, axis]
        order = np.argsort(s)
        pos, s = pos[order], s[order]
        perp = fixed_idx * h
        gap2 = R * R - (perp - x0[1 - axis]) ** 2
        z = x0[axis]
        if gap2 > 0.0:
            chord = float(np.sqrt(gap2))
            ex_lo, ex_hi = z - chord, z + chord
        else:
            ex_lo, ex_hi = np.inf, -np.inf
        total = 0.0
        for li in range(len(pos)):
            val = absvals[pos[li]]
            if val == 0.0:
                continue
            ca, cb = s[li] - 0.5 * h, s[li] + 0.5 * h
            for (qa, qb) in ((ca, min(cb, ex_lo)), (max(ca, ex_hi), cb)):
                if qb <= qa:
                    continue
                total += val * clipped_cell_weight_1d(
                    min(abs(qa - z), abs(qb - z)), max(abs(qa - z), abs(qb - z)),
                    0.0, np.inf, a,
                )
        lo_edge, hi_edge = s[0] - 0.5 * h, s[-1] + 0.5 * h
        for w, rule in v.far_terms:
            if w == 0.0:
                continue
            ivs = rule_line_intervals(rule, axis, perp)
            if ivs is None:
                raise StructureError(
                    f"axes tail far field needs piecewise-constant rules, got {rule.kind!r}"
                )
            for (ia, ib, value) in ivs:
                if value == 0.0:
                    continue
                for (qa, qb) in ((max(ia, hi_edge), ib), (ia, min(ib, lo_edge))):
                    if qb <= qa:
                        continue
                    for (ra, rb) in ((qa, min(qb, ex_lo)), (max(qa, ex_hi), qb)):
                        if rb <= ra:
                            continue
                        total += abs(w * value) * clipped_cell_weight_1d(
                            min(abs(ra - z), abs(rb - z)), max(abs(ra - z), abs(rb - z)),
                            0.0, np.inf, a,
                        )
        line_value[key] = total
        return total

    best = -np.inf
    for pos in base:
        i, j = grid.idx[pos]
        val = _line_integral(0, j) + _line_integral(1, i)
        best = max(best, val)
    return float(R ** a * best)
