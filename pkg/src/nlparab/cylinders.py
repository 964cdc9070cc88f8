"""Space-time cylinders I_R^+/-(t0) x B_R(x0) and discrete statistics on them.

Resolution semantics: a node belongs to a cylinder iff its center lies
strictly inside the open ball, and a stored time belongs iff it lies strictly
inside the open time interval. With strict intervals the backward and forward
halves of I_R(t0) resolve to disjoint index sets whose union is the full
cylinder's set minus the t0 slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridError

KINDS = ("I_plus", "I_minus", "I", "D", "D_hat", "D_minus", "D_plus")


@dataclass(frozen=True)
class Cylinder:
    kind: str
    t0: float
    x0: tuple
    R: float
    alpha: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown cylinder kind {self.kind!r}")
        if self.R <= 0:
            raise ConfigError("cylinder radius must be positive")
        if not (0.0 < self.alpha < 2.0):
            raise ConfigError("cylinder needs alpha in (0, 2)")

    def time_window(self):
        t0, Ra = self.t0, self.R ** self.alpha
        half = (0.5 * self.R) ** self.alpha
        return {
            "I_plus": (t0, t0 + Ra),
            "I_minus": (t0 - Ra, t0),
            "I": (t0 - Ra, t0 + Ra),
            "D": (t0 - 2 * Ra, t0),
            "D_hat": (t0 - 2 * Ra, t0),
            "D_minus": (t0 - 2 * Ra, t0 - 2 * Ra + half),
            "D_plus": (t0 - half, t0),
        }[self.kind]

    def ball(self):
        factor = {
            "I_plus": 1.0, "I_minus": 1.0, "I": 1.0,
            "D": 2.0, "D_hat": 3.0,
            "D_minus": 0.5, "D_plus": 0.5,
        }[self.kind]
        return np.asarray(self.x0, dtype=float), factor * self.R


def cylinder(kind, t0, x0, R, alpha):
    x0 = tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist())
    return Cylinder(kind, float(t0), x0, float(R), float(alpha))


def resolve(cyl, grid, times, min_slices=1, min_nodes=1):
    """Strict-inside index sets (time indices, node positions) of a cylinder."""
    a, b = cyl.time_window()
    t = np.asarray(times, dtype=float)
    eps = 1e-12 * max(1.0, abs(a), abs(b))
    t_idx = np.flatnonzero((t > a + eps) & (t < b - eps))
    center, radius = cyl.ball()
    n_idx = grid.nodes_in_ball(center, radius, strict=True)
    if t_idx.size == 0 or n_idx.size == 0:
        raise GridError(
            f"cylinder {cyl.kind} at t0={cyl.t0}, R={cyl.R} resolves to an empty index set"
        )
    if t_idx.size < min_slices or n_idx.size < min_nodes:
        raise GridError(
            f"cylinder {cyl.kind} resolves to {t_idx.size} slices x {n_idx.size} nodes, "
            f"below the required {min_slices} x {min_nodes}"
        )
    return t_idx, n_idx


def cyl_stats(solution, cyl, min_slices=4, min_nodes=4):
    """(sup, inf, mean, L2-mean) of the stored values over the resolved set."""
    stf = getattr(solution, "field", solution)
    t_idx, n_idx = resolve(cyl, stf.grid, stf.times, min_slices, min_nodes)
    block = stf.values[np.ix_(t_idx, n_idx)]
    return (
        float(block.max()),
        float(block.min()),
        float(block.mean()),
        float(np.sqrt(np.mean(block ** 2))),
    )
