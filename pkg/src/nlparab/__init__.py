"""Numerical laboratory for nonlocal parabolic equations.

Discretizes time-dependent jump operators with comparable-to-fractional
kernels (and the axes-singular variant), solves the associated Cauchy
problems on truncated lattices, and measures tail functionals together
with Harnack, weak Harnack, local boundedness, and Hoelder constants on
space-time cylinders.  The counterexample module certifies the failure of
local boundedness under a slowly blowing-up drift of the exterior data.
"""

from .errors import (
    CertificateError,
    ConfigError,
    GridError,
    NlparabError,
    SingularityError,
    SolverError,
    StructureError,
)
from .kernels import (
    AXES_SINGULAR,
    CheckerboardCoefficient,
    ConstantCoefficient,
    CustomCoefficient,
    FracParams,
    KernelSpec,
    RandomPiecewiseCoefficient,
    TimeOscillatingCoefficient,
)
from .grids import (
    AnnulusIndicator,
    BallIndicator,
    ConstantProfile,
    ConstantRule,
    Field,
    GaussianRule,
    Grid,
    LinearProfile,
    LogInvSqProfile,
    PulseProfile,
    SpaceTimeField,
    ZeroRule,
)
from .operators import (
    AssembledOperator,
    apply_L_at,
    assemble_operator,
    energy_form,
    norm_V,
    seminorm_V,
)
from .tails import tail, tail_axes_fun, tail_series, tail_with_audit
from .cylinders import Cylinder, cyl_stats, cylinder
from .solver import Scenario, Solution, SolveOptions, solve
from .verifier import (
    Report,
    axes_harnack,
    harnack_quotient,
    harnack_with_tails,
    holder_report,
    iterate_absorb,
    locbd_ratio,
    weak_harnack_ratio,
)
from .counterexample import (
    CounterexampleSpec,
    certify_failure,
    certify_lower_bound,
    run_counterexample,
)
from .experiments import (
    SweepGeometry,
    axes_family,
    axes_summary,
    harnack_sweep,
    heat_limit_study,
    heat_oracle_error,
    sweep_summary,
)
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "AXES_SINGULAR",
    "AnnulusIndicator",
    "AssembledOperator",
    "BallIndicator",
    "CertificateError",
    "CheckerboardCoefficient",
    "ConfigError",
    "ConstantCoefficient",
    "ConstantProfile",
    "ConstantRule",
    "CounterexampleSpec",
    "CustomCoefficient",
    "Cylinder",
    "ExperimentConfig",
    "Field",
    "FracParams",
    "GaussianRule",
    "Grid",
    "GridError",
    "KernelSpec",
    "LinearProfile",
    "LogInvSqProfile",
    "NlparabError",
    "PulseProfile",
    "RandomPiecewiseCoefficient",
    "Report",
    "Scenario",
    "SingularityError",
    "Solution",
    "SolveOptions",
    "SolverError",
    "SpaceTimeField",
    "StructureError",
    "SweepGeometry",
    "TimeOscillatingCoefficient",
    "ZeroRule",
    "apply_L_at",
    "assemble_operator",
    "axes_family",
    "axes_harnack",
    "axes_summary",
    "certify_failure",
    "certify_lower_bound",
    "cyl_stats",
    "cylinder",
    "energy_form",
    "harnack_quotient",
    "harnack_sweep",
    "harnack_with_tails",
    "heat_limit_study",
    "heat_oracle_error",
    "holder_report",
    "iterate_absorb",
    "load_config",
    "locbd_ratio",
    "norm_V",
    "run_counterexample",
    "seminorm_V",
    "solve",
    "sweep_summary",
    "tail",
    "tail_axes_fun",
    "tail_series",
    "tail_with_audit",
    "weak_harnack_ratio",
]
