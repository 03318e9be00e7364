"""Numerical laboratory for spectra of warped products over 1-D bases.

Discretizes weighted Sturm-Liouville operators for base, volume-potential
and total-space problems, extracts bottoms of spectra with convergence
metadata, probes essential spectra through exhausting complements, and
checks the spectral inequalities relating base, fiber and total space.
"""

from .errors import (
    AssemblyError,
    ConfigError,
    GridMismatchError,
    InvalidModelError,
    InvalidWarpError,
    InvariantViolationError,
    ProbeError,
    SingularPotentialError,
    SolverError,
    SubspecError,
    SUndefinedError,
    UnsupportedCaseError,
)
from .geometry import (
    FiberSpec,
    ModelBottom,
    ProbeSettings,
    SubmersionCase,
    Tolerances,
    WarpFunction,
    WeightedInterval,
    constant_warp,
    declared_mean_curvature,
    fiber_lambda0_profile,
    fiber_volume_profile,
    mean_curvature_bound,
    model_lambda0,
    schrodinger_potential,
)
from .discretize import (
    Grid,
    GridFunction,
    SLOperator,
    TensorOperator,
    assemble_base_operator,
    assemble_renormalized_operator,
    assemble_schrodinger_operator,
    assemble_total_family,
    assemble_total_tensor,
    average,
    build_grid,
    discrete_volume_potential,
    effective_bottom_operator,
    lift,
    mode_operator,
    pushdown,
    rayleigh,
    tensor_grid,
)
from .spectral import (
    DiscretenessVerdict,
    ExhaustionProbe,
    Lambda0Result,
    SpectrumReport,
    discreteness_verdict,
    exhaustion_probe,
    lambda0,
    low_spectrum,
    smallest_eigenpairs,
    spectrum_report,
    tensor_smallest,
    total_low_spectrum,
)
from .verify import (
    CHECKS,
    TheoremReport,
    check_discreteness_equivalence,
    check_lift_identities,
    check_lower_bound,
    check_pushdown_inequalities,
    check_schrodinger_comparison,
    check_upper_bounds,
    run_checks,
    tensor_subcase,
)

__version__ = "0.1.0"
