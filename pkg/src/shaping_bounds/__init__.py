"""Shaping-rate and achievable-rate bounds for codes built by selecting
constraint-satisfying words out of a larger i.i.d. codebook."""

__version__ = "0.1.0"

from .errors import (
    CapExceededError,
    ConvergenceError,
    InfeasibleConstraintError,
    InvalidDistributionError,
    NotApplicableError,
    ShapingError,
)
from .info import (
    Channel,
    JointPmf,
    Pmf,
    binary_entropy,
    conditional_entropy,
    cross_entropy,
    entropy,
    joint,
    kl_divergence,
    mutual_information,
    output_marginal,
)
from .projection import (
    AntiShapingWarning,
    ConstraintSet,
    ProjectionResult,
    TheoremOneBounds,
    exact_pNE,
    exact_pNE_binary,
    maxwell_boltzmann,
    maxwell_boltzmann_parameter,
    project,
    rs_min,
    sanov_lower,
    sanov_upper,
    theorem1_bounds,
)
from .rates import (
    MjtSolution,
    RateReport,
    divergence_contraction_check,
    gallager_e0,
    gallager_rate,
    matched_rate,
    mismatched_mi,
    mjt_applicable,
    mjt_rate,
    naive_rate,
    rate_report,
    solve_mjt,
)
from .channels import (
    OutputGrid,
    PamAwgnConfig,
    SweepRow,
    awgn_capacity,
    awgn_power_constraint,
    awgn_sweep,
    bnsc,
    bnsc_mjt_input,
    bsc,
    constrained_capacity_baa,
    gaussian_largecode_rate,
    optimize_alpha,
    pam_levels,
    quantized_awgn,
)
from .montecarlo import (
    Estimate,
    McConfig,
    McResult,
    decode_experiment,
    empirical_conditional_limit,
    estimate_ps,
)
