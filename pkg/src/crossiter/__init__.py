"""Cross iterations with A and A^T, restarted gradients, and limit diagnostics."""

from .diagnostics import (
    InterlacingViolation,
    LimitReport,
    RateReport,
    check_interlacing,
    check_zero_fov_case,
    count_stationary,
    detect_limit,
    estimate_contraction,
    predicted_block_zeta,
    predicted_unit_zeta,
    verify_q_interpolation,
    verify_tau_relation,
)
from .errors import (
    BreakdownError,
    ConvergenceFailure,
    CrossIterError,
    DimensionMismatchError,
    PreconditionError,
    SpecError,
)
from .generators import EigenData, SpectrumSpec, make_matrix, random_unit_start, zero_in_fov
from .iterations import (
    AciStepRecord,
    CgResult,
    CgStepRecord,
    IterationConfig,
    IterationTrace,
    aci1_orthogonal_run,
    aci1_rayleigh_step,
    aci_run,
    aci_symmetric_run,
    optimum_s_gradient_run,
)
from .linalg import (
    KrylovBasis,
    Matrix,
    a_inner,
    grade,
    krylov_basis,
    matvec,
    minimal_poly_degree,
    vector,
)
from .projection import (
    IdealShift,
    MonicPolynomial,
    ProjectionResult,
    WorstCaseEstimate,
    arnoldi_projection,
    evaluate_monic,
    ideal_arnoldi_s1,
    worst_case_arnoldi_estimate,
)

__all__ = [
    "AciStepRecord",
    "BreakdownError",
    "CgResult",
    "CgStepRecord",
    "ConvergenceFailure",
    "CrossIterError",
    "DimensionMismatchError",
    "EigenData",
    "IdealShift",
    "InterlacingViolation",
    "IterationConfig",
    "IterationTrace",
    "KrylovBasis",
    "LimitReport",
    "Matrix",
    "MonicPolynomial",
    "PreconditionError",
    "ProjectionResult",
    "RateReport",
    "SpecError",
    "SpectrumSpec",
    "WorstCaseEstimate",
    "a_inner",
    "aci1_orthogonal_run",
    "aci1_rayleigh_step",
    "aci_run",
    "aci_symmetric_run",
    "arnoldi_projection",
    "check_interlacing",
    "check_zero_fov_case",
    "count_stationary",
    "detect_limit",
    "estimate_contraction",
    "evaluate_monic",
    "grade",
    "ideal_arnoldi_s1",
    "krylov_basis",
    "make_matrix",
    "matvec",
    "minimal_poly_degree",
    "optimum_s_gradient_run",
    "predicted_block_zeta",
    "predicted_unit_zeta",
    "random_unit_start",
    "vector",
    "verify_q_interpolation",
    "verify_tau_relation",
    "worst_case_arnoldi_estimate",
    "zero_in_fov",
]

__version__ = "0.1.0"
