"""Inexact cyclic block proximal gradient method for l1-regularized
least squares, with certified inexact proximal subproblem solves and
executable convergence-rate diagnostics."""

from .blocks import BlockPartition
from .problem import (
    CompositeProblem,
    L1Regularizer,
    SpdMetric,
    power_iteration,
    soft_threshold,
)
from .prox import (
    DeltaSubgradientWitness,
    ProxCertificate,
    ProxQuery,
    certify_second_prox,
    certify_second_prox_refined,
    check_certificate,
    delta_optimality_check,
    exact_prox_l1,
    gradient_error_embedding,
    lipschitz_bound_rhs,
    prox_reference_min,
    prox_value,
    prox_value_gap,
    rockafellar_membership,
)
from .solver import (
    RunRecord,
    SolverConfig,
    ToleranceSchedule,
    check_recurrence,
    check_sufficient_decrease_block,
    check_sufficient_decrease_full,
    run,
)
from .subsolver import (
    LassoSubproblem,
    box_gp_solve,
    build_subproblem,
    duality_gap,
    prox_equivalence_constant,
)

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "CompositeProblem",
    "DeltaSubgradientWitness",
    "L1Regularizer",
    "LassoSubproblem",
    "ProxCertificate",
    "ProxQuery",
    "RunRecord",
    "SolverConfig",
    "SpdMetric",
    "ToleranceSchedule",
    "box_gp_solve",
    "build_subproblem",
    "certify_second_prox",
    "certify_second_prox_refined",
    "check_certificate",
    "check_recurrence",
    "check_sufficient_decrease_block",
    "check_sufficient_decrease_full",
    "delta_optimality_check",
    "duality_gap",
    "exact_prox_l1",
    "gradient_error_embedding",
    "lipschitz_bound_rhs",
    "power_iteration",
    "prox_equivalence_constant",
    "prox_reference_min",
    "prox_value",
    "prox_value_gap",
    "rockafellar_membership",
    "run",
    "soft_threshold",
]
