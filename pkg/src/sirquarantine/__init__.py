"""Optimal timing of a budget-limited strict-quarantine window in an SIR
epidemic, with a case-analysis planner, a brute-force oracle and
maximum-principle verification."""

from .errors import DomainError, IntegrationError, TheoremInapplicableError
from .oracle import GridDump, GridSearchResult, grid_search, refine
from .planner import (
    KappaClassification,
    PlanResult,
    RegimeRow,
    RegimeTable,
    check_kappa_condition,
    plan,
    plan_corollary_sigma1_zero,
    regime_boundaries,
)
from .pmp import (
    AdjointPath,
    PMPReport,
    integrate_adjoint,
    verify_necessary_conditions,
)
from .sir import (
    EpidemicState,
    ModelParams,
    Schedule,
    Trajectory,
    conserved_residual,
    integrate,
    objective,
    x_infinity,
    x_infinity_partials,
)
from .switching import (
    BorderDerivative,
    Jtilde_derivative,
    Jtilde_parts,
    SwitchProfile,
    alpha_of,
    dJ_deta,
    dJ_dt1,
    h_of,
    switch_profile,
    w_of,
    z_of,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointPath",
    "BorderDerivative",
    "DomainError",
    "EpidemicState",
    "GridDump",
    "GridSearchResult",
    "IntegrationError",
    "Jtilde_derivative",
    "Jtilde_parts",
    "KappaClassification",
    "ModelParams",
    "PMPReport",
    "PlanResult",
    "RegimeRow",
    "RegimeTable",
    "Schedule",
    "SwitchProfile",
    "TheoremInapplicableError",
    "Trajectory",
    "alpha_of",
    "check_kappa_condition",
    "conserved_residual",
    "dJ_deta",
    "dJ_dt1",
    "grid_search",
    "h_of",
    "integrate",
    "integrate_adjoint",
    "objective",
    "plan",
    "plan_corollary_sigma1_zero",
    "refine",
    "regime_boundaries",
    "switch_profile",
    "verify_necessary_conditions",
    "w_of",
    "x_infinity",
    "x_infinity_partials",
    "z_of",
]
