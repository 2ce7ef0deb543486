"""Competition operators, reaction term and assumption checkers."""
from app.nonlinearity.assumptions import (
    AssumptionReport,
    check_approximation,
    check_assumptions,
    comparison_condition,
)
from app.nonlinearity.model import (
    CompetitionOperator,
    GeneralCompetition,
    LocalCompetition,
    LogisticCompetition,
    Model,
    Variant,
    apply_G,
    approximating_model,
    drift,
    kpp_local,
    power_general,
    power_local,
    reaction,
    theta_of,
)

__all__ = [
    "AssumptionReport",
    "CompetitionOperator",
    "GeneralCompetition",
    "LocalCompetition",
    "LogisticCompetition",
    "Model",
    "Variant",
    "apply_G",
    "approximating_model",
    "check_approximation",
    "check_assumptions",
    "comparison_condition",
    "drift",
    "kpp_local",
    "power_general",
    "power_local",
    "reaction",
    "theta_of",
]
