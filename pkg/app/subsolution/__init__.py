from app.subsolution.gaussian import (
    SubsolutionParams,
    alpha0,
    check_domination,
    check_lower_bound_form,
    cone_moment,
    gaussian_subsolution,
    subsolution_residual,
    verify_linear_subsolution,
    verify_nonlinear_subsolution,
)

__all__ = [
    "SubsolutionParams",
    "alpha0",
    "check_domination",
    "check_lower_bound_form",
    "cone_moment",
    "gaussian_subsolution",
    "subsolution_residual",
    "verify_linear_subsolution",
    "verify_nonlinear_subsolution",
]
