"""Tests for Gaussian sub-solutions and their certificates."""
import numpy as np
import pytest

from app.core.exceptions import NoNondegeneracy, NotASubsolution, PreconditionFail, QTooLarge
from app.core.reports import Verdict
from app.evolution import EvolveOptions, Trajectory, evolve
from app.kernels import Field, KernelSpec, build_kernel
from app.nonlinearity import Model
from app.subsolution import (
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
from app.subsolution.gaussian import admissible_amplitude


@pytest.fixture(scope="module")
def certified(wide_grid, wide_kernel, wide_model):
    """Nonlinear certificate for q = q0/2, alpha = alpha0/2 on the wide line."""
    cap = alpha0(wide_kernel, wide_model.kappa)
    q0 = admissible_amplitude(wide_model, wide_grid)
    params = SubsolutionParams(q=0.5 * q0, alpha=0.5 * cap)
    report = verify_nonlinear_subsolution(params, wide_model, wide_kernel, max_workers=1)
    return params.model_copy(update={"T": report.witness["T"]}), report


def test_cone_moment_line():
    """In one dimension the cone moment is rho^3 / 3."""
    assert cone_moment(0.6, 1) == pytest.approx(0.6 ** 3 / 3, rel=1e-5)
    assert cone_moment(0.0, 1) == 0.0


def test_cone_moment_plane():
    """A sector of angle 2*pi/3 carries pi rho^4 / 6."""
    assert cone_moment(0.5, 2) == pytest.approx(np.pi * 0.5 ** 4 / 6, rel=1e-2)


def test_alpha0_of_unit_gaussian(wide_kernel):
    """alpha0 = kappa * rho^4 / 6 in one dimension."""
    rho = wide_kernel.nondeg_radius
    value = alpha0(wide_kernel, 2.0)
    assert value == pytest.approx(rho ** 4 / 3, rel=1e-5)
    assert value == pytest.approx(0.00455, abs=2e-4)


def test_alpha0_needs_nondegeneracy(line_grid):
    """A point mass has no nondegeneracy radius."""
    kernel = build_kernel(KernelSpec(family="delta"), line_grid)
    with pytest.raises(NoNondegeneracy):
        alpha0(kernel, 2.0)


def test_subsolution_peak_moves_with_drift(line_grid):
    """w peaks at t*m with height q."""
    params = SubsolutionParams(q=0.3, alpha=1.0, drift=2.0)
    w = gaussian_subsolution(params, 3.0, line_grid)
    x = line_grid.centers(0)
    assert x[np.argmax(w.values)] == pytest.approx(6.0, abs=line_grid.spacing[0])
    assert w.values.max() == pytest.approx(0.3, rel=1e-2)
    assert w.time == 3.0
    with pytest.raises(ValueError):
        gaussian_subsolution(params, 0.0, line_grid)


def test_drift_accepts_scalar():
    """A scalar drift becomes a one-element list."""
    assert SubsolutionParams(q=0.1, alpha=1.0, drift=1.5).drift == [1.5]


def test_residual_time_derivative(gaussian_kernel, line_grid):
    """The analytic dw/dt matches a centred difference."""
    params = SubsolutionParams(q=0.2, alpha=2.0, drift=0.5)
    t, eps = 4.0, 1e-5
    w_plus = gaussian_subsolution(params, t + eps, line_grid).values
    w_minus = gaussian_subsolution(params, t - eps, line_grid).values
    # kappa = m = 0 leaves only dw/dt
    residual = subsolution_residual(params, t, line_grid, gaussian_kernel, 0.0, 0.0)
    np.testing.assert_allclose(residual, (w_plus - w_minus) / (2 * eps), atol=1e-7)


def test_residual_increases_with_mortality(line_grid, gaussian_kernel):
    """Raising m by dm raises the residual by dm * w at every cell."""
    params = SubsolutionParams(q=0.1, alpha=0.5, drift=[1.0])
    low = subsolution_residual(params, 3.0, line_grid, gaussian_kernel, 2.0, 1.0)
    high = subsolution_residual(params, 3.0, line_grid, gaussian_kernel, 2.0, 1.5)
    w = gaussian_subsolution(params, 3.0, line_grid).values
    assert np.all(high >= low)
    np.testing.assert_allclose(high - low, 0.5 * w, atol=1e-14)


def test_linear_certificate_search(wide_grid, wide_kernel):
    """Doubling T certifies alpha = alpha0/2 before the cap."""
    cap = alpha0(wide_kernel, 2.0)
    params = SubsolutionParams(q=0.1, alpha=0.5 * cap)
    report = verify_linear_subsolution(params, wide_grid, wide_kernel, 2.0, 1.0, max_workers=1)
    assert report.passed
    assert report.check == "linear_subsolution"
    assert 1.0 <= report.witness["T"] <= 2.0 ** 14
    assert report.details["alpha0"] == pytest.approx(cap)
    assert len(report.table) == 7


def test_linear_certificate_fails_early(wide_grid, wide_kernel):
    """At t = 1 the spike is far too narrow to be a sub-solution."""
    params = SubsolutionParams(q=0.1, alpha=0.5 * alpha0(wide_kernel, 2.0))
    report = verify_linear_subsolution(params, wide_grid, wide_kernel, 2.0, 1.0, t_samples=[1.0])
    assert report.verdict == Verdict.FAILS
    with pytest.raises(NotASubsolution):
        verify_linear_subsolution(params, wide_grid, wide_kernel, 2.0, 1.0, t_cap=4.0)


def test_admissible_amplitude(wide_model, wide_grid):
    """q0 = min(theta, beta / (2 l_theta)) = 1/2 for the unit logistic model."""
    assert admissible_amplitude(wide_model, wide_grid) == pytest.approx(0.5)
    assert admissible_amplitude(wide_model, wide_grid, margin=0.1) == pytest.approx(0.45)


def test_amplitude_too_large(wide_model, wide_kernel):
    """q at or above q0 is refused."""
    params = SubsolutionParams(q=0.6, alpha=1e-3)
    with pytest.raises(QTooLarge) as exc_info:
        verify_nonlinear_subsolution(params, wide_model, wide_kernel)
    assert exc_info.value.details["q0"] == pytest.approx(0.5)


def test_nonlinear_certificate(certified):
    """Mortality m + beta/2 still admits a threshold."""
    params, report = certified
    assert report.passed, report.to_text()
    assert report.check == "nonlinear_subsolution"
    assert report.details["G_excess"] <= 1e-10
    assert params.T >= 1.0


@pytest.mark.slow
def test_solution_dominates_subsolution(certified, wide_model, wide_kernel):
    """A solution started above w(., T) stays above w on [T, 4T]."""
    params, _ = certified
    report = check_domination(params, wide_model, wide_kernel)
    assert report.witness["t_end"] == pytest.approx(4 * params.T)
    assert report.passed, report.to_text()


def test_domination_window_defaults_to_four_thresholds(logistic_model, gaussian_kernel):
    """Without t_end the run covers [T, 4T] and the worst time lies inside it."""
    params = SubsolutionParams(q=0.05, alpha=0.01, T=2.0)
    report = check_domination(params, logistic_model, gaussian_kernel,
                              opts=EvolveOptions(max_dt=0.05, snapshot_interval=1.0))
    assert report.witness["t_end"] == pytest.approx(8.0)
    assert 2.0 <= report.witness["t"] <= 8.0 + 1e-9


def test_lower_bound_form(logistic_model, gaussian_kernel, bump, fast_opts):
    """u(., t) >= q1 exp(-|x|^2 / tau) with a positive q1."""
    traj = evolve(bump, 2.0, logistic_model, gaussian_kernel, fast_opts)
    report = check_lower_bound_form(traj, [0.0], tau=4.0, t=2.0)
    assert report.passed
    assert report.witness["q1"] > 0
    assert report.witness["eta"] == pytest.approx(0.2)


def test_lower_bound_needs_positive_bump(logistic_model, gaussian_kernel, bump, fast_opts):
    """x0 away from the support of u0 is a precondition failure."""
    traj = evolve(bump, 1.0, logistic_model, gaussian_kernel, fast_opts)
    with pytest.raises(PreconditionFail):
        check_lower_bound_form(traj, [20.0], tau=4.0, t=1.0)


def _line_offsets(grid, x0=0.0):
    return np.abs(grid.centers() - x0)


def test_lower_bound_over_every_cell(small_grid, fast_opts):
    """On a fully resolved run the bound is global and holds at each cell."""
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0), small_grid)
    model = Model.logistic(2.0, 1.0, 1.0, kernel)
    u0 = Field.from_function(small_grid, lambda x: np.where(np.abs(x) <= 1.0, 0.2, 0.0))
    traj = evolve(u0, 2.0, model, kernel, fast_opts)
    report = check_lower_bound_form(traj, [0.0], tau=4.0, t=2.0)
    assert report.passed
    assert report.witness["scope"] == "global"
    assert report.details["covered_radius"] is None
    u = traj.at(2.0).values
    bound = report.witness["q1"] * np.exp(-_line_offsets(small_grid) ** 2 / 4.0)
    assert np.all(u >= bound * (1 - 1e-9))


def test_lower_bound_with_faster_than_gaussian_decay(small_grid):
    """u = exp(-x^4) underflows far out; q1 must bind on every cell it claims."""
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0), small_grid)
    model = Model.logistic(2.0, 1.0, 1.0, kernel)
    u0 = Field.from_function(small_grid, lambda x: np.where(np.abs(x) <= 1.0, 0.2, 0.0))
    decayed = Field.from_function(small_grid, lambda x: np.exp(-x ** 4), time=1.0)
    traj = Trajectory(snapshots=[u0, decayed], times=[0.0, 1.0], model=model, kernel=kernel)

    report = check_lower_bound_form(traj, [0.0], tau=4.0, t=1.0)
    assert report.witness["scope"] == "local"
    assert report.details["unresolved_cells"] > 0
    assert report.details["covered_radius"] < 3.0

    dist = _line_offsets(small_grid)
    q1 = report.witness["q1"]
    assert q1 == pytest.approx(np.exp(np.min(-dist[dist < 2.2] ** 4 + dist[dist < 2.2] ** 2 / 4.0)), rel=0.5)
    inside = dist < report.details["covered_radius"]
    assert np.all(decayed.values[inside] >= q1 * np.exp(-dist[inside] ** 2 / 4.0) * (1 - 1e-9))
