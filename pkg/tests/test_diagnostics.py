"""Tests for the hair-trigger metric, front tracking and auxiliary lemma checks."""
import math

import numpy as np
import pytest

from app.core.exceptions import GridMismatch, IterationCap, NoCrossing, SeamViolation
from app.core.reports import Verdict
from app.diagnostics import (
    MetricSeries,
    check_avg_jump_lemma,
    check_constant_data,
    check_recurrence_divergence,
    constant_data_oracle,
    front_speed,
    hair_trigger_metric,
    hair_trigger_verdict,
    level_set_position,
)
from app.evolution import EvolveOptions, Trajectory, check_comparison, evolve
from app.kernels import Field, Grid, KernelSpec, build_kernel
from app.nonlinearity import Model, approximating_model, check_approximation, drift, kpp_local
from app.spreading import Profile, profile_lattice


def tanh_front(grid, at: float, time: float = 0.0) -> Field:
    return Field.from_function(grid, lambda x: 0.5 * (1 - np.tanh(x - at)), time=time)


@pytest.fixture()
def front_profile(gaussian_kernel) -> Profile:
    lattice = profile_lattice(60.0, gaussian_kernel.grid.spacing[0])
    s = lattice.centers(0)
    return Profile(lattice, 0.5 * (1 - np.tanh(s)), 1.0)


def test_metric_on_theta_is_theta(logistic_model, gaussian_kernel, line_grid, fast_opts):
    """u0 = theta keeps the window minimum at theta from the start."""
    traj = evolve(Field.constant(line_grid, 1.0), 3.0, logistic_model, gaussian_kernel, fast_opts)
    series = hair_trigger_metric(traj, 5.0)
    assert series.times == pytest.approx([0.0, 1.0, 2.0, 3.0])
    np.testing.assert_allclose(series.values, 1.0, atol=1e-10)
    report = hair_trigger_verdict(series, 1.0, 0.01, 3.0)
    assert report.passed
    assert report.witness["t_reached"] == 0.0
    assert report.check == "hair_trigger(eps=0.01)"


def test_metric_seam_guard(logistic_model, gaussian_kernel, line_grid, fast_opts):
    """A fast frame runs into the periodic seam."""
    traj = evolve(Field.constant(line_grid, 0.5), 3.0, logistic_model, gaussian_kernel, fast_opts)
    with pytest.raises(SeamViolation):
        hair_trigger_metric(traj, 5.0, drift=[20.0])


def test_metric_follows_moving_frame(logistic_model, gaussian_kernel, line_grid):
    """The window is read at x + t*drift by interpolation."""
    snapshots = [tanh_front(line_grid, 10.0 + t, time=t) for t in (0.0, 1.0, 2.0)]
    traj = Trajectory(snapshots=snapshots, times=[0.0, 1.0, 2.0], model=logistic_model, kernel=gaussian_kernel)
    series = hair_trigger_metric(traj, 2.0, drift=[1.0])
    # the front keeps pace with the frame, so the window minimum is constant
    assert np.ptp(series.values) < 1e-3
    assert series.values[0] == pytest.approx(0.5 * (1 - np.tanh(-8.0)), abs=1e-3)


def test_hair_trigger_not_reached(logistic_model, gaussian_kernel, bump, fast_opts):
    """A small bump is far from theta after a short run."""
    traj = evolve(bump, 2.0, logistic_model, gaussian_kernel, fast_opts)
    report = hair_trigger_verdict(hair_trigger_metric(traj, 5.0), 1.0, 0.01, 2.0)
    assert report.verdict == Verdict.FAILS
    assert report.witness["t_reached"] is None
    assert report.margin < 0


def test_metric_series_helpers():
    """First crossing, monotone tail and CSV rows."""
    series = MetricSeries(times=[0.0, 1.0, 2.0, 3.0], values=[0.1, 0.05, 0.5, 0.9], half_width=1.0, drift=[0.0])
    assert series.first_time_reaching(0.5) == 2.0
    assert series.first_time_reaching(0.95) is None
    assert series.nondecreasing_from() == 1.0
    assert series.to_rows()[2] == {"t": 2.0, "window_min": 0.5}


def test_level_set_position(line_grid):
    """Linear interpolation finds the crossing of a smooth front."""
    u = tanh_front(line_grid, 3.0)
    assert level_set_position(u, 0.5) == pytest.approx(3.0, abs=1e-3)
    assert level_set_position(u, 0.5, xi=[-1.0]) == pytest.approx(-3.0, abs=1e-3)


def test_level_set_no_crossing(line_grid):
    """A field that never reaches the level has no front."""
    with pytest.raises(NoCrossing):
        level_set_position(Field.constant(line_grid, 0.2), 0.5)


def test_front_speed_of_travelling_front(logistic_model, gaussian_kernel, line_grid):
    """A front moving one unit per unit time has speed 1."""
    times = [0.0, 1.0, 2.0, 3.0, 4.0]
    snapshots = [tanh_front(line_grid, t, time=t) for t in times]
    traj = Trajectory(snapshots=snapshots, times=times, model=logistic_model, kernel=gaussian_kernel)
    fit = front_speed(traj, 0.5)
    assert fit.speed == pytest.approx(1.0, abs=1e-3)
    assert fit.intercept == pytest.approx(0.0, abs=1e-3)
    assert fit.residual < 1e-3
    assert len(fit.points) == 5
    late = front_speed(traj, 0.5, fit_window=(2.0, 4.0))
    assert len(late.points) == 3


def test_front_speed_needs_two_points(logistic_model, gaussian_kernel, line_grid):
    """One tracked snapshot is not enough for a slope."""
    snapshots = [tanh_front(line_grid, 0.0), Field.constant(line_grid, 0.1, time=1.0)]
    traj = Trajectory(snapshots=snapshots, times=[0.0, 1.0], model=logistic_model, kernel=gaussian_kernel)
    with pytest.raises(NoCrossing):
        front_speed(traj, 0.5)


def test_avg_jump_with_drifted_kernel(shifted_kernel, front_profile):
    """The integral tends to (v(-inf) - v(inf)) times the mean of b."""
    report = check_avg_jump_lemma(shifted_kernel, front_profile, [10.0, 20.0, 40.0])
    assert report.passed, report.to_text()
    assert report.witness["rhs"] == pytest.approx(1.0, abs=1e-6)
    gaps = [row["gap"] for row in report.table]
    assert gaps[-1] <= gaps[0]


def test_avg_jump_with_symmetric_kernel(gaussian_kernel, front_profile):
    """A centred kernel has no net jump."""
    report = check_avg_jump_lemma(gaussian_kernel, front_profile, [40.0])
    assert report.passed
    assert report.witness["integral"] == pytest.approx(0.0, abs=1e-3)


def test_avg_jump_spacing_mismatch(gaussian_kernel):
    """Kernel and profile must share the spacing."""
    lattice = profile_lattice(20.0, 0.1)
    v = Profile(lattice, np.zeros(lattice.cells[0]), 1.0)
    with pytest.raises(GridMismatch):
        check_avg_jump_lemma(gaussian_kernel, v, [5.0])


def test_recurrence_direct():
    """r_2 = 1 + 1/e and the partial sum reaches 2 by direct iteration."""
    report = check_recurrence_divergence(1.0, 1.0, 1.0, 2.0)
    assert report.passed
    assert report.details["r2"] == pytest.approx(1.367879, abs=1e-6)
    assert report.witness["partial_sum"] >= 2.0
    assert report.witness["n"] > 10
    assert report.details["increasing"]


def test_recurrence_slower_for_larger_q():
    """A larger exponent needs more terms."""
    n1 = check_recurrence_divergence(1.0, 1.0, 1.0, 2.0).witness["n"]
    n2 = check_recurrence_divergence(1.0, 1.0, 1.5, 2.0).witness["n"]
    assert n2 > n1


def test_recurrence_cap():
    """Out-of-reach targets raise unless asymptotics are allowed."""
    with pytest.raises(IterationCap):
        check_recurrence_divergence(1.0, 1.0, 1.0, 5.0, cap=1000)


def test_recurrence_asymptotic_continuation():
    """Target 5 is reached only in the continuum limit, far beyond any cap."""
    report = check_recurrence_divergence(1.0, 1.0, 1.0, 5.0, cap=10_000, asymptotic=True)
    assert report.passed
    assert report.details["asymptotic"] is True
    assert report.details["direct_steps"] == 10_000
    assert report.witness["log10_n"] > 10


def test_recurrence_asymptotics_match_direct():
    """The continuum estimate agrees with direct iteration to a factor of 2."""
    direct = check_recurrence_divergence(1.0, 1.0, 1.0, 2.0).witness["n"]
    approx = check_recurrence_divergence(1.0, 1.0, 1.0, 2.0, cap=200, asymptotic=True).witness
    assert abs(approx["log10_n"] - math.log10(direct)) < math.log10(2.0)


def test_recurrence_rejects_nonpositive():
    """All constants must be positive."""
    with pytest.raises(ValueError):
        check_recurrence_divergence(0.0, 1.0, 1.0, 2.0)


def test_constant_oracle_logistic(logistic_model):
    """r = 1/2 reaches 3/4 at t = ln 3; 0 and theta are fixed."""
    assert constant_data_oracle(logistic_model, 0.5, math.log(3.0)) == pytest.approx(0.75, abs=1e-12)
    assert constant_data_oracle(logistic_model, 0.0, 5.0) == 0.0
    assert constant_data_oracle(logistic_model, 1.0, 5.0) == pytest.approx(1.0, abs=1e-12)


def test_constant_oracle_integrates_local_model():
    """The ODE path matches the logistic closed form for local KPP."""
    model = Model(2.0, 1.0, kpp_local(1.0, 1.0))
    assert constant_data_oracle(model, 0.5, math.log(3.0)) == pytest.approx(0.75, abs=1e-9)


def test_check_constant_data(logistic_model, gaussian_kernel):
    """The integrator reproduces the scalar oracle on constant data."""
    report = check_constant_data(logistic_model, gaussian_kernel, 0.5, math.log(3.0),
                                 opts=EvolveOptions(max_dt=0.01))
    assert report.passed, report.to_text()
    assert report.witness["expected"] == pytest.approx(0.75)


@pytest.mark.slow
def test_hair_trigger_on_wide_line(wide_model, wide_kernel, wide_bump):
    """A small bump fills the window to within 1% of theta."""
    traj = evolve(wide_bump, 40.0, wide_model, wide_kernel, EvolveOptions(snapshot_interval=1.0))
    series = hair_trigger_metric(traj, 5.0)
    report = hair_trigger_verdict(series, 1.0, 0.01, 40.0)
    assert report.passed, report.to_text()
    assert series.values[-1] >= 0.99


@pytest.mark.slow
def test_drifted_hair_trigger_on_wide_line(wide_grid, wide_bump):
    """With a mean-1 kernel the window moving at m = 2 fills up; the still one need not."""
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0, mean=1.0), wide_grid)
    model = Model.logistic(2.0, 1.0, 1.0, kernel)
    m = drift(model, kernel)
    assert m.tolist() == pytest.approx([2.0], abs=1e-6)

    traj = evolve(wide_bump, 60.0, model, kernel, EvolveOptions(snapshot_interval=1.0))
    series = hair_trigger_metric(traj, 5.0, m)
    report = hair_trigger_verdict(series, model.theta, 0.01, 60.0)
    assert report.passed, report.to_text()
    assert report.witness["t_reached"] <= 60.0


@pytest.mark.slow
def test_truncated_cauchy_sandwich():
    """The B_20 truncation stays below the full Cauchy run and still hair-triggers."""
    grid = Grid.line(800.0, 8192)
    kernel = build_kernel(KernelSpec(family="cauchy", scale=1.0), grid)
    model = Model.logistic(2.0, 1.0, 1.0, kernel)
    model_n, kernel_n, drift_n = approximating_model(model, kernel, 20.0)
    assert check_approximation(model, kernel, model_n, kernel_n, seed=0).passed
    assert model_n.theta < model.theta

    u0 = Field.from_function(grid, lambda x: np.where(np.abs(x) <= 1.0, 0.2, 0.0))
    opts = EvolveOptions(snapshot_interval=1.0)
    full = evolve(u0, 30.0, model, kernel, opts)
    truncated = evolve(u0, 30.0, model_n, kernel_n, opts)
    sandwich = check_comparison(truncated, full, 1e-8)
    assert sandwich.passed, sandwich.to_text()
    assert sandwich.details["a4"] == "holds"

    series = hair_trigger_metric(truncated, 5.0, drift_n)
    assert hair_trigger_verdict(series, model_n.theta, 0.05, 30.0).passed
