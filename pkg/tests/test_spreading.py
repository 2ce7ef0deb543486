"""Tests for profiles, the Weinberger recursion and spreading speeds."""
import numpy as np
import pytest

from app.core.exceptions import DomainExceeded
from app.nonlinearity import Model
from app.spreading import (
    SpreadingResult,
    WeinbergerProblem,
    check_drift_in_front,
    check_profile_stability,
    embed_planar,
    estimate_cstar,
    linear_spreading_speed,
    make_phi,
    probe,
    profile_lattice,
    step_profile,
    upsilon_contains,
    upsilon_polygon,
    weinberger_limit,
    weinberger_step,
)
from app.spreading.weinberger import classify_trend

# min over lambda of (2 e^{lambda^2/2} - 1) / lambda for kappa=2, m=1, unit Gaussian
GAUSSIAN_LINEAR_SPEED = 2.1924


def fake_result(xi, c_star: float) -> SpreadingResult:
    return SpreadingResult(xi=list(xi), t=1.0, c_star=c_star, bracket=(c_star - 0.01, c_star + 0.01))


@pytest.fixture()
def lattice(gaussian_kernel):
    return profile_lattice(30.0, gaussian_kernel.grid.spacing[0])


def test_profile_lattice_is_symmetric(lattice, gaussian_kernel):
    """Cell centers are symmetric about 0 with the kernel spacing."""
    s = lattice.centers(0)
    assert s[0] == pytest.approx(-s[-1])
    assert lattice.spacing[0] == pytest.approx(gaussian_kernel.grid.spacing[0], rel=1e-12)
    assert lattice.extent[0] / 2 >= 30.0


def test_make_phi_shape(lattice):
    """phi sits at its level on the left, ramps down and vanishes for s >= 0."""
    phi = make_phi(lattice, 0.5, 2.0, 1.0)
    assert phi.values[0] == pytest.approx(0.5)
    assert np.all(phi.values[phi.s >= 0] == 0.0)
    assert phi.monotonicity_defect() == 0.0
    assert phi.right_limit == 0.0
    assert phi.left_limit == pytest.approx(0.5)


@pytest.mark.parametrize("level,width", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
def test_make_phi_validation(lattice, level, width):
    """Levels outside (0, theta) and empty ramps are refused."""
    with pytest.raises(ValueError):
        make_phi(lattice, level, width, 1.0)


def test_step_profile(lattice):
    """theta to the left of the jump, zero to the right."""
    g = step_profile(lattice, 1.0, at=5.0)
    assert g.at(np.array([0.0, 10.0])) == pytest.approx([1.0, 0.0])


def test_embed_planar_checks_reach(lattice, line_grid):
    """The grid slab must fit inside the profile lattice."""
    g = step_profile(lattice, 1.0)
    with pytest.raises(DomainExceeded):
        embed_planar(g, 0.0, 0.0, [1.0], line_grid)


def test_embed_planar_shift(lattice, small_grid):
    """x -> g(x + s + c) moves the jump to -(s + c)."""
    g = step_profile(lattice, 1.0)
    u = embed_planar(g, 1.0, 2.0, [1.0], small_grid)
    x = small_grid.centers(0)
    away = np.abs(x + 3.0) > lattice.spacing[0]
    np.testing.assert_array_equal(u.values[away], np.where(x + 3.0 < 0, 1.0, 0.0)[away])


def test_linear_speed_gaussian(logistic_model, gaussian_kernel):
    """The linearization speed of the unit Gaussian model."""
    c = linear_spreading_speed(1.0, [1.0], logistic_model, gaussian_kernel)
    assert c == pytest.approx(GAUSSIAN_LINEAR_SPEED, abs=1e-3)
    assert linear_spreading_speed(1.0, [-1.0], logistic_model, gaussian_kernel) == pytest.approx(c, rel=1e-8)
    assert linear_spreading_speed(2.0, [1.0], logistic_model, gaussian_kernel) == pytest.approx(2 * c, rel=1e-8)


def test_linear_speed_follows_drift(shifted_kernel):
    """A mean-1 kernel is faster downstream than upstream."""
    model = Model.logistic(2.0, 1.0, 1.0, shifted_kernel)
    ahead = linear_spreading_speed(1.0, [1.0], model, shifted_kernel)
    behind = linear_spreading_speed(1.0, [-1.0], model, shifted_kernel)
    assert ahead > GAUSSIAN_LINEAR_SPEED > behind


def test_weinberger_step_is_monotone(lattice, logistic_model, gaussian_kernel, fast_opts):
    """One step never goes below phi and stays non-increasing."""
    phi = make_phi(lattice, 0.5, 3.0, 1.0)
    nxt = weinberger_step(phi, phi, 1.0, 0.0, [1.0], logistic_model, gaussian_kernel, fast_opts)
    assert np.all(nxt.values >= phi.values)
    assert nxt.monotonicity_defect() == 0.0
    assert nxt.values.max() <= 1.0


def test_problem_pads_solve_grid(logistic_model, gaussian_kernel):
    """The periodic solve grid extends the lattice on both sides."""
    problem = WeinbergerProblem(1.0, 1.0, [1.0], logistic_model, gaussian_kernel, half_width=20.0)
    assert problem.solve_grid.cells[0] == problem.lattice.cells[0] + 2 * problem.pad_cells
    assert problem.pad_cells > 0


def test_probe_dichotomy(logistic_model, gaussian_kernel, fast_opts):
    """Slow shifts end at theta, fast shifts at zero."""
    slow = probe(0.0, 1.0, [1.0], logistic_model, gaussian_kernel, opts=fast_opts)
    fast = probe(4.0, 1.0, [1.0], logistic_model, gaussian_kernel, opts=fast_opts)
    assert slow.side == "theta"
    assert fast.side == "zero"
    assert fast.right_limit < 0.5


def test_classify_trend():
    """Rising histories count as theta; flat small ones as zero."""
    assert classify_trend([0.1, 0.2, 0.6], 1.0) == "theta"
    assert classify_trend(list(np.linspace(0.0, 0.3, 12)), 1.0) == "theta"
    assert classify_trend([1e-3] * 12, 1.0) == "zero"
    fronts = list(np.linspace(0.0, 5.0, 12))
    assert classify_trend([1e-3] * 12, 1.0, fronts, spacing=0.2) == "theta"


@pytest.mark.slow
def test_estimate_cstar_near_linear_speed(logistic_model, gaussian_kernel):
    """Bisection lands within 5% of the linearization speed."""
    result = estimate_cstar(1.0, [1.0], logistic_model, gaussian_kernel, tol_c=0.05, max_workers=1)
    assert result.c_star == pytest.approx(GAUSSIAN_LINEAR_SPEED, rel=0.05)
    lo, hi = result.bracket
    assert hi - lo <= 0.05
    assert set(result.dichotomy_witnesses) == {"c_lo", "c_hi"}


def test_upsilon_contains_with_known_speeds():
    """Membership compares x.xi against c*(xi) for every direction."""
    directions = [[1.0], [-1.0]]
    results = [fake_result([1.0], 2.0), fake_result([-1.0], 2.0)]
    inside = upsilon_contains([0.5], 1.0, None, None, directions, results=results)
    outside = upsilon_contains([2.5], 1.0, None, None, directions, results=results)
    assert inside.passed
    assert inside.margin == pytest.approx(1.5)
    assert not outside.passed
    assert outside.witness["xi"] == [1.0]


def test_drift_in_front(shifted_kernel):
    """t*m with m = kappa * mean lies inside the spreading set."""
    model = Model.logistic(2.0, 1.0, 1.0, shifted_kernel)
    results = [fake_result([1.0], 4.0), fake_result([-1.0], 0.5)]
    report = check_drift_in_front(model, shifted_kernel, 1.0, [[1.0], [-1.0]], results=results)
    assert report.check == "drift_in_front"
    assert report.details["drift"] == pytest.approx([2.0])
    assert report.passed


def test_polygon_of_square_speeds():
    """Four axis directions with c* = 1 give the square of side 2."""
    results = [fake_result(xi, 1.0) for xi in ([1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0])]
    vertices = upsilon_polygon(results)
    assert vertices.shape == (4, 2)
    assert sorted(map(tuple, np.round(vertices, 12))) == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]


def test_polygon_needs_two_dimensions():
    """One-dimensional results have no polygon."""
    with pytest.raises(ValueError):
        upsilon_polygon([fake_result([1.0], 1.0)])


def test_weinberger_limit_above_speed(lattice, logistic_model, gaussian_kernel, fast_opts):
    """Past the spreading speed the recursion settles with a vanishing right limit."""
    phi = make_phi(lattice, 0.5, 3.0, 1.0)
    limit = weinberger_limit(phi, 1.0, 4.0, [1.0], logistic_model, gaussian_kernel, stall_tol=1e-4, opts=fast_opts)
    assert np.all(limit.values >= phi.values)
    assert limit.monotonicity_defect() == 0.0
    assert limit.right_limit < 0.01


def test_profile_stability_on_doubling(logistic_model, gaussian_kernel, fast_opts):
    """Doubling the lattice does not change the side of a fast shift."""
    report = check_profile_stability(4.0, 1.0, [1.0], logistic_model, gaussian_kernel, half_width=20.0,
                                     opts=fast_opts)
    assert report.passed, report.to_text()
    assert [row["side"] for row in report.table] == ["zero", "zero"]
    assert [row["half_width"] for row in report.table] == [20.0, 40.0]


@pytest.mark.slow
def test_dichotomy_around_linear_speed(logistic_model, gaussian_kernel, fast_opts):
    """Half a unit below c* the recursion climbs to theta; half a unit above it dies out."""
    c_star = linear_spreading_speed(1.0, [1.0], logistic_model, gaussian_kernel)
    below = probe(c_star - 0.5, 1.0, [1.0], logistic_model, gaussian_kernel, opts=fast_opts)
    above = probe(c_star + 0.5, 1.0, [1.0], logistic_model, gaussian_kernel, opts=fast_opts)
    assert below.side == "theta"
    assert above.side == "zero"
    assert below.right_limit > above.right_limit


def test_weinberger_step_decreases_with_mortality(lattice, gaussian_kernel, fast_opts):
    """Raising m lowers one step of the recursion pointwise."""
    phi = make_phi(lattice, 0.3, 3.0, 0.5)
    steps = []
    for m in (1.0, 1.25, 1.5):
        model = Model.logistic(2.0, m, 1.0, gaussian_kernel)
        steps.append(weinberger_step(phi, phi, 1.0, 0.0, [1.0], model, gaussian_kernel, fast_opts).values)
    assert np.all(steps[1] <= steps[0] + 1e-12)
    assert np.all(steps[2] <= steps[1] + 1e-12)
    assert np.any(steps[2] < steps[0] - 1e-6)
