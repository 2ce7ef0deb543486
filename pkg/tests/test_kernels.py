"""Tests for grids, kernel construction and convolution."""
import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import EmptyTruncation, GridMismatch, NonNormalizable
from app.kernels import (
    Field,
    Grid,
    KernelSpec,
    build_kernel,
    convolve,
    convolve_values,
    embed_kernel,
    kernel_from_weights,
    normalize_kernel,
    reduce_kernel,
    truncate_kernel,
)


def test_grid_centers_and_lags():
    """Cell centers are offset by half a cell; the zero lag sits at cells // 2."""
    grid = Grid.line(10.0, 10)
    assert grid.spacing == (1.0,)
    assert grid.centers(0)[0] == pytest.approx(-4.5)
    assert grid.centers(0)[-1] == pytest.approx(4.5)
    assert grid.lags(0)[5] == 0.0
    assert grid.lags(0)[0] == pytest.approx(-5.0)


def test_grid_rejects_odd_cells():
    """Odd cell counts are refused."""
    with pytest.raises(ValidationError):
        Grid.line(10.0, 11)


def test_field_shape_mismatch(line_grid):
    """Values must match the grid shape."""
    with pytest.raises(GridMismatch):
        Field(line_grid, np.zeros(10))


def test_gaussian_kernel_moments(gaussian_kernel):
    """Unit mass, zero drift and unit variance on a fine lattice."""
    assert gaussian_kernel.mass == pytest.approx(1.0, abs=1e-12)
    assert gaussian_kernel.drift_density[0] == pytest.approx(0.0, abs=1e-12)
    assert gaussian_kernel.second_moment == pytest.approx(1.0, rel=1e-8)
    assert gaussian_kernel.normalized


def test_shifted_gaussian_drift(shifted_kernel):
    """Mean-1 Gaussian has first moment 1."""
    assert shifted_kernel.drift_density[0] == pytest.approx(1.0, abs=1e-9)
    assert shifted_kernel.first_moment([1.0]) == pytest.approx(1.0, abs=1e-9)
    assert shifted_kernel.first_moment([-1.0]) == pytest.approx(-1.0, abs=1e-9)


def test_gaussian_nondegeneracy_radius():
    """Largest rho with density >= rho on B_rho, to lattice resolution."""
    grid = Grid.line(400.0, 8192)
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0), grid)
    assert kernel.nondeg_radius == pytest.approx(0.3418, abs=grid.spacing[0])
    assert kernel.nondeg_level >= kernel.nondeg_radius


def test_uniform_ball_half_weight_on_sphere():
    """Lattice points exactly on |y| = R carry half weight; rho = 1/2 in 1D."""
    grid = Grid.line(100.0, 1000)
    kernel = build_kernel(KernelSpec(family="uniform_ball", radius=1.0), grid)
    centre = grid.cells[0] // 2
    inner = kernel.weights[centre]
    assert kernel.weights[centre + 10] == pytest.approx(inner / 2)
    assert kernel.weights[centre + 11] == 0.0
    assert kernel.nondeg_radius == pytest.approx(0.5)


def test_delta_kernel_is_identity(line_grid, rng):
    """Convolving with the delta kernel returns the field."""
    kernel = build_kernel(KernelSpec(family="delta"), line_grid)
    values = rng.uniform(size=line_grid.shape)
    assert np.allclose(convolve_values(kernel, values), values, atol=1e-14)
    assert kernel.nondeg_radius == 0.0


def test_cauchy_on_short_grid_not_normalizable(line_grid):
    """Cauchy keeps raw mass about 0.987 on [-50, 50]."""
    with pytest.raises(NonNormalizable) as exc_info:
        build_kernel(KernelSpec(family="cauchy", scale=1.0), line_grid)
    assert exc_info.value.details["raw_mass"] == pytest.approx(2 / np.pi * np.arctan(50), abs=2e-3)


def test_extent_below_scale_guard_refused(small_grid):
    """A grid shorter than 20 kernel scales is refused, not just warned about."""
    with pytest.raises(GridMismatch) as exc_info:
        build_kernel(KernelSpec(family="gaussian", sigma=2.0), small_grid)
    assert exc_info.value.details["scale"] == 2.0
    assert exc_info.value.details["extent"] == pytest.approx(20.0)
    with pytest.raises(GridMismatch):
        build_kernel(KernelSpec(family="cauchy", scale=1.0), Grid.line(10.0, 64))
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0), small_grid)
    assert kernel.mass == pytest.approx(1.0)


def test_cauchy_truncation_mass():
    """Mass kept on B_20 matches arctan(20) / arctan(400) after normalization."""
    grid = Grid.line(800.0, 8192)
    kernel = build_kernel(KernelSpec(family="cauchy", scale=1.0), grid)
    truncated, moment = truncate_kernel(kernel, 20.0)
    assert not truncated.normalized
    assert truncated.mass == pytest.approx(np.arctan(20.0) / np.arctan(400.0), abs=2e-4)
    assert moment[0] == pytest.approx(0.0, abs=1e-12)
    assert normalize_kernel(truncated).mass == pytest.approx(1.0, abs=1e-12)


def test_truncation_can_be_empty(line_grid):
    """A kernel supported away from the origin has nothing left in a small ball."""
    kernel = build_kernel(KernelSpec(family="uniform_ball", radius=3.0, mean=10.0), line_grid)
    with pytest.raises(EmptyTruncation):
        truncate_kernel(kernel, 2.0)


def test_direct_and_spectral_paths_agree(gaussian_kernel, rng):
    """Both convolution paths give the same periodic convolution."""
    values = rng.uniform(size=gaussian_kernel.grid.shape)
    direct = convolve_values(gaussian_kernel, values, method="direct")
    spectral = convolve_values(gaussian_kernel, values, method="spectral")
    assert np.max(np.abs(direct - spectral)) < 1e-12


def test_convolution_of_constant(gaussian_kernel, small_grid):
    """a*c = c * mass on both paths."""
    out = convolve(gaussian_kernel, Field.constant(gaussian_kernel.grid, 0.7))
    assert np.allclose(out.values, 0.7, atol=1e-13)

    small = build_kernel(KernelSpec(family="gaussian", sigma=0.5), small_grid)
    out = convolve(small, Field.constant(small_grid, 0.7), method="auto")
    assert np.allclose(out.values, 0.7 * small.mass, atol=1e-13)


def test_convolution_shifts_by_mean(line_grid):
    """A delta at 0 convolved with a shifted kernel lands around the shift."""
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=0.5, mean=2.0), line_grid)
    point = np.zeros(line_grid.shape)
    point[line_grid.cells[0] // 2] = 1.0
    out = convolve_values(kernel, point)
    lags = line_grid.lags(0)
    assert np.sum(out * lags) == pytest.approx(2.0, abs=1e-6)


def test_convolve_grid_mismatch(gaussian_kernel, small_grid):
    """Kernel and field on different grids."""
    with pytest.raises(GridMismatch):
        convolve(gaussian_kernel, Field.constant(small_grid, 1.0))


def test_reduce_kernel_axis_aligned():
    """Marginal along +-e1 keeps mass and flips the drift sign."""
    grid = Grid.square(40.0, 128)
    kernel = build_kernel(KernelSpec(family="gaussian", sigma=1.0, mean=[1.0, 0.0]), grid)
    forward = reduce_kernel(kernel, [1.0, 0.0])
    backward = reduce_kernel(kernel, [-1.0, 0.0])
    across = reduce_kernel(kernel, [0.0, 1.0])
    assert forward.dims == 1
    assert forward.mass == pytest.approx(1.0, abs=1e-12)
    assert forward.drift_density[0] == pytest.approx(1.0, abs=1e-6)
    assert backward.drift_density[0] == pytest.approx(-1.0, abs=1e-6)
    assert across.drift_density[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("method", ["direct", "spectral"])
def test_gaussian_convolution_adds_variances(method):
    """N(0, 1) * N(0, 4) is N(0, 5) on the lag lattice."""
    grid = Grid.line(100.0, 1024)
    narrow = build_kernel(KernelSpec(family="gaussian", sigma=1.0), grid)
    broad = build_kernel(KernelSpec(family="gaussian", sigma=2.0), grid)
    combined = convolve_values(broad, narrow.weights, method)
    s = grid.lags(0)
    expected = grid.spacing[0] * np.exp(-(s ** 2) / 10.0) / np.sqrt(10.0 * np.pi)
    np.testing.assert_allclose(combined, expected, atol=1e-10)


def test_reduce_product_kernel_along_second_axis():
    """The e2 marginal of N(0, 1) x N(0, 4) is the 1D N(0, 4) kernel."""
    grid = Grid.square(80.0, 256)
    product = build_kernel(KernelSpec(family="gaussian", sigma=[1.0, 2.0]), grid)
    marginal = reduce_kernel(product, [0.0, 1.0])
    reference = build_kernel(KernelSpec(family="gaussian", sigma=2.0), grid.axis_grid(1))
    np.testing.assert_allclose(marginal.weights, reference.weights, atol=1e-12)
    assert marginal.second_moment == pytest.approx(4.0, abs=1e-8)


def test_reduce_kernel_oblique():
    """Along (0.6, 0.8) an isotropic Gaussian reduces to N(0, 1) and a shifted one keeps xi . drift."""
    grid = Grid.square(40.0, 128)
    xi = [0.6, 0.8]
    isotropic = reduce_kernel(build_kernel(KernelSpec(family="gaussian", sigma=1.0), grid), xi)
    assert isotropic.dims == 1
    assert isotropic.mass == pytest.approx(1.0, abs=1e-10)
    assert isotropic.drift_density[0] == pytest.approx(0.0, abs=1e-8)
    assert isotropic.second_moment == pytest.approx(1.0, abs=1e-6)
    s = isotropic.grid.lags(0)
    np.testing.assert_allclose(isotropic.density, np.exp(-(s ** 2) / 2) / np.sqrt(2 * np.pi), atol=1e-4)

    shifted = build_kernel(KernelSpec(family="gaussian", sigma=1.0, mean=[1.0, 0.0]), grid)
    assert reduce_kernel(shifted, xi).drift_density[0] == pytest.approx(0.6, abs=1e-8)


def test_reduce_kernel_oblique_unresolved():
    """A disc sampled at 0.625 cannot be interpolated across oblique lines."""
    grid = Grid.square(40.0, 64)
    disc = build_kernel(KernelSpec(family="uniform_ball", radius=2.0), grid)
    with pytest.raises(GridMismatch) as exc_info:
        reduce_kernel(disc, [0.6, 0.8])
    assert exc_info.value.details["residual"] > 1e-6
    assert reduce_kernel(disc, [1.0, 0.0]).mass == pytest.approx(1.0, abs=1e-12)


def test_reduce_kernel_reflects_in_1d(shifted_kernel):
    """In one dimension xi = -1 mirrors the lags."""
    mirrored = reduce_kernel(shifted_kernel, [-1.0])
    assert mirrored.drift_density[0] == pytest.approx(-1.0, abs=1e-9)
    assert reduce_kernel(shifted_kernel, [1.0]) is shifted_kernel


def test_reduce_kernel_rejects_non_unit(gaussian_kernel):
    with pytest.raises(ValueError):
        reduce_kernel(gaussian_kernel, [2.0])


def test_embed_kernel_preserves_moments(gaussian_kernel):
    """Zero-padding to a wider grid with the same spacing keeps mass and drift."""
    wide = Grid.line(200.0, 1024)
    embedded = embed_kernel(gaussian_kernel, wide)
    assert embedded.grid == wide
    assert embedded.mass == pytest.approx(gaussian_kernel.mass, abs=1e-14)
    assert embedded.second_moment == pytest.approx(gaussian_kernel.second_moment, rel=1e-12)


def test_embed_kernel_spacing_mismatch(gaussian_kernel):
    with pytest.raises(GridMismatch):
        embed_kernel(gaussian_kernel, Grid.line(100.0, 256))


def test_kernel_from_weights_rejects_negative(small_grid):
    weights = np.zeros(small_grid.shape)
    weights[0] = -1.0
    with pytest.raises(ValueError):
        kernel_from_weights(small_grid, weights)
