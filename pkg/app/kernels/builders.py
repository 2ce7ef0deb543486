"""Dispersal kernels: construction, reduction, truncation and re-latticing."""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import fft as sp_fft
from scipy import ndimage
from scipy.special import gamma

from app.core.config import settings
from app.core.exceptions import EmptyTruncation, GridMismatch, NonNormalizable
from app.kernels.grid import Grid

logger = logging.getLogger(__name__)

KernelFamily = Literal["gaussian", "uniform_ball", "cauchy", "tabulated", "delta"]

# Minimum extent-to-scale ratio; narrower grids are refused.
EXTENT_SCALE_GUARD = 20.0
OBLIQUE_TOL = 1e-6


class KernelSpec(BaseModel):
    """Declarative description of a dispersal kernel."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    family: KernelFamily
    sigma: Optional[List[float]] = Field(None, description="Gaussian standard deviation per axis")
    mean: Optional[List[float]] = Field(None, description="Location shift (defaults to the origin)")
    radius: Optional[float] = Field(None, description="uniform_ball radius")
    scale: Optional[float] = Field(None, description="cauchy scale")
    table: Optional[List[Tuple[float, float]]] = Field(
        None, description="tabulated 1D density as (x, density) pairs, zero outside"
    )
    func: Optional[Callable] = Field(None, exclude=True, description="tabulated density f(*coords)")
    label: Optional[str] = None

    @field_validator("sigma", "mean", mode="before")
    @classmethod
    def _as_list(cls, v):
        if v is None or isinstance(v, (list, tuple)):
            return v
        return [v]

    @model_validator(mode="after")
    def _check_family(self) -> "KernelSpec":
        if self.family == "gaussian":
            if not self.sigma or any(s <= 0 for s in self.sigma):
                raise ValueError("gaussian kernel needs sigma > 0")
        elif self.family == "uniform_ball":
            if self.radius is None or self.radius <= 0:
                raise ValueError("uniform_ball kernel needs radius > 0")
        elif self.family == "cauchy":
            if self.scale is None or self.scale <= 0:
                raise ValueError("cauchy kernel needs scale > 0")
        elif self.family == "tabulated":
            if self.table is None and self.func is None:
                raise ValueError("tabulated kernel needs a table or a function")
        return self

    @property
    def nominal_scale(self) -> Optional[float]:
        """Scale parameter used by the extent guard."""
        if self.family == "gaussian":
            return float(max(self.sigma))
        if self.family == "uniform_ball":
            return float(self.radius)
        if self.family == "cauchy":
            return float(self.scale)
        return None

    def density(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Unnormalized density evaluated at displacement coordinates."""
        dims = len(coords)
        mean = list(self.mean or [0.0] * dims)
        if len(mean) == 1 and dims > 1:
            mean = mean * dims
        ys = [c - mu for c, mu in zip(coords, mean)]
        r2 = sum(y ** 2 for y in ys)

        if self.family == "gaussian":
            sigma = self.sigma * dims if len(self.sigma) == 1 else self.sigma
            out = np.ones_like(ys[0])
            for y, s in zip(ys, sigma):
                out = out * np.exp(-(y ** 2) / (2 * s ** 2)) / (np.sqrt(2 * np.pi) * s)
            return out
        if self.family == "uniform_ball":
            ball = np.pi ** (dims / 2) * self.radius ** dims / gamma(dims / 2 + 1)
            r = np.sqrt(r2)
            inside = np.where(r < self.radius * (1 - 1e-12), 1.0, 0.0)
            # lattice points on the sphere count half (trapezoid edge)
            inside = np.where(np.isclose(r, self.radius, rtol=1e-12, atol=0), 0.5, inside)
            return inside / ball
        if self.family == "cauchy":
            s = self.scale
            c = gamma((dims + 1) / 2) / np.pi ** ((dims + 1) / 2)
            return c / s ** dims * (1 + r2 / s ** 2) ** (-(dims + 1) / 2)
        if self.family == "tabulated":
            if self.func is not None:
                return np.asarray(self.func(*ys), dtype=float)
            if dims != 1:
                raise ValueError("tabulated table kernels are one-dimensional")
            xs, ds = zip(*sorted(self.table))
            return np.interp(ys[0], xs, ds, left=0.0, right=0.0)
        # delta: handled by build_kernel
        return np.zeros_like(ys[0])


@dataclass(frozen=True, eq=False)
class Kernel:
    """Discretized probability kernel on the displacement lattice of a grid.

    ``weights`` are density values times the cell volume; the zero lag sits at
    index ``cells // 2`` on every axis.
    """

    grid: Grid
    weights: np.ndarray
    mass: float
    drift_density: np.ndarray
    nondeg_radius: float
    nondeg_level: float
    label: str = ""
    normalized: bool = True

    @property
    def dims(self) -> int:
        return self.grid.dims

    @property
    def density(self) -> np.ndarray:
        return self.weights / self.grid.cell_volume

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Real FFT of the weights with the zero lag moved to index 0."""
        return sp_fft.rfftn(sp_fft.ifftshift(self.weights), workers=settings.max_workers)

    @cached_property
    def second_moment(self) -> float:
        return float((self.grid.lag_radius() ** 2 * self.weights).sum())

    @property
    def scale(self) -> float:
        """Root of the second moment on the grid."""
        return float(np.sqrt(self.second_moment))

    def projected_lags(self, xi: Sequence[float]) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return sum(y * x for y, x in zip(self.grid.lag_mesh(), xi))

    def moment_generating(self, lam: float, xi: Sequence[float]) -> float:
        """Sum of w * exp(lam * y.xi)."""
        s = self.projected_lags(xi)
        mask = self.weights > 0
        return float(np.sum(self.weights[mask] * np.exp(lam * s[mask])))

    def abs_moment(self, xi: Sequence[float]) -> float:
        """Sum of w * |y.xi|."""
        return float(np.sum(np.abs(self.projected_lags(xi)) * self.weights))

    def first_moment(self, xi: Sequence[float]) -> float:
        return float(np.dot(self.drift_density, np.asarray(xi, dtype=float)))


def nondegeneracy(grid: Grid, density: np.ndarray) -> Tuple[float, float]:
    """
    Largest lattice radius r with min density over |y| <= r at least r.

    Returns:
        (radius, level) with level the minimum density on that ball; (0, 0)
        when no positive radius qualifies.
    """
    radii = grid.lag_radius().ravel()
    order = np.argsort(radii, kind="stable")
    rs = radii[order]
    running_min = np.minimum.accumulate(density.ravel()[order])
    # only the last point of each radius shell closes the ball
    shell_end = np.append(rs[1:] > rs[:-1] * (1 + 1e-12), True)
    ok = shell_end & (running_min >= rs * (1 - 1e-9)) & (rs > 0)
    if not ok.any():
        return 0.0, 0.0
    last = int(np.flatnonzero(ok)[-1])
    return float(rs[last]), float(running_min[last])


def kernel_from_weights(
    grid: Grid, weights: np.ndarray, label: str = "", normalized: bool = True
) -> Kernel:
    """Assemble a Kernel (mass, drift, nondegeneracy) from lattice weights."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != grid.shape:
        raise GridMismatch(f"weights of shape {weights.shape} do not fit grid {grid.shape}")
    if np.any(weights < 0):
        raise ValueError("kernel weights must be nonnegative")
    mass = float(weights.sum())
    drift = np.array([float((y * weights).sum()) for y in grid.lag_mesh()])
    radius, level = nondegeneracy(grid, weights / grid.cell_volume)
    return Kernel(
        grid=grid,
        weights=weights,
        mass=mass,
        drift_density=drift,
        nondeg_radius=radius,
        nondeg_level=level,
        label=label,
        normalized=normalized,
    )


def build_kernel(spec: KernelSpec, grid: Grid) -> Kernel:
    """
    Discretize and normalize a kernel on the displacement lattice of grid.

    Args:
        spec: Kernel family and parameters
        grid: Target grid

    Returns:
        Normalized Kernel with drift and nondegeneracy metadata

    Raises:
        GridMismatch: the grid extent is below EXTENT_SCALE_GUARD times the kernel scale
        NonNormalizable: raw mass on the grid below settings.min_raw_mass
    """
    label = spec.label or spec.family
    scale = spec.nominal_scale
    if scale is not None and min(grid.extent) < EXTENT_SCALE_GUARD * scale:
        raise GridMismatch(
            f"grid extent {min(grid.extent):g} is below {EXTENT_SCALE_GUARD:g}x the "
            f"{spec.family} scale {scale:g}; tails would be truncated",
            {"extent": min(grid.extent), "scale": scale, "guard": EXTENT_SCALE_GUARD},
        )

    if spec.family == "delta":
        weights = np.zeros(grid.shape)
        weights[tuple(n // 2 for n in grid.cells)] = 1.0
        return kernel_from_weights(grid, weights, label)

    weights = spec.density(grid.lag_mesh()) * grid.cell_volume
    raw = float(weights.sum())
    if raw < settings.min_raw_mass:
        raise NonNormalizable(
            f"{spec.family} kernel keeps raw mass {raw:.6f} < {settings.min_raw_mass} on the grid",
            {"raw_mass": raw, "extent": list(grid.extent)},
        )
    kernel = kernel_from_weights(grid, weights / raw, label)
    logger.debug(
        f"Built {label} kernel: raw_mass={raw:.12f}, drift={kernel.drift_density.tolist()}, "
        f"nondeg_radius={kernel.nondeg_radius:.4f}"
    )
    return kernel


def _reflect(weights: np.ndarray) -> np.ndarray:
    # lag y -> -y; the +-N/2 lag is its own mirror on the torus
    return np.roll(weights[::-1], 1)


def reduce_kernel(kernel: Kernel, xi: Sequence[float]) -> Kernel:
    """
    Marginal of the kernel along the unit vector xi (a 1D kernel).

    Axis-aligned directions marginalize exactly on the lattice. Oblique
    directions integrate a cubic interpolant of the density across lines
    orthogonal to xi and are rejected when the mass or moment residual
    exceeds OBLIQUE_TOL; the absolute moment is allowed the lattice error of
    |s| at the origin on top of that.

    Raises:
        GridMismatch: oblique reduction not resolved by the grid
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != kernel.dims or not np.isclose(np.linalg.norm(xi), 1.0, atol=1e-12):
        raise ValueError(f"xi must be a unit vector in {kernel.dims} dimensions")

    if kernel.dims == 1:
        if xi[0] > 0:
            return kernel
        return kernel_from_weights(kernel.grid, _reflect(kernel.weights), kernel.label, kernel.normalized)

    axis_hits = np.flatnonzero(np.isclose(np.abs(xi), 1.0, atol=1e-12))
    if axis_hits.size == 1:
        axis = int(axis_hits[0])
        other = 1 - axis
        line = kernel.weights.sum(axis=other)
        if xi[axis] < 0:
            line = _reflect(line)
        return kernel_from_weights(kernel.grid.axis_grid(axis), line, kernel.label, kernel.normalized)

    return _reduce_oblique(kernel, xi)


def _reduce_oblique(kernel: Kernel, xi: np.ndarray) -> Kernel:
    grid = kernel.grid
    h = min(grid.spacing)
    half = 0.5 * sum(abs(x) * e for x, e in zip(xi, grid.extent))
    cells = 2 * int(np.ceil(half / h))
    line_grid = Grid(extent=(cells * h,), cells=(cells,))
    s = line_grid.lags(0)

    perp = np.array([-xi[1], xi[0]])
    reach = 0.5 * float(np.hypot(*grid.extent))
    tau = np.arange(-np.ceil(reach / h), np.ceil(reach / h) + 1) * h
    S, TAU = np.meshgrid(s, tau, indexing="ij")
    y0 = S * xi[0] + TAU * perp[0]
    y1 = S * xi[1] + TAU * perp[1]
    coords = np.array([
        y0 / grid.spacing[0] + grid.cells[0] // 2,
        y1 / grid.spacing[1] + grid.cells[1] // 2,
    ])
    dens = ndimage.map_coordinates(kernel.density, coords.reshape(2, -1), order=3, mode="constant", cval=0.0)
    line_density = np.clip(dens.reshape(S.shape), 0.0, None).sum(axis=1) * h

    weights = line_density * h
    raw = float(weights.sum())
    if raw <= 0:
        raise GridMismatch("oblique reduction produced no mass")
    reduced = kernel_from_weights(line_grid, weights * (kernel.mass / raw), kernel.label, kernel.normalized)

    residual = max(
        abs(raw - kernel.mass),
        abs(reduced.drift_density[0] - kernel.first_moment(xi)),
    )
    # |s| has a kink at the origin; each lattice sum carries an O(density(0) h^2) error of its own
    kink = float(reduced.density[cells // 2]) * h ** 2 / 3
    abs_gap = abs(reduced.abs_moment([1.0]) - kernel.abs_moment(xi))
    residual = max(residual, abs_gap - kink)
    if residual > OBLIQUE_TOL:
        raise GridMismatch(
            f"oblique reduction along {xi.tolist()} has interpolation residual {residual:.3e}",
            {"residual": residual, "abs_moment_gap": abs_gap},
        )
    return reduced


def truncate_kernel(kernel: Kernel, radius: float) -> Tuple[Kernel, np.ndarray]:
    """
    Restrict the kernel to the ball B_radius(0) without renormalizing.

    Returns:
        (truncated sub-stochastic kernel, its first moment)

    Raises:
        EmptyTruncation: no weight left inside the ball
    """
    if radius <= 0:
        raise ValueError("truncation radius must be positive")
    weights = np.where(kernel.grid.lag_radius() <= radius * (1 + 1e-12), kernel.weights, 0.0)
    if not np.any(weights > 0):
        raise EmptyTruncation(f"no kernel weight inside radius {radius}", {"radius": radius})
    truncated = kernel_from_weights(kernel.grid, weights, f"{kernel.label}|B{radius:g}", normalized=False)
    return truncated, truncated.drift_density.copy()


def normalize_kernel(kernel: Kernel) -> Kernel:
    """Rescale to unit mass."""
    if kernel.mass <= 0:
        raise NonNormalizable("kernel has no mass to normalize")
    return kernel_from_weights(kernel.grid, kernel.weights / kernel.mass, kernel.label)


def embed_kernel(kernel: Kernel, grid: Grid) -> Kernel:
    """
    Re-lattice a kernel onto another grid with the same spacing.

    Lags outside the new grid are dropped (with a warning when the dropped
    mass exceeds 1e-10) and the result is rescaled to the original mass.

    Raises:
        GridMismatch: spacings differ
    """
    if not kernel.grid.same_spacing(grid):
        raise GridMismatch(
            f"cannot embed a kernel of spacing {kernel.grid.spacing} into spacing {grid.spacing}"
        )
    if kernel.grid == grid:
        return kernel

    weights = np.zeros(grid.shape)
    src, dst = [], []
    for n_old, n_new in zip(kernel.grid.cells, grid.cells):
        lo = max(-(n_old // 2), -(n_new // 2))
        hi = min(n_old - n_old // 2, n_new - n_new // 2)
        src.append(slice(lo + n_old // 2, hi + n_old // 2))
        dst.append(slice(lo + n_new // 2, hi + n_new // 2))
    weights[tuple(dst)] = kernel.weights[tuple(src)]

    kept = float(weights.sum())
    dropped = kernel.mass - kept
    if dropped > 1e-10:
        logger.warning(f"Embedding {kernel.label} kernel drops mass {dropped:.3e}")
    if kept <= 0:
        raise EmptyTruncation("embedding removed every kernel weight")
    return kernel_from_weights(grid, weights * (kernel.mass / kept), kernel.label, kernel.normalized)

