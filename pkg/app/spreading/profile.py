"""Monotone 1D profiles and their planar embeddings."""
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from app.core.exceptions import DomainExceeded
from app.kernels.grid import Field, Grid

logger = logging.getLogger(__name__)

TAIL_SHARE = 0.05


def profile_lattice(half_width: float, spacing: float) -> Grid:
    """Symmetric lattice on [-S, S] with the given spacing (cell centers)."""
    cells = 2 * int(np.ceil(half_width / spacing))
    return Grid(extent=(cells * spacing,), cells=(cells,))


def enforce_nonincreasing(values: np.ndarray) -> np.ndarray:
    """Smallest non-increasing majorant (reverse running maximum)."""
    return np.maximum.accumulate(values[::-1])[::-1]


@dataclass(frozen=True, eq=False)
class Profile:
    """Non-increasing function sampled on a symmetric lattice."""

    lattice: Grid
    values: np.ndarray
    theta: float

    @property
    def s(self) -> np.ndarray:
        return self.lattice.centers(0)

    @property
    def half_width(self) -> float:
        return self.lattice.extent[0] / 2

    def _tail(self) -> int:
        return max(1, int(round(TAIL_SHARE * self.values.size)))

    @property
    def left_limit(self) -> float:
        return float(self.values[: self._tail()].mean())

    @property
    def right_limit(self) -> float:
        """Proxy for f(+infinity): mean over the rightmost 5% of the lattice."""
        return float(self.values[-self._tail():].mean())

    def at(self, points: np.ndarray) -> np.ndarray:
        """Linear interpolation, constant beyond the lattice ends."""
        return np.interp(points, self.s, self.values)

    def monotonicity_defect(self) -> float:
        """Largest increase between adjacent samples."""
        return float(max(0.0, np.max(np.diff(self.values)))) if self.values.size > 1 else 0.0

    def with_values(self, values: np.ndarray) -> "Profile":
        return replace(self, values=values)


def make_phi(lattice: Grid, level: float, width: float, theta: float) -> Profile:
    """
    An element of N_theta: level for s <= -width, linear to 0 at s = 0, 0 beyond.

    Args:
        lattice: Symmetric profile lattice
        level: phi(-infinity), in (0, theta)
        width: Length of the linear ramp (> 0)
        theta: Carrying capacity
    """
    if not 0 < level < theta:
        raise ValueError("phi level must lie in (0, theta)")
    if width <= 0:
        raise ValueError("phi ramp width must be positive")
    s = lattice.centers(0)
    return Profile(lattice, level * np.clip(-s / width, 0.0, 1.0), theta)


def step_profile(lattice: Grid, theta: float, at: float = 0.0) -> Profile:
    """theta on s < at, 0 beyond."""
    s = lattice.centers(0)
    return Profile(lattice, np.where(s < at, theta, 0.0), theta)


def embed_planar(g: Profile, s: float, c: float, xi: Sequence[float], grid: Grid) -> Field:
    """
    Planar field x -> g(x.xi + s + c) on grid.

    Raises:
        DomainExceeded: the slab of arguments leaves the profile lattice
    """
    xi = np.asarray(xi, dtype=float)
    if xi.size != grid.dims:
        raise ValueError("xi must match the grid dimension")
    proj = sum(coord * x for coord, x in zip(grid.mesh(), xi))
    reach = float(np.max(np.abs(proj)))
    if abs(s + c) + reach > g.half_width:
        raise DomainExceeded(
            f"|s+c| + grid radius = {abs(s + c) + reach:.4g} exceeds profile half-width {g.half_width:.4g}",
            {"s": s, "c": c, "reach": reach, "half_width": g.half_width},
        )
    return Field(grid, g.at(proj + s + c))
