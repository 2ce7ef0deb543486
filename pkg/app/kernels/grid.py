"""Periodic grids and grid-sampled fields."""
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydField, model_validator

from app.core.exceptions import GridMismatch


class Grid(BaseModel):
    """Periodic rectangular lattice (the computational torus).

    Cell centers are ``-extent/2 + (i + 1/2) * spacing``. Kernel weights live on
    the displacement lattice (multiples of the spacing, origin included), with
    the zero lag stored at index ``cells // 2``.
    """

    model_config = ConfigDict(frozen=True)

    extent: Tuple[float, ...] = PydField(..., description="Side length per axis")
    cells: Tuple[int, ...] = PydField(..., description="Cells per axis (even)")

    @model_validator(mode="after")
    def _check_shape(self) -> "Grid":
        if len(self.extent) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ValueError("grid must have 1 or 2 axes with matching extent/cells")
        if any(e <= 0 for e in self.extent):
            raise ValueError("extent must be positive")
        if any(n <= 0 or n % 2 for n in self.cells):
            raise ValueError("cells per axis must be positive and even")
        return self

    @classmethod
    def line(cls, extent: float, cells: int) -> "Grid":
        return cls(extent=(float(extent),), cells=(int(cells),))

    @classmethod
    def square(cls, extent: float, cells: int) -> "Grid":
        return cls(extent=(float(extent),) * 2, cells=(int(cells),) * 2)

    @property
    def dims(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def periodic(self) -> bool:
        return True

    def centers(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return -self.extent[axis] / 2 + (np.arange(self.cells[axis]) + 0.5) * h

    def mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*(self.centers(a) for a in range(self.dims)), indexing="ij")

    def lags(self, axis: int = 0) -> np.ndarray:
        n = self.cells[axis]
        return (np.arange(n) - n // 2) * self.spacing[axis]

    def lag_mesh(self) -> List[np.ndarray]:
        return np.meshgrid(*(self.lags(a) for a in range(self.dims)), indexing="ij")

    def lag_radius(self) -> np.ndarray:
        """|y| on the displacement lattice."""
        return np.sqrt(sum(y ** 2 for y in self.lag_mesh()))

    def axis_grid(self, axis: int) -> "Grid":
        """The 1D grid of a single axis."""
        return Grid(extent=(self.extent[axis],), cells=(self.cells[axis],))

    def same_spacing(self, other: "Grid") -> bool:
        return self.dims == other.dims and np.allclose(self.spacing, other.spacing, rtol=1e-12)


@dataclass(frozen=True, eq=False)
class Field:
    """Grid-sampled density u(., t)."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatch(
                f"values of shape {values.shape} do not fit grid {self.grid.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float, time: float = 0.0) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)), time)

    @classmethod
    def from_function(cls, grid: Grid, fn, time: float = 0.0) -> "Field":
        """Sample fn(*coords) on the cell centers."""
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape).copy(), time)

    def with_values(self, values: np.ndarray, time: float = None) -> "Field":
        return replace(self, values=values, time=self.time if time is None else time)

    def shifted(self, cells: Tuple[int, ...]) -> "Field":
        """Translate by whole cells on the torus: (T_y u)(x) = u(x - y)."""
        return self.with_values(np.roll(self.values, tuple(cells), axis=tuple(range(self.grid.dims))))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def in_tube(self, theta: float, tol: float = 1e-10) -> bool:
        """Membership in E_theta^+ up to tol."""
        return bool(self.values.min() >= -tol and self.values.max() <= theta + tol)


def require_same_grid(a: Grid, b: Grid, what: str = "operands") -> None:
    if a != b:
        raise GridMismatch(f"{what} live on different grids: {a.shape} vs {b.shape}")
