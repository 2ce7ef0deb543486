"""Level-set tracking and front speed fits."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import ndimage

from app.core.exceptions import NoCrossing
from app.evolution.stepper import Trajectory
from app.kernels.grid import Field, Grid

logger = logging.getLogger(__name__)


class FrontSpeed(BaseModel):
    speed: float
    intercept: float
    residual: float
    level: float
    points: List[Tuple[float, float]]


def _line_samples(grid: Grid, xi: np.ndarray, through: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Parameters s and lattice coordinates of through + s*xi inside the box."""
    if grid.dims == 1:
        # cell centers themselves, ordered along xi
        s = np.sort((grid.centers(0) - through[0]) * xi[0])
    else:
        reach = min(
            (grid.extent[a] / 2 - grid.spacing[a] / 2 - abs(through[a])) / abs(xi[a])
            for a in range(grid.dims)
            if abs(xi[a]) > 1e-12
        )
        h = min(grid.spacing)
        n = int(np.floor(reach / h))
        s = np.arange(-n, n + 1) * h
    coords = [
        (through[a] + s * xi[a] - grid.centers(a)[0]) / grid.spacing[a] for a in range(grid.dims)
    ]
    return s, np.stack(coords)


def level_set_position(
    field: Field,
    level: float,
    xi: Optional[Sequence[float]] = None,
    through: Optional[Sequence[float]] = None,
) -> float:
    """
    Rightmost crossing of level along xi on the line through `through`.

    Raises:
        NoCrossing: the field never crosses level on that line
    """
    grid = field.grid
    xi = np.ones(grid.dims) if xi is None else np.atleast_1d(np.asarray(xi, dtype=float))
    xi = xi / np.linalg.norm(xi)
    through = np.zeros(grid.dims) if through is None else np.atleast_1d(np.asarray(through, dtype=float))

    s, coords = _line_samples(grid, xi, through)
    values = ndimage.map_coordinates(field.values, coords, order=1, mode="grid-wrap")
    d = values - level
    above = d >= 0
    idx = np.flatnonzero(above[:-1] != above[1:])
    if idx.size == 0:
        raise NoCrossing(f"no crossing of level {level:g} along {xi.tolist()}", {"level": level})
    i = int(idx[-1])
    frac = d[i] / (d[i] - d[i + 1])
    return float(s[i] + frac * (s[i + 1] - s[i]))


def front_speed(
    traj: Trajectory,
    level: float,
    xi: Optional[Sequence[float]] = None,
    fit_window: Optional[Tuple[float, float]] = None,
) -> FrontSpeed:
    """
    Least-squares slope of the front position against time.

    Snapshots without a crossing are skipped; the residual is the RMS
    deviation from the fitted line.

    Raises:
        NoCrossing: fewer than two snapshots in the window have a crossing
    """
    t_lo, t_hi = fit_window if fit_window is not None else (-np.inf, np.inf)
    points = []
    for t, snap in zip(traj.times, traj.snapshots):
        if not t_lo <= t <= t_hi:
            continue
        try:
            points.append((float(t), level_set_position(snap, level, xi)))
        except NoCrossing:
            logger.debug(f"No crossing of {level:g} at t={t:g}")
    if len(points) < 2:
        raise NoCrossing(f"front at level {level:g} tracked at {len(points)} snapshot(s) only")
    ts, xs = np.array(points).T
    slope, intercept = np.polyfit(ts, xs, 1)
    residual = float(np.sqrt(np.mean((xs - (slope * ts + intercept)) ** 2)))
    return FrontSpeed(speed=float(slope), intercept=float(intercept), residual=residual, level=level, points=points)
