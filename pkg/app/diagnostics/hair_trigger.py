"""Moving-window minimum of a trajectory and the hair-trigger verdict."""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from app.core.exceptions import SeamViolation
from app.core.reports import CheckReport, verdict_of
from app.evolution.stepper import Trajectory
from app.kernels.grid import Grid

logger = logging.getLogger(__name__)

SEAM_SCALES = 10.0


class MetricSeries(BaseModel):
    """(t, min over K + t*drift of u) pairs."""

    times: List[float] = Field(default_factory=list)
    values: List[float] = Field(default_factory=list)
    half_width: float
    drift: List[float]

    def first_time_reaching(self, level: float) -> Optional[float]:
        for t, v in zip(self.times, self.values):
            if v >= level:
                return t
        return None

    def nondecreasing_from(self, tol: float = 1e-10) -> Optional[float]:
        """Earliest time after which the series never drops by more than tol."""
        vals = np.asarray(self.values)
        if vals.size == 0:
            return None
        drops = np.flatnonzero(np.diff(vals) < -tol)
        start = 0 if drops.size == 0 else int(drops[-1]) + 1
        return self.times[start]

    def to_rows(self) -> List[dict]:
        return [{"t": t, "window_min": v} for t, v in zip(self.times, self.values)]


def _window_offsets(grid: Grid, half_width: float) -> List[np.ndarray]:
    axes = []
    for h in grid.spacing:
        n = int(np.floor(half_width / h + 1e-9))
        axes.append(np.arange(-n, n + 1) * h)
    return np.meshgrid(*axes, indexing="ij")


def _window_min(values: np.ndarray, grid: Grid, centre: np.ndarray, offsets: List[np.ndarray]) -> float:
    coords = []
    for axis, (off, c) in enumerate(zip(offsets, centre)):
        origin = grid.centers(axis)[0]
        coords.append(((c + off - origin) / grid.spacing[axis]).ravel())
    sampled = ndimage.map_coordinates(values, np.stack(coords), order=1, mode="grid-wrap")
    return float(sampled.min())


def hair_trigger_metric(
    traj: Trajectory,
    half_width: float,
    drift: Optional[Sequence[float]] = None,
    seam_scales: float = SEAM_SCALES,
) -> MetricSeries:
    """
    Minimum of u(x + t*drift, t) over the square window |x|_inf <= half_width.

    Off-lattice window points are read by linear interpolation.

    Raises:
        SeamViolation: the moving window comes within seam_scales kernel
            scales of the torus seam at some snapshot time
    """
    grid = traj.grid
    drift = np.zeros(grid.dims) if drift is None else np.atleast_1d(np.asarray(drift, dtype=float))
    if drift.size == 1 and grid.dims > 1:
        drift = np.full(grid.dims, drift[0])
    guard = seam_scales * traj.kernel.scale
    offsets = _window_offsets(grid, half_width)

    series = MetricSeries(half_width=half_width, drift=drift.tolist())
    for t, snap in zip(traj.times, traj.snapshots):
        centre = t * drift
        reach = np.abs(centre) + half_width
        limit = np.asarray(grid.extent) / 2 - guard
        if np.any(reach > limit):
            raise SeamViolation(
                f"window at t={t:g} reaches {reach.max():g}, beyond the seam guard {limit.min():g}",
                {"t": t, "centre": centre.tolist(), "guard": guard},
            )
        series.times.append(float(t))
        series.values.append(_window_min(snap.values, grid, centre, offsets))
    logger.debug(f"Hair-trigger metric over {len(series.times)} snapshots, last {series.values[-1]:.6g}")
    return series


def hair_trigger_verdict(series: MetricSeries, theta: float, eps: float, t_max: float) -> CheckReport:
    """Holds when the series reaches theta - eps at some snapshot t <= t_max."""
    level = theta - eps
    reached = series.first_time_reaching(level)
    ok = reached is not None and reached <= t_max
    top = max(series.values) if series.values else float("nan")
    return CheckReport(
        check=f"hair_trigger(eps={eps:g})",
        verdict=verdict_of(ok),
        margin=(t_max - reached) if reached is not None else top - level,
        witness={"t_reached": reached, "level": level, "t_max": t_max, "max_metric": top},
        details={"nondecreasing_from": series.nondecreasing_from()},
    )
