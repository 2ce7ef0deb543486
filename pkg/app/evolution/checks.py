"""Property checks on trajectories: comparison, tube, positivity, symmetry and stability."""
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.core.exceptions import GridMismatch
from app.core.reports import CheckReport, Verdict, verdict_of
from app.evolution.stepper import EvolveOptions, Trajectory, evolve, linear_upper_bound
from app.kernels.builders import Kernel
from app.kernels.grid import Field, Grid
from app.nonlinearity.assumptions import comparison_condition
from app.nonlinearity.model import Model

logger = logging.getLogger(__name__)


def _where(grid: Grid, flat_index: int) -> dict:
    idx = np.unravel_index(int(flat_index), grid.shape)
    return {
        "cell": [int(i) for i in idx],
        "x": [float(grid.centers(a)[i]) for a, i in enumerate(idx)],
    }


def window_mask(grid: Grid, half_width: float, centre: Optional[Sequence[float]] = None) -> np.ndarray:
    """Cells whose centers lie in the box |x - centre|_inf <= half_width."""
    centre = np.zeros(grid.dims) if centre is None else np.asarray(centre, dtype=float)
    mask = np.ones(grid.shape, dtype=bool)
    for coord, c in zip(grid.mesh(), centre):
        mask &= np.abs(coord - c) <= half_width
    return mask


def check_comparison(lo: Trajectory, hi: Trajectory, tol: float = 1e-8) -> CheckReport:
    """
    Verify lo <= hi + tol cell-wise at every shared snapshot.

    details["a4"] carries the (A4) verdict of the upper run's model (and
    details["a4_lower"] the lower one's when the models differ); without (A4)
    the ordering is observed, not guaranteed.

    Raises:
        GridMismatch: the trajectories do not share grid and snapshot times
    """
    if lo.grid != hi.grid or not np.allclose(lo.times, hi.times):
        raise GridMismatch("comparison needs trajectories on the same grid and times")
    worst, worst_t, worst_cell = np.inf, 0.0, 0
    for t, a, b in zip(lo.times, lo.snapshots, hi.snapshots):
        gap = b.values - a.values
        idx = int(np.argmin(gap))
        if gap.ravel()[idx] < worst:
            worst, worst_t, worst_cell = float(gap.ravel()[idx]), t, idx

    a4 = comparison_condition(hi.model, hi.kernel)
    details = {"a4": a4.verdict.value, "a4_margin": a4.margin}
    if lo.model is not hi.model:
        details["a4_lower"] = comparison_condition(lo.model, lo.kernel).verdict.value
    if not a4.passed:
        logger.warning(f"(A4) fails for {hi.model.label or hi.model.variant.value}; comparison is not guaranteed")
    return CheckReport(
        check="comparison",
        verdict=verdict_of(worst >= -tol),
        margin=worst,
        witness={"t": worst_t, **_where(lo.grid, worst_cell)},
        details=details,
    )


def check_tube(traj: Trajectory, theta: float, tol: float = 1e-8) -> CheckReport:
    """0 <= u <= theta (within tol) at every snapshot."""
    worst, worst_t, worst_cell = np.inf, 0.0, 0
    for t, snap in zip(traj.times, traj.snapshots):
        slack = np.minimum(snap.values, theta - snap.values)
        idx = int(np.argmin(slack))
        if slack.ravel()[idx] < worst:
            worst, worst_t, worst_cell = float(slack.ravel()[idx]), t, idx
    return CheckReport(
        check="tube",
        verdict=verdict_of(worst >= -tol),
        margin=worst,
        witness={"t": worst_t, "theta": theta, **_where(traj.grid, worst_cell)},
    )


def check_positivity(
    traj: Trajectory,
    t_min: float,
    half_width: Optional[float] = None,
    centre: Optional[Sequence[float]] = None,
    theta: Optional[float] = None,
) -> CheckReport:
    """
    min over the window of u(., t) > 0 for snapshots with t >= t_min.

    Constant initial data 0 or theta are not applicable.

    Args:
        half_width: Window half-width (default 10 kernel scales)
    """
    u0 = traj.initial.values
    theta = traj.model.theta if theta is None else theta
    if np.all(u0 == 0) or np.allclose(u0, theta, rtol=0, atol=1e-14):
        return CheckReport(check="positivity", verdict=Verdict.NOT_APPLICABLE,
                           details={"reason": "initial field is a constant solution"})
    half_width = 10 * traj.kernel.scale if half_width is None else half_width
    mask = window_mask(traj.grid, half_width, centre)
    worst, worst_t = np.inf, None
    for t, snap in zip(traj.times, traj.snapshots):
        if t < t_min:
            continue
        low = float(snap.values[mask].min())
        if low < worst:
            worst, worst_t = low, t
    if worst_t is None:
        return CheckReport(check="positivity", verdict=Verdict.NOT_APPLICABLE,
                           details={"reason": f"no snapshot at t >= {t_min}"})
    return CheckReport(check="positivity", verdict=verdict_of(worst > 0), margin=worst,
                       witness={"t": worst_t, "half_width": half_width})


def check_equivariance(
    u0: Field,
    shift: Sequence[int],
    horizon: float,
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
    tol: float = 1e-10,
) -> CheckReport:
    """sup |evolve(T_y u0) - T_y evolve(u0)| at the horizon for a whole-cell shift y."""
    shift = tuple(int(s) for s in shift)
    base = evolve(u0, horizon, model, kernel, opts).final
    moved = evolve(u0.shifted(shift), horizon, model, kernel, opts).final
    err = float(np.max(np.abs(moved.values - base.shifted(shift).values)))
    return CheckReport(check="equivariance", verdict=verdict_of(err <= tol), margin=tol - err,
                       witness={"shift_cells": list(shift), "sup_difference": err})


def _lattice_step(xi: Sequence[float]) -> tuple:
    xi = np.asarray(xi, dtype=float)
    if not np.isclose(np.linalg.norm(xi), 1.0):
        raise ValueError("xi must be a unit vector")
    steps = np.sign(np.round(xi, 12)).astype(int)
    if not np.allclose(xi, steps / np.linalg.norm(steps)):
        raise ValueError("monotonicity is checked along lattice directions only")
    return tuple(int(s) for s in steps)


def check_directional_monotonicity(
    traj: Trajectory,
    xi: Sequence[float],
    half_width: float,
    increasing: bool = False,
    tol: float = 1e-10,
) -> CheckReport:
    """
    u(x + h xi) - u(x) keeps one sign (within tol) inside a window, all snapshots.

    The window keeps the check away from the torus seam, where a monotone
    profile necessarily jumps.
    """
    steps = _lattice_step(xi)
    axes = tuple(range(traj.grid.dims))
    mask = window_mask(traj.grid, half_width)
    # both ends of every compared pair inside the window
    mask &= np.roll(mask, tuple(-s for s in steps), axes)
    sign = 1.0 if increasing else -1.0
    worst, worst_t, worst_cell = np.inf, 0.0, 0
    for t, snap in zip(traj.times, traj.snapshots):
        ahead = np.roll(snap.values, tuple(-s for s in steps), axes)
        slack = np.where(mask, sign * (ahead - snap.values), np.inf)
        idx = int(np.argmin(slack))
        if slack.ravel()[idx] < worst:
            worst, worst_t, worst_cell = float(slack.ravel()[idx]), t, idx
    return CheckReport(
        check="directional_monotonicity",
        verdict=verdict_of(worst >= -tol),
        margin=worst,
        witness={"t": worst_t, "xi": list(map(float, xi)), **_where(traj.grid, worst_cell)},
        details={"direction": "increasing" if increasing else "non-increasing"},
    )


def check_continuous_dependence(
    u0: Field,
    perturbation: np.ndarray,
    epsilons: Sequence[float],
    horizon: float,
    half_width: float,
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
) -> CheckReport:
    """
    Deviation max_{t<=T} max_K |u_eps - u| for u_eps started at u0 + eps*perturbation.

    Holds when the deviation shrinks with eps and deviation/eps stays within a
    factor 10 across the table.
    """
    opts = opts or EvolveOptions(snapshot_interval=max(horizon / 20, 1e-3))
    mask = window_mask(u0.grid, half_width)
    base = evolve(u0, horizon, model, kernel, opts).values()
    rows = []
    for eps in epsilons:
        if eps == 0:
            rows.append({"eps": 0.0, "deviation": 0.0, "ratio": None})
            continue
        start = u0.with_values(np.clip(u0.values + eps * perturbation, 0.0, None))
        other = evolve(start, horizon, model, kernel, opts).values()
        dev = float(np.max(np.abs(other - base)[:, mask]))
        rows.append({"eps": float(eps), "deviation": dev, "ratio": dev / eps})

    nonzero = sorted((r for r in rows if r["eps"] > 0), key=lambda r: -r["eps"])
    ok = all(r["deviation"] == 0.0 for r in rows if r["eps"] == 0)
    ok &= all(a["deviation"] >= b["deviation"] for a, b in zip(nonzero, nonzero[1:]))
    ratios = [r["ratio"] for r in nonzero if r["ratio"] > 0]
    spread = max(ratios) / min(ratios) if ratios else 1.0
    ok &= spread <= 10.0
    return CheckReport(check="continuous_dependence", verdict=verdict_of(ok), margin=10.0 - spread,
                       witness={"ratio_spread": spread}, table=rows)


def check_semigroup(
    u0: Field,
    s: float,
    t: float,
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
    tol: Optional[float] = None,
) -> CheckReport:
    """evolve(u0, s+t) against evolve(evolve(u0, s), t); the long run stops at s."""
    opts = opts or EvolveOptions()
    tol = 2 * opts.picard_tol if tol is None else tol
    long_opts = opts.model_copy(update={"snapshot_times": sorted(set(opts.snapshot_times) | {s})})
    whole = evolve(u0, s + t, model, kernel, long_opts).final
    first = evolve(u0, s, model, kernel, opts).final
    second = evolve(first, t, model, kernel, opts).final
    err = float(np.max(np.abs(whole.values - second.values)))
    return CheckReport(check="semigroup", verdict=verdict_of(err <= tol), margin=tol - err,
                       witness={"s": s, "t": t, "sup_difference": err})


def check_step_refinement(
    u0: Field,
    horizon: float,
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
    levels: int = 3,
    tol: float = 1e-6,
) -> CheckReport:
    """
    Compare solutions under successive halvings of max_dt.

    Reports sup-differences of consecutive levels and the observed order
    log2(d_k / d_{k+1}); holds when the finest difference is below tol.
    """
    opts = opts or EvolveOptions()
    finals = []
    for k in range(levels):
        level_opts = opts.model_copy(update={"max_dt": opts.max_dt / 2 ** k})
        finals.append(evolve(u0, horizon, model, kernel, level_opts).final.values)
    rows = []
    for k in range(levels - 1):
        diff = float(np.max(np.abs(finals[k] - finals[k + 1])))
        rows.append({"max_dt": opts.max_dt / 2 ** k, "difference": diff})
    for a, b in zip(rows, rows[1:]):
        if a["difference"] > 0 and b["difference"] > 0:
            b["order"] = float(np.log2(a["difference"] / b["difference"]))
    finest = rows[-1]["difference"] if rows else 0.0
    return CheckReport(check="step_refinement", verdict=verdict_of(finest <= tol), margin=tol - finest,
                       witness={"finest_difference": finest}, table=rows)


def check_time_regularity(traj: Trajectory, theta: float) -> CheckReport:
    """Consecutive snapshots obey ||u(t) - u(s)|| <= (2 kappa C + 2 m C + C g_C)|t - s|, C = theta, g_C = beta."""
    model = traj.model
    bound = 2 * model.kappa * theta + 2 * model.m * theta + theta * model.beta
    worst, worst_t = 0.0, 0.0
    for (s, a), (t, b) in zip(zip(traj.times, traj.snapshots), zip(traj.times[1:], traj.snapshots[1:])):
        rate = float(np.max(np.abs(b.values - a.values))) / (t - s)
        if rate > worst:
            worst, worst_t = rate, t
    return CheckReport(check="time_regularity", verdict=verdict_of(worst <= bound), margin=bound - worst,
                       witness={"t": worst_t, "rate": worst, "bound": bound})


def check_linear_bound(traj: Trajectory, tol: float = 1e-8) -> CheckReport:
    """u(., t) <= e^{-mt} e^{t kappa A} u0 cell-wise at every snapshot."""
    model = traj.model
    worst, worst_t, worst_cell = np.inf, 0.0, 0
    for t, snap in zip(traj.times, traj.snapshots):
        upper = linear_upper_bound(traj.initial, t, model.kappa, model.m, traj.kernel)
        gap = upper.values - snap.values
        idx = int(np.argmin(gap))
        if gap.ravel()[idx] < worst:
            worst, worst_t, worst_cell = float(gap.ravel()[idx]), t, idx
    return CheckReport(check="linear_bound", verdict=verdict_of(worst >= -tol), margin=worst,
                       witness={"t": worst_t, **_where(traj.grid, worst_cell)})


def ordered_pairs(grid: Grid, theta: float, count: int, rng: np.random.Generator) -> List[tuple]:
    """Random ordered initial pairs 0 <= u1 <= u2 <= theta."""
    pairs = []
    for _ in range(count):
        hi = rng.uniform(0.0, theta, size=grid.shape)
        lo = hi * rng.uniform(0.0, 1.0, size=grid.shape)
        pairs.append((Field(grid, lo), Field(grid, hi)))
    return pairs
