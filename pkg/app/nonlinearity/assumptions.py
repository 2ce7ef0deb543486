"""Numerical checkers for the structural assumptions on a model and its kernel."""
import logging
from typing import Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.config import settings
from app.core.exceptions import NoRoot
from app.core.reports import CheckReport, Verdict, verdict_of
from app.kernels.builders import Kernel, kernel_from_weights, nondegeneracy
from app.kernels.convolution import convolve_values
from app.kernels.grid import Grid
from app.nonlinearity.model import GeneralCompetition, LogisticCompetition, Model, Variant

logger = logging.getLogger(__name__)

TOL = 1e-10

ASSUMPTION_NAMES = {
    "A1": "beta = kappa - m > 0",
    "A2": "0 = G0 <= Gv <= G(theta) = beta on E_theta+",
    "A3": "G Lipschitz on E_theta+",
    "A4": "quasi-monotone right-hand side",
    "A5": "kernel nondegenerate at the origin",
    "A6": "G locally uniformly continuous",
    "A7": "G commutes with translations",
    "A8": "G(r) < beta for constants r in (0, theta)",
    "A9": "finite first moment of a",
    "A10": "improved comparison with (q, delta, b)",
}


class AssumptionReport(BaseModel):
    """Per-assumption verdicts with witnesses and the derived constants."""

    checks: Dict[str, CheckReport] = Field(default_factory=dict)
    theta: Optional[float] = None
    lipschitz_theta: Optional[float] = Field(None, description="l_theta used downstream")
    lipschitz_sampled: Optional[float] = None
    p: Optional[float] = None
    q: Optional[float] = None
    delta: Optional[float] = None
    b_kernel: Optional[str] = None

    def verdict(self, name: str) -> Verdict:
        return self.checks[name].verdict

    def holds(self, names: Iterable[str]) -> bool:
        return all(self.checks[n].verdict != Verdict.FAILS for n in names if n in self.checks)

    @property
    def all_hold(self) -> bool:
        return self.holds(self.checks)

    def to_text(self) -> str:
        lines = [report.to_text() for report in self.checks.values()]
        lines.append(
            f"constants: theta={self.theta}, l_theta={self.lipschitz_theta}, "
            f"p={self.p}, q={self.q}, delta={self.delta}, b={self.b_kernel}"
        )
        return "\n".join(lines)


def sample_tube_fields(grid: Grid, top: float, n: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Fields in E_top+: constants, white noise and smoothed noise."""
    fields = [np.zeros(grid.shape), np.full(grid.shape, top)]
    for r in np.linspace(0.1, 0.9, 5):
        fields.append(np.full(grid.shape, r * top))
    while len(fields) < n:
        noise = rng.uniform(0.0, top, size=grid.shape)
        if len(fields) % 2:
            # moving-average smoothing keeps values in [0, top]
            for axis in range(grid.dims):
                noise = (noise + np.roll(noise, 1, axis) + np.roll(noise, -1, axis)) / 3
        fields.append(noise)
    return fields[:n]


def _cell(grid: Grid, flat_index: int) -> dict:
    idx = np.unravel_index(int(flat_index), grid.shape)
    lag = [float(grid.lags(a)[i]) for a, i in enumerate(idx)]
    return {"cell": [int(i) for i in idx], "lag": lag}


def estimate_lipschitz(model: Model, grid: Grid, theta: float, samples: int = 32, seed: int = 0) -> float:
    """Largest sampled sup|Gv - Gw| / sup|v - w| over pairs in E_theta+."""
    rng = np.random.default_rng(seed)
    fields = sample_tube_fields(grid, theta, samples, rng)
    best = 0.0
    for v, w in zip(fields[::2], fields[1::2]):
        gap = float(np.max(np.abs(v - w)))
        if gap > 0:
            best = max(best, float(np.max(np.abs(model.G(v) - model.G(w)))) / gap)
    return best


def _check_a4(model: Model, kernel: Kernel, theta: float, l_theta: float) -> CheckReport:
    op = model.competition
    if isinstance(op, (LogisticCompetition, GeneralCompetition)):
        diff = model.kappa * kernel.weights - model.beta * op.kernel.weights
        worst = int(np.argmin(diff))
        margin = float(diff.ravel()[worst] / kernel.grid.cell_volume)
        note = "kappa a >= (kappa - m) a_minus cell-wise"
        if op.variant == Variant.GENERAL:
            note += " (sufficient proxy for the general variant)"
        return CheckReport(
            check="A4",
            verdict=verdict_of(margin >= -TOL),
            margin=margin,
            witness=_cell(kernel.grid, worst),
            details={"criterion": note},
        )

    # local variant: p*u - u*Gu is nondecreasing on [0, theta] for p = kappa + l_theta*theta
    p = model.kappa + l_theta * theta
    u = np.linspace(0.0, theta, 2001)
    h = p * u - op.product(u)
    steps = np.diff(h)
    worst = int(np.argmin(steps))
    margin = float(steps[worst] / (u[1] - u[0]))
    return CheckReport(
        check="A4",
        verdict=verdict_of(margin >= -1e-8),
        margin=margin,
        witness={"u": float(u[worst]), "p": p},
        details={"criterion": "slope bound for the local reaction"},
    )


def comparison_condition(model: Model, kernel: Kernel, l_theta: Optional[float] = None) -> CheckReport:
    """
    (A4) on its own: whether the comparison principle is guaranteed for model.

    l_theta only matters for the local variant; it defaults to the exact
    Lipschitz constant when known and a sampled estimate otherwise.
    """
    theta = model.theta
    if l_theta is None and model.variant == Variant.LOCAL:
        hint = model.lipschitz_hint()
        l_theta = hint if hint is not None else estimate_lipschitz(model, kernel.grid, theta)
    return _check_a4(model, kernel, theta, l_theta or 0.0)


def _check_a9(kernel: Kernel) -> CheckReport:
    radius = kernel.grid.lag_radius()
    reach = 0.5 * min(kernel.grid.extent)
    full = float(np.sum(radius * kernel.weights))
    inner = float(np.sum(np.where(radius <= reach / 2, radius, 0.0) * kernel.weights))
    outer_share = (full - inner) / full if full > 0 else 0.0
    ok = outer_share <= 0.01
    details = {"first_abs_moment": full, "outer_share": outer_share}
    if not ok:
        details["note"] = "first moment not resolved on the grid; use a truncated kernel"
    return CheckReport(check="A9", verdict=verdict_of(ok), margin=0.01 - outer_share,
                       witness={"outer_share": outer_share}, details=details)


def _a10_candidate(model: Model, kernel: Kernel, b: np.ndarray, q: float, fields: List[np.ndarray]) -> tuple:
    grid = kernel.grid
    delta, level = nondegeneracy(grid, (kernel.weights - b) / grid.cell_volume)
    b_kernel = kernel_from_weights(grid, b, "b", normalized=False)
    worst_margin = np.inf
    for w in fields:
        lhs = model.uGu(w)
        rhs = model.kappa * convolve_values(b_kernel, w) + q * w
        worst_margin = min(worst_margin, float(np.min(rhs - lhs)))
    return delta, level, worst_margin


def _check_a10(model: Model, kernel: Kernel, theta: float, fields: List[np.ndarray]) -> tuple:
    op = model.competition
    grid = kernel.grid
    candidates = []
    if isinstance(op, LogisticCompetition):
        candidates.append(((model.beta / model.kappa) * op.kernel.weights, 0.0, "(kappa-m)/kappa * a_minus"))
    elif isinstance(op, GeneralCompetition):
        candidates.append(((theta * op.kappa_minus / model.kappa) * op.kernel.weights, 0.0,
                           "theta*kappa_minus/kappa * a_minus"))
    # b = 0 always leaves a - b = a; q must then cover sup Gw on the samples
    q_top = max(model.beta, max(float(np.max(model.G(w))) for w in fields))
    candidates.append((np.zeros(grid.shape), q_top, "0"))

    tried = []
    for b, q, b_name in candidates:
        delta, level, worst_margin = _a10_candidate(model, kernel, b, q, fields)
        tried.append(b_name)
        if delta > 0 and worst_margin >= -TOL:
            break
        logger.debug(f"A10 witness b={b_name} rejected (delta={delta:.3g}, margin={worst_margin:.3g})")

    ok = delta > 0 and worst_margin >= -TOL
    report = CheckReport(
        check="A10",
        verdict=verdict_of(ok),
        margin=min(delta, worst_margin),
        witness={"delta": delta, "level": level, "q": q, "bound_margin": worst_margin},
        details={"b": b_name, "tried": tried},
    )
    return report, q, delta, b_name


def check_assumptions(model: Model, kernel: Kernel, samples: int = 24, seed: Optional[int] = None) -> AssumptionReport:
    """
    Check (A1)-(A10) for a model and dispersal kernel on the kernel's grid.

    Failures are verdicts; the function never raises for mathematical reasons.

    Args:
        model: Model under test
        kernel: Dispersal kernel a
        samples: Number of sampled fields in E_theta+
        seed: Sampling seed (defaults to settings.default_seed)

    Returns:
        AssumptionReport
    """
    seed = settings.default_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    grid = kernel.grid
    report = AssumptionReport()
    checks = report.checks

    checks["A1"] = CheckReport(check="A1", verdict=verdict_of(model.beta > 0), margin=model.beta,
                               witness={"kappa": model.kappa, "m": model.m})

    try:
        theta = model.theta
    except NoRoot as exc:
        checks["A2"] = CheckReport(check="A2", verdict=Verdict.FAILS, details={"error": str(exc)})
        logger.warning(f"No carrying capacity for {model.label or model.variant.value}: {exc}")
        return report
    report.theta = theta
    fields = sample_tube_fields(grid, theta, samples, rng)

    g0 = float(np.max(np.abs(model.G(np.zeros(grid.shape)))))
    g_theta = float(np.max(np.abs(model.G(np.full(grid.shape, theta)) - model.beta)))
    lo, hi, worst_field = 0.0, 0.0, 0
    for i, v in enumerate(fields):
        gv = model.G(v)
        lo = min(lo, float(gv.min()))
        if float(gv.max()) - model.beta > hi:
            hi, worst_field = float(gv.max()) - model.beta, i
    a2_margin = -max(g0, g_theta, -lo, hi)
    checks["A2"] = CheckReport(
        check="A2",
        verdict=verdict_of(a2_margin >= -TOL),
        margin=a2_margin,
        witness={"theta": theta, "G0": g0, "G_theta_minus_beta": g_theta, "sample": worst_field},
    )

    sampled = estimate_lipschitz(model, grid, theta, samples, seed)
    hint = model.lipschitz_hint()
    report.lipschitz_sampled = sampled
    report.lipschitz_theta = hint if hint is not None else sampled
    checks["A3"] = CheckReport(check="A3", verdict=verdict_of(np.isfinite(sampled)), margin=None,
                               witness={"l_theta_sampled": sampled, "l_theta_exact": hint})

    checks["A4"] = _check_a4(model, kernel, theta, report.lipschitz_theta)
    report.p = checks["A4"].witness.get("p")

    checks["A5"] = CheckReport(
        check="A5",
        verdict=verdict_of(kernel.nondeg_radius > 0),
        margin=kernel.nondeg_radius,
        witness={"rho": kernel.nondeg_radius, "level": kernel.nondeg_level},
    )
    checks["A6"] = CheckReport(check="A6", verdict=Verdict.HOLDS,
                               details={"note": "holds by construction for the built-in variants"})

    shift = tuple(max(1, n // 7) for n in grid.cells)
    axes = tuple(range(grid.dims))
    a7_err = max(
        float(np.max(np.abs(np.roll(model.G(v), shift, axes) - model.G(np.roll(v, shift, axes)))))
        for v in fields[-4:]
    )
    checks["A7"] = CheckReport(check="A7", verdict=verdict_of(a7_err <= TOL), margin=-a7_err,
                               witness={"shift_cells": list(shift)},
                               details={"note": "holds by construction; verified on sampled shifts"})

    rs = np.linspace(0.0, theta, 52)[1:-1]
    gaps = np.array([model.beta - model.competition.on_constant(r) for r in rs])
    worst = int(np.argmin(gaps))
    checks["A8"] = CheckReport(check="A8", verdict=verdict_of(gaps[worst] > 0), margin=float(gaps[worst]),
                               witness={"r": float(rs[worst])})

    checks["A9"] = _check_a9(kernel)

    checks["A10"], report.q, report.delta, report.b_kernel = _check_a10(model, kernel, theta, fields)

    failed = [name for name, r in checks.items() if r.verdict == Verdict.FAILS]
    if failed:
        logger.warning(f"Assumptions failing: {', '.join(failed)}")
    else:
        logger.info(f"All assumptions hold (theta={theta:.6g}, l_theta={report.lipschitz_theta:.6g})")
    return report


def check_approximation(
    model: Model,
    kernel: Kernel,
    model_n: Model,
    kernel_n: Kernel,
    samples: int = 16,
    seed: Optional[int] = None,
) -> CheckReport:
    """
    Sample kappa_n a_n*w - w G_n w <= kappa a*w - w G w on E_{theta_n}+.

    Both kernels must live on the same grid.
    """
    seed = settings.default_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    theta_n = model_n.theta
    worst, worst_cell, worst_sample = np.inf, 0, 0
    for i, w in enumerate(sample_tube_fields(kernel.grid, theta_n, samples, rng)):
        lhs = model_n.kappa * convolve_values(kernel_n, w) - model_n.uGu(w)
        rhs = model.kappa * convolve_values(kernel, w) - model.uGu(w)
        gap = rhs - lhs
        idx = int(np.argmin(gap))
        if gap.ravel()[idx] < worst:
            worst, worst_cell, worst_sample = float(gap.ravel()[idx]), idx, i
    return CheckReport(
        check="A11",
        verdict=verdict_of(worst >= -TOL),
        margin=worst,
        witness={"sample": worst_sample, **_cell(kernel.grid, worst_cell)},
        details={"theta_n": theta_n},
    )
