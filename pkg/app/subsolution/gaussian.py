"""Gaussian sub-solutions w(x, t) = q exp(-|x - t m|^2 / (alpha t)) and their certificates."""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field as PydField, field_validator

from app.core.exceptions import NoNondegeneracy, NotASubsolution, PreconditionFail, QTooLarge
from app.core.parallel import parallel_map
from app.core.reports import CheckReport, verdict_of
from app.evolution.stepper import EvolveOptions, Trajectory, evolve
from app.kernels.builders import Kernel
from app.kernels.convolution import convolve_values
from app.kernels.grid import Field, Grid
from app.nonlinearity.assumptions import estimate_lipschitz, sample_tube_fields
from app.nonlinearity.model import Model

logger = logging.getLogger(__name__)

T_CAP = 2.0 ** 14
CERTIFICATE_TOL = 1e-10
RESOLUTION = 1e-12
DOMINATION_FACTOR = 4.0
APEX_HALF_ANGLE = np.pi / 3


class SubsolutionParams(BaseModel):
    """Amplitude, spread and validity threshold of a Gaussian sub-solution."""

    q: float = PydField(..., gt=0, description="Amplitude")
    alpha: float = PydField(..., gt=0, description="Spread rate (length^2 / time)")
    T: float = PydField(1.0, gt=0, description="Validity threshold")
    drift: List[float] = PydField(default_factory=lambda: [0.0], description="Moving-frame velocity")
    q0: Optional[float] = None
    alpha0: Optional[float] = None

    @field_validator("drift", mode="before")
    @classmethod
    def _as_list(cls, v):
        return list(np.atleast_1d(np.asarray(v, dtype=float)))


def cone_moment(rho: float, dims: int, refine: int = 400) -> float:
    """
    Integral of |y|^2 over the cone of apex angle 2*pi/3 inside B_rho.

    Midpoint quadrature on a lattice refined to rho/refine. In one dimension
    the cone is the half-line segment [0, rho].
    """
    if rho <= 0:
        return 0.0
    h = rho / refine
    if dims == 1:
        y = (np.arange(refine) + 0.5) * h
        return float(np.sum(y ** 2) * h)
    axis = (np.arange(-refine, refine) + 0.5) * h
    Y0, Y1 = np.meshgrid(axis, axis, indexing="ij")
    r2 = Y0 ** 2 + Y1 ** 2
    inside = (r2 <= rho ** 2) & (np.abs(np.arctan2(Y1, Y0)) <= APEX_HALF_ANGLE)
    return float(np.sum(r2[inside]) * h * h)


def alpha0(kernel: Kernel, kappa: float) -> float:
    """
    Spread cap 1/2 * kappa * rho * B_rho, rho the nondegeneracy radius.

    Raises:
        NoNondegeneracy: rho = 0
    """
    rho = kernel.nondeg_radius
    if rho <= 0:
        raise NoNondegeneracy(f"kernel {kernel.label} has no nondegeneracy radius")
    return 0.5 * kappa * rho * cone_moment(rho, kernel.dims)


def _offsets(grid: Grid, centre: Sequence[float]) -> List[np.ndarray]:
    """Minimum-image displacement x - centre on the torus."""
    out = []
    for coord, c, length in zip(grid.mesh(), centre, grid.extent):
        out.append((coord - c + length / 2) % length - length / 2)
    return out


def _drift(params: SubsolutionParams, dims: int) -> np.ndarray:
    d = np.asarray(params.drift, dtype=float)
    return np.full(dims, d[0]) if d.size == 1 and dims > 1 else d


def gaussian_subsolution(params: SubsolutionParams, t: float, grid: Grid) -> Field:
    """Pointwise w(x, t) on the cell centers (periodic distance to t*m)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if t <= params.T:
        logger.debug(f"Evaluating the sub-solution at t={t:g} below its threshold T={params.T:g}")
    z = _offsets(grid, t * _drift(params, grid.dims))
    r2 = sum(zi ** 2 for zi in z)
    return Field(grid, params.q * np.exp(-r2 / (params.alpha * t)), time=t)


def subsolution_residual(
    params: SubsolutionParams, t: float, grid: Grid, kernel: Kernel, kappa: float, m: float
) -> np.ndarray:
    """dw/dt - kappa a*w + m w with the time derivative taken analytically."""
    m_vec = _drift(params, grid.dims)
    z = _offsets(grid, t * m_vec)
    r2 = sum(zi ** 2 for zi in z)
    w = params.q * np.exp(-r2 / (params.alpha * t))
    z_dot_m = sum(zi * mi for zi, mi in zip(z, m_vec))
    dw_dt = w * (r2 / (params.alpha * t * t) + 2 * z_dot_m / (params.alpha * t))
    return dw_dt - kappa * convolve_values(kernel, w) + m * w


def _search_threshold(
    params: SubsolutionParams,
    grid: Grid,
    kernel: Kernel,
    kappa: float,
    m: float,
    t_samples: Optional[Sequence[float]],
    tol: float,
    t_cap: float,
    max_workers: Optional[int],
) -> CheckReport:
    def worst_at(t: float) -> float:
        return float(np.max(subsolution_residual(params, t, grid, kernel, kappa, m)))

    if t_samples is not None:
        ts = sorted(float(t) for t in t_samples)
        worst = parallel_map(worst_at, ts, max_workers)
        rows = [{"t": t, "max_residual": w} for t, w in zip(ts, worst)]
        top = max(worst)
        return CheckReport(check="subsolution", verdict=verdict_of(top <= tol), margin=tol - top,
                           witness={"T": params.T, "max_residual": top}, table=rows)

    T = max(params.T, 1.0)
    tried = []
    while T <= t_cap:
        ts = list(np.geomspace(T, DOMINATION_FACTOR * T, 7))
        worst = parallel_map(worst_at, ts, max_workers)
        top = max(worst)
        tried.append({"T": T, "max_residual": top})
        if top <= tol:
            rows = [{"t": t, "max_residual": w} for t, w in zip(ts, worst)]
            logger.info(f"Sub-solution certified from T={T:g} (max residual {top:.3e})")
            return CheckReport(
                check="subsolution",
                verdict=verdict_of(True),
                margin=tol - top,
                witness={"T": T, "max_residual": top},
                details={"search": tried},
                table=rows,
            )
        T *= 2
    raise NotASubsolution(
        f"no threshold T <= {t_cap:g} certifies the sub-solution (alpha={params.alpha:g})",
        {"search": tried},
    )


def verify_linear_subsolution(
    params: SubsolutionParams,
    grid: Grid,
    kernel: Kernel,
    kappa: float,
    m: float,
    t_samples: Optional[Sequence[float]] = None,
    tol: float = CERTIFICATE_TOL,
    t_cap: float = T_CAP,
    max_workers: Optional[int] = None,
) -> CheckReport:
    """
    Certify dw/dt - kappa a*w + m w <= tol.

    Without t_samples, T is doubled from max(params.T, 1) until the residual
    stays below tol on [T, 4T]; the report's witness holds that T.

    Raises:
        NotASubsolution: no T up to t_cap works
    """
    cap = params.alpha0 if params.alpha0 is not None else alpha0(kernel, kappa)
    if params.alpha >= cap:
        logger.warning(f"alpha={params.alpha:g} is not below alpha0={cap:g}")
    report = _search_threshold(params, grid, kernel, kappa, m, t_samples, tol, t_cap, max_workers)
    report.check = "linear_subsolution"
    report.details["alpha0"] = cap
    return report


def admissible_amplitude(model: Model, grid: Grid, l_theta: Optional[float] = None, margin: float = 0.0) -> float:
    """q0 = min(theta, beta / (2 l_theta)) * (1 - margin)."""
    theta = model.theta
    if l_theta is None:
        l_theta = model.lipschitz_hint()
    if l_theta is None:
        l_theta = estimate_lipschitz(model, grid, theta)
    return min(theta, model.beta / (2 * l_theta)) * (1 - margin)


def verify_nonlinear_subsolution(
    params: SubsolutionParams,
    model: Model,
    kernel: Kernel,
    t_samples: Optional[Sequence[float]] = None,
    l_theta: Optional[float] = None,
    margin: float = 0.0,
    tol: float = CERTIFICATE_TOL,
    t_cap: float = T_CAP,
    samples: int = 16,
    seed: int = 0,
    max_workers: Optional[int] = None,
) -> CheckReport:
    """
    Certify the sub-solution with mortality m + beta/2 and q < q0.

    Also samples fields v <= q0 and requires Gv <= beta/2 + tol there.

    Raises:
        QTooLarge: q >= q0
        NotASubsolution: no T up to t_cap works
    """
    grid = kernel.grid
    q0 = params.q0 if params.q0 is not None else admissible_amplitude(model, grid, l_theta, margin)
    if params.q >= q0:
        raise QTooLarge(f"q={params.q:g} is not below q0={q0:g}", {"q": params.q, "q0": q0})

    rng = np.random.default_rng(seed)
    g_excess = max(
        float(np.max(model.G(v))) - model.beta / 2 for v in sample_tube_fields(grid, q0, samples, rng)
    )
    report = verify_linear_subsolution(
        params, grid, kernel, model.kappa, model.m + model.beta / 2, t_samples, tol, t_cap, max_workers
    )
    report.check = "nonlinear_subsolution"
    report.details.update({"q0": q0, "G_excess": g_excess})
    if g_excess > tol:
        report.verdict = verdict_of(False)
        report.details["note"] = "G exceeds beta/2 on sampled fields below q0"
    return report


def check_domination(
    params: SubsolutionParams,
    model: Model,
    kernel: Kernel,
    t_end: Optional[float] = None,
    seed_field: Optional[Field] = None,
    tol: float = 1e-6,
    opts: Optional[EvolveOptions] = None,
) -> CheckReport:
    """
    Run from u(., T) >= w(., T) and verify u >= w - tol at snapshots up to t_end.

    t_end defaults to DOMINATION_FACTOR * T, the window the certificate covers.
    The run starts at max(seed_field, w(., T)) (w(., T) alone by default).
    """
    grid = kernel.grid
    T = params.T
    t_end = DOMINATION_FACTOR * T if t_end is None else t_end
    if t_end <= T:
        raise ValueError("t_end must exceed the threshold T")
    start = gaussian_subsolution(params, T, grid).values
    if seed_field is not None:
        start = np.maximum(start, seed_field.values)
    span = t_end - T
    opts = opts or EvolveOptions(snapshot_interval=span / 10)
    traj = evolve(Field(grid, start), span, model, kernel, opts)
    worst, worst_t = np.inf, T
    for s, snap in zip(traj.times, traj.snapshots):
        w = gaussian_subsolution(params, T + s, grid).values
        gap = float(np.min(snap.values - w))
        if gap < worst:
            worst, worst_t = gap, T + s
    return CheckReport(check="domination", verdict=verdict_of(worst >= -tol), margin=worst,
                       witness={"t": worst_t, "T": T, "t_end": t_end})


def check_lower_bound_form(
    traj: Trajectory,
    x0: Sequence[float],
    tau: float,
    t: float,
    r: Optional[float] = None,
    resolution: float = RESOLUTION,
) -> CheckReport:
    """
    Fit q1 = min over cells of u(x, t) exp(|x - x0|^2 / tau).

    The minimum is taken in log space over every cell with u above
    resolution * sup u. Cells at or below that floor (underflow or FFT
    round-off) cannot carry any positive q1; when there are any, the bound is
    reported as local to the ball that stops short of the nearest such cell.

    Raises:
        PreconditionFail: u0 is not bounded below by a positive constant on B_r(x0)
    """
    grid = traj.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    r = max(grid.spacing) if r is None else r
    r2 = sum(z ** 2 for z in _offsets(grid, x0))

    ball = r2 <= r * r
    if not ball.any():
        ball = r2 <= r2.min()
    eta = float(traj.initial.values[ball].min())
    if eta <= 0:
        raise PreconditionFail(f"initial field has no positive bump on B_{r:g}({x0.tolist()})",
                               {"x0": x0.tolist(), "r": r})

    snap = traj.at(t)
    u = snap.values
    floor = resolution * float(np.max(np.abs(u)))
    resolved = u > floor
    if not resolved.any():
        return CheckReport(check="lower_bound_form", verdict=verdict_of(False), margin=0.0,
                           witness={"q1": 0.0, "t": float(snap.time), "tau": tau, "eta": eta},
                           details={"resolved_cells": 0, "scope": "none"})
    log_scaled = np.log(u[resolved]) + r2[resolved] / tau
    log_q1 = float(np.min(log_scaled))
    q1 = float(np.exp(log_q1))
    unresolved = int(grid.size - resolved.sum())
    covered = float(np.sqrt(r2[~resolved].min())) if unresolved else None
    scope = "local" if unresolved else "global"
    if unresolved:
        logger.info(f"Lower bound at t={snap.time:g} is local: {unresolved} cells at or below "
                    f"{floor:.3g}, covered radius {covered:.4g}")
    return CheckReport(
        check="lower_bound_form",
        verdict=verdict_of(q1 > 0),
        margin=q1,
        witness={"q1": q1, "t": float(snap.time), "tau": tau, "eta": eta, "scope": scope},
        details={"log_q1": log_q1, "resolved_cells": int(resolved.sum()),
                 "unresolved_cells": unresolved, "covered_radius": covered, "floor": floor},
    )
