"""Integrating-factor Picard stepping for du/dt = kappa a*u - m u - u Gu.

Over one step the unknown is carried at the two Gauss nodes of [0, dt].
Given node values w_k, the rates h = m + G w and sources F = kappa a*w are
interpolated linearly through the nodes, and the solution is rebuilt from

    w(t') = exp(-H(0, t')) u + int_0^t' exp(-H(s, t')) F(s) ds,
    H(s, t') = int_s^t' h,

with H integrated exactly and the source integral by Gauss-Legendre. The
map w -> w is iterated to a fixed point; the endpoint uses the same formula.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Field as PydField
from scipy import fft as sp_fft

from app.core.config import settings
from app.core.exceptions import NoConvergence, NoRoot, PreconditionFail
from app.evolution.schedule import lipschitz_exponent, schedule_cap
from app.kernels.builders import Kernel
from app.kernels.convolution import convolve_values
from app.kernels.grid import Field, require_same_grid
from app.nonlinearity.assumptions import estimate_lipschitz
from app.nonlinearity.model import Model

logger = logging.getLogger(__name__)

GAUSS_OFFSET = 0.5 / np.sqrt(3.0)


class EvolveOptions(BaseModel):
    """Knobs of the time integrator."""

    picard_tol: float = PydField(default_factory=lambda: settings.picard_tol, gt=0)
    max_iter: int = PydField(default_factory=lambda: settings.picard_max_iter, ge=1)
    alpha: float = PydField(default_factory=lambda: settings.schedule_alpha, gt=0, lt=1)
    max_dt: float = PydField(default_factory=lambda: settings.max_dt, gt=0)
    max_halvings: int = PydField(default_factory=lambda: settings.max_halvings, ge=0)
    snapshot_interval: Optional[float] = PydField(None, gt=0, description="None keeps only t=0 and t=T")
    snapshot_times: List[float] = PydField(default_factory=list, description="Extra snapshot stops")
    lipschitz_exponent: Optional[float] = PydField(None, gt=0, description="q of the step schedule")
    quadrature_order: int = PydField(6, ge=2)


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    iterations: int
    residual: float


@dataclass
class Trajectory:
    """Snapshots of one solution with the accepted steps that produced them."""

    snapshots: List[Field]
    times: List[float]
    model: Model
    kernel: Kernel
    step_log: List[StepRecord] = field(default_factory=list)

    @property
    def grid(self):
        return self.kernel.grid

    @property
    def initial(self) -> Field:
        return self.snapshots[0]

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def at(self, t: float) -> Field:
        """Snapshot closest to t."""
        idx = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[idx]

    def values(self) -> np.ndarray:
        """Stacked snapshot values, time first."""
        return np.stack([s.values for s in self.snapshots])

    @property
    def steps(self) -> int:
        return len(self.step_log)


def _interp_rates(h1, h2, f1, f2, s1, s2):
    span = s2 - s1
    dh = (h2 - h1) / span
    df = (f2 - f1) / span

    def antiderivative(s):
        ds = s - s1
        return h1 * ds + 0.5 * dh * ds * ds

    def source(s):
        return f1 + df * (s - s1)

    return antiderivative, source


def _rebuild(u, target, antiderivative, source, nodes, weights):
    """exp(-H(0,t)) u + int_0^t exp(-H(s,t)) F(s) ds at t = target."""
    p_end = antiderivative(target)
    out = np.exp(-(p_end - antiderivative(0.0))) * u
    half = 0.5 * target
    for x, w in zip(nodes, weights):
        s = half * (x + 1.0)
        out = out + (half * w) * np.exp(-(p_end - antiderivative(s))) * source(s)
    return out


def picard_step(
    values: np.ndarray,
    dt: float,
    model: Model,
    kernel: Kernel,
    picard_tol: float,
    max_iter: int,
    order: int = 6,
) -> Tuple[np.ndarray, int, float]:
    """
    Advance raw cell values by dt.

    Returns:
        (new values, Picard iterations, final fixed-point residual)

    Raises:
        NoConvergence: residual not below picard_tol within max_iter
    """
    s1, s2 = dt * (0.5 - GAUSS_OFFSET), dt * (0.5 + GAUSS_OFFSET)
    nodes, weights = leggauss(order)

    def rates(w):
        return model.m + model.G(w), model.kappa * convolve_values(kernel, w)

    h0, f0 = rates(values)
    slope = f0 - h0 * values
    w1, w2 = values + s1 * slope, values + s2 * slope

    residual = np.inf
    for iteration in range(1, max_iter + 1):
        h1, f1 = rates(w1)
        h2, f2 = rates(w2)
        antiderivative, source = _interp_rates(h1, h2, f1, f2, s1, s2)
        n1 = _rebuild(values, s1, antiderivative, source, nodes, weights)
        n2 = _rebuild(values, s2, antiderivative, source, nodes, weights)
        residual = float(max(np.max(np.abs(n1 - w1)), np.max(np.abs(n2 - w2))))
        w1, w2 = n1, n2
        if not np.isfinite(residual):
            break
        if residual < picard_tol:
            h1, f1 = rates(w1)
            h2, f2 = rates(w2)
            antiderivative, source = _interp_rates(h1, h2, f1, f2, s1, s2)
            return _rebuild(values, dt, antiderivative, source, nodes, weights), iteration, residual

    raise NoConvergence(
        f"Picard iteration stalled at residual {residual:.3e} with dt={dt:.3e}",
        max_iter=max_iter,
        residual=residual,
        dt=dt,
    )


def step(
    u: Field,
    dt: float,
    model: Model,
    kernel: Kernel,
    picard_tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> Field:
    """
    One integrating-factor step of length dt.

    Args:
        u: Current field
        dt: Step length (> 0)
        model: Model
        kernel: Dispersal kernel on u's grid
        picard_tol: Fixed-point tolerance (settings default)
        max_iter: Picard iteration cap (settings default)

    Returns:
        Field at time u.time + dt
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    require_same_grid(kernel.grid, u.grid, "kernel and field")
    model.check_grid(u.grid)
    values, _, _ = picard_step(
        u.values,
        dt,
        model,
        kernel,
        picard_tol or settings.picard_tol,
        max_iter or settings.picard_max_iter,
    )
    return u.with_values(values, time=u.time + dt)


def resolve_exponent(model: Model, kernel: Kernel, opts: EvolveOptions) -> float:
    """Lipschitz exponent q for the step cap."""
    if opts.lipschitz_exponent is not None:
        return opts.lipschitz_exponent
    try:
        theta = model.theta
    except NoRoot:
        return 1.0
    l_theta = model.lipschitz_hint()
    if l_theta is None:
        l_theta = estimate_lipschitz(model, kernel.grid, theta, samples=8)
    return lipschitz_exponent(max(l_theta, 1e-12), theta)


def _stops(horizon: float, opts: EvolveOptions) -> List[float]:
    stops = set(t for t in opts.snapshot_times if 0 < t < horizon)
    if opts.snapshot_interval:
        k = 1
        while k * opts.snapshot_interval < horizon * (1 - 1e-12):
            stops.add(k * opts.snapshot_interval)
            k += 1
    stops.add(horizon)
    return sorted(stops)


def evolve(
    u0: Field,
    horizon: float,
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
) -> Trajectory:
    """
    Integrate from u0 up to the horizon.

    Steps are capped by the contraction schedule (with the sup-norm of the
    current state as the bound mu), by opts.max_dt and by snapshot stops;
    a step that fails to converge is retried with half the length.

    Raises:
        PreconditionFail: u0 has negative cells
        NoConvergence: still failing after opts.max_halvings halvings
    """
    opts = opts or EvolveOptions()
    require_same_grid(kernel.grid, u0.grid, "kernel and initial field")
    model.check_grid(u0.grid)
    if u0.values.min() < -1e-12:
        raise PreconditionFail(f"initial field has negative values (min {u0.values.min():.3e})")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")

    q = resolve_exponent(model, kernel, opts)
    start = u0.with_values(u0.values, time=0.0)
    traj = Trajectory(snapshots=[start], times=[0.0], model=model, kernel=kernel)
    if horizon == 0:
        return traj

    values = start.values
    t = 0.0
    for stop in _stops(horizon, opts):
        while t < stop - 1e-12 * max(1.0, stop):
            mu = float(np.max(np.abs(values)))
            dt = min(schedule_cap(mu, opts.alpha, model.m, model.kappa, q), opts.max_dt, stop - t)
            for halving in range(opts.max_halvings + 1):
                try:
                    values_next, iters, residual = picard_step(
                        values, dt, model, kernel, opts.picard_tol, opts.max_iter, opts.quadrature_order
                    )
                    break
                except NoConvergence as exc:
                    if halving == opts.max_halvings:
                        logger.error(f"Step at t={t:.6g} failed after {halving} halvings")
                        raise
                    logger.debug(f"{exc}; halving")
                    dt *= 0.5
            values = values_next
            t = stop if stop - (t + dt) <= 1e-12 * max(1.0, stop) else t + dt
            traj.step_log.append(StepRecord(t=t, dt=dt, iterations=iters, residual=residual))
        traj.snapshots.append(start.with_values(values, time=stop))
        traj.times.append(stop)

    iters = [r.iterations for r in traj.step_log]
    logger.info(
        f"Evolved to t={horizon:g} in {traj.steps} steps "
        f"(mean Picard iterations {np.mean(iters):.2f}, max {max(iters)})"
    )
    return traj


def linear_upper_bound(
    u0: Field,
    t: float,
    kappa: float,
    m: float,
    kernel: Kernel,
    method: str = "spectral",
    tol: float = 1e-10,
) -> Field:
    """
    Duhamel bound e^{-mt} e^{t kappa A} u0 with A v = a*v.

    Args:
        method: "spectral" (exact exponential of the symbol on the torus) or
            "series" (Poisson series in the convolution powers)
        tol: Truncation bound of the series remainder
    """
    require_same_grid(kernel.grid, u0.grid, "kernel and field")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return u0.with_values(u0.values.copy())
    axes = tuple(range(kernel.dims))
    shape = kernel.grid.shape

    if method == "spectral":
        u_hat = sp_fft.rfftn(u0.values, axes=axes, workers=settings.max_workers)
        out = sp_fft.irfftn(
            np.exp(t * kappa * kernel.spectrum) * u_hat, s=shape, axes=axes, workers=settings.max_workers
        )
        return u0.with_values(np.exp(-m * t) * out, time=u0.time + t)

    lam = t * kappa
    term = u0.values.copy()
    total = term.copy()
    k = 0
    while True:
        k += 1
        term = convolve_values(kernel, term) * (lam / k)
        total += term
        sup = float(np.max(np.abs(term)))
        ratio = lam / (k + 1)
        if ratio < 1 and sup * ratio / (1 - ratio) < tol:
            break
    return u0.with_values(np.exp(-m * t) * total, time=u0.time + t)
