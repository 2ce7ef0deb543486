"""Weinberger recursion f_{n+1} = max(phi, Q_t V_{s,c,xi} f_n) run in one dimension.

Planar data along xi only see the marginal kernel along xi, so one step is a
single 1D evolution of g(. + c) for time t, read back at the profile lattice.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.core.exceptions import MonotonicityViolation, NoStall
from app.evolution.stepper import EvolveOptions, evolve
from app.kernels.builders import Kernel, embed_kernel, reduce_kernel
from app.kernels.grid import Field, Grid
from app.nonlinearity.model import Model
from app.spreading.profile import Profile, enforce_nonincreasing, make_phi, profile_lattice

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-6
TREND_WINDOW = 10


class WeinbergerProblem:
    """Reduced 1D set-up of the recursion for fixed (t, c, xi)."""

    def __init__(
        self,
        t: float,
        c: float,
        xi: Sequence[float],
        model: Model,
        kernel: Kernel,
        half_width: Optional[float] = None,
        opts: Optional[EvolveOptions] = None,
        lattice: Optional[Grid] = None,
    ):
        """
        Args:
            t: Evolution time per iteration
            c: Shift per iteration (a displacement over time t)
            xi: Unit direction
            model: Full model (its competition kernel is reduced along xi)
            kernel: Full dispersal kernel
            half_width: Profile half-width S (default from the kernel scale)
            opts: Evolution options for the inner solves
            lattice: Explicit profile lattice (overrides half_width)
        """
        self.t = float(t)
        self.c = float(c)
        self.xi = np.atleast_1d(np.asarray(xi, dtype=float))
        self.theta = model.theta
        self.opts = opts or EvolveOptions()

        reduced = reduce_kernel(kernel, self.xi)
        spacing = reduced.grid.spacing[0]
        scale = max(reduced.scale, spacing)
        if lattice is not None:
            if not np.isclose(lattice.spacing[0], spacing, rtol=1e-12):
                raise ValueError("profile lattice spacing differs from the reduced kernel spacing")
            self.lattice = lattice
        else:
            self.lattice = profile_lattice(half_width or default_half_width(c, t, model.kappa, scale), spacing)
        self.half_width = self.lattice.extent[0] / 2

        # padding keeps the periodic seam of the solve away from the lattice
        pad_cells = int(np.ceil((abs(self.c) + 10 * scale * (1 + model.kappa * self.t)) / spacing))
        n = self.lattice.cells[0] + 2 * pad_cells
        self.pad_cells = pad_cells
        self.solve_grid = Grid(extent=(n * spacing,), cells=(n,))
        self.kernel = embed_kernel(reduced, self.solve_grid)
        self.model = model.reduced(self.xi).on_grid(self.solve_grid)

    def phi(self, level: Optional[float] = None, width: Optional[float] = None) -> Profile:
        """Default element of N_theta on this lattice."""
        level = 0.5 * self.theta if level is None else level
        width = 0.1 * self.half_width if width is None else width
        return make_phi(self.lattice, level, width, self.theta)

    def evolve_shifted(self, f: Profile) -> np.ndarray:
        """(Q_t g(. + c))(s) on the profile lattice."""
        y = self.solve_grid.centers(0)
        start = Field(self.solve_grid, f.at(y + self.c))
        final = evolve(start, self.t, self.model, self.kernel, self.opts).final.values
        return final[self.pad_cells: self.pad_cells + self.lattice.cells[0]]

    def step(self, f: Profile, phi: Profile) -> Profile:
        raw = np.maximum(phi.values, self.evolve_shifted(f))
        values = np.clip(enforce_nonincreasing(raw), 0.0, self.theta)
        injected = float(np.max(values - np.clip(raw, 0.0, self.theta)))
        if injected > 1e-8:
            logger.debug(f"Monotone re-enforcement lifted the profile by {injected:.2e}")
        return f.with_values(values)

    def limit(
        self,
        phi: Profile,
        n_max: int = 200,
        stall_tol: float = 1e-6,
        stop_above: Optional[float] = None,
    ) -> "LimitResult":
        """
        Iterate from phi until the sup-change drops below stall_tol.

        stop_above ends the run early once the right limit reaches it.
        """
        f = phi
        history: List[float] = [phi.right_limit]
        fronts: List[float] = [front_position(phi)]
        for n in range(1, n_max + 1):
            nxt = self.step(f, phi)
            drop = float(np.max(f.values - nxt.values))
            if drop > MONOTONE_TOL:
                raise MonotonicityViolation(
                    f"Weinberger iterate decreased by {drop:.3e} at n={n} (c={self.c:g})",
                    {"n": n, "c": self.c, "drop": drop},
                )
            change = float(np.max(np.abs(nxt.values - f.values)))
            f = nxt
            history.append(f.right_limit)
            fronts.append(front_position(f))
            if change < stall_tol:
                logger.debug(f"Stalled at n={n} for c={self.c:g}: f(inf)~{f.right_limit:.4g}")
                return LimitResult(f, n, history)
            if stop_above is not None and f.right_limit >= stop_above:
                return LimitResult(f, n, history, stalled=False)
        raise NoStall(
            f"No stall within {n_max} iterations for c={self.c:g}",
            n_max=n_max,
            profile=f,
            history=history,
            fronts=fronts,
        )


class LimitResult:
    """Last iterate of a stalled recursion."""

    def __init__(self, profile: Profile, iterations: int, history: List[float], stalled: bool = True):
        self.profile = profile
        self.iterations = iterations
        self.history = history
        self.stalled = stalled

    @property
    def right_limit(self) -> float:
        return self.profile.right_limit


def default_half_width(c: float, t: float, kappa: float, scale: float) -> float:
    """S large against the shift and the per-iteration spread."""
    return 8.0 * (abs(c) + scale * (1.0 + kappa * t)) + 20.0 * scale


def weinberger_step(
    f: Profile,
    phi: Profile,
    t: float,
    c: float,
    xi: Sequence[float],
    model: Model,
    kernel: Kernel,
    opts: Optional[EvolveOptions] = None,
) -> Profile:
    """
    One application of (R g)(s) = max{phi(s), (Q_t V_{s,c,xi} g)(0)}.

    The lattice of f (shared by phi) fixes S; its spacing must equal the
    spacing of the reduced kernel.
    """
    problem = WeinbergerProblem(t, c, xi, model, kernel, opts=opts, lattice=f.lattice)
    return problem.step(f, phi)


def weinberger_limit(
    phi: Profile,
    t: float,
    c: float,
    xi: Sequence[float],
    model: Model,
    kernel: Kernel,
    n_max: int = 200,
    stall_tol: float = 1e-6,
    opts: Optional[EvolveOptions] = None,
) -> Profile:
    """
    Iterate the recursion from phi until sup|f_{n+1} - f_n| < stall_tol.

    Returns:
        Last iterate; its right_limit is the f(infinity) proxy

    Raises:
        NoStall: n_max reached (carries the last iterate and right-limit history)
        MonotonicityViolation: an iterate decreased in n
    """
    problem = WeinbergerProblem(t, c, xi, model, kernel, opts=opts, lattice=phi.lattice)
    return problem.limit(phi, n_max, stall_tol).profile


def front_position(profile: Profile, share: float = 0.25) -> float:
    """Rightmost lattice point where the profile is at least share*theta."""
    above = np.flatnonzero(profile.values >= share * profile.theta)
    return float(profile.s[above[-1]]) if above.size else float(profile.s[0])


def classify_trend(
    history: Sequence[float],
    theta: float,
    fronts: Optional[Sequence[float]] = None,
    spacing: float = 0.0,
) -> str:
    """
    Dichotomy side of an unfinished recursion.

    "theta" when the last right limit is at least theta/2, when the right
    limit still rises over the last window, or when the front advanced by
    more than one lattice cell over that window; "zero" otherwise.
    """
    if history[-1] >= 0.5 * theta:
        return "theta"
    window = np.asarray(history[-TREND_WINDOW:])
    if window.size >= 2:
        slope = np.polyfit(np.arange(window.size), window, 1)[0]
        if slope > 1e-4 * theta:
            return "theta"
    if fronts is not None and len(fronts) > TREND_WINDOW:
        if fronts[-1] - fronts[-1 - TREND_WINDOW] > spacing:
            return "theta"
    return "zero"
