"""Standalone checks of the auxiliary facts the evolution relies on."""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import fftconvolve

from app.core.exceptions import GridMismatch, IterationCap
from app.core.reports import CheckReport, verdict_of
from app.evolution.stepper import EvolveOptions, evolve
from app.kernels.builders import Kernel
from app.kernels.grid import Field
from app.nonlinearity.model import Model, Variant
from app.spreading.profile import Profile

logger = logging.getLogger(__name__)

RECURRENCE_CAP = 1_000_000


def check_avg_jump_lemma(
    b: Kernel,
    v: Profile,
    r_sequence: Sequence[float],
    tol: float = 1e-3,
) -> CheckReport:
    """
    Compare the integral of b*v - v over [-r, r] with (v(-inf) - v(inf)) * first moment of b.

    v is extended by its end values beyond the lattice, so the profile's
    ends act as its limits at infinity.
    """
    if b.dims != 1:
        raise GridMismatch("jump-average check takes a one-dimensional kernel")
    h = b.grid.spacing[0]
    if not np.isclose(h, v.lattice.spacing[0], rtol=1e-12):
        raise GridMismatch(
            f"kernel spacing {h:g} differs from profile spacing {v.lattice.spacing[0]:g}",
            {"kernel": h, "profile": v.lattice.spacing[0]},
        )

    w = b.weights
    pad = w.size
    padded = np.pad(v.values, pad, mode="edge")
    full = fftconvolve(padded, w, mode="full")
    start = pad + w.size // 2
    jump = full[start: start + v.values.size] - v.values

    rhs = (v.values[0] - v.values[-1]) * b.first_moment((1.0,))
    s = v.s
    rows = []
    for r in r_sequence:
        integral = float(np.sum(jump[np.abs(s) <= r]) * h)
        rows.append({"r": float(r), "integral": integral, "rhs": rhs, "gap": abs(integral - rhs)})

    last = rows[-1]["gap"] if rows else float("nan")
    logger.info(f"Jump-average integral at r={rows[-1]['r']:g}: gap {last:.3e} to {rhs:.6g}")
    return CheckReport(
        check="avg_jump",
        verdict=verdict_of(last <= tol),
        margin=tol - last,
        witness={"r": rows[-1]["r"], "integral": rows[-1]["integral"], "rhs": rhs},
        details={"kernel_mass": b.mass},
        table=rows,
    )


def _continue_asymptotically(b: float, n: float, partial: float, p: float, q: float, target: float):
    """
    Close the gap to target with the continuum limit of the recurrence.

    With b = exp(-q r) the recurrence reads db/dn = -p q b^2, and each term
    1/(r exp(q r)) integrates to (1/p) d ln(-ln b).
    """
    log_b_start = -math.log(b)
    log_b_end = log_b_start * math.exp(p * (target - partial))
    # 1/b_end - 1/b_start, in logarithmic form once exp overflows
    if log_b_end < 700:
        n_end = n + (math.exp(log_b_end) - 1.0 / b) / (p * q)
        log10_n = math.log10(n_end)
    else:
        n_end = math.inf
        log10_n = (log_b_end - math.log(p * q)) / math.log(10)
    return n_end, log10_n, log_b_end / q


def check_recurrence_divergence(
    r1: float,
    p: float,
    q: float,
    target_sum: float,
    cap: int = RECURRENCE_CAP,
    asymptotic: bool = False,
) -> CheckReport:
    """
    Iterate r_{n+1} = r_n + p exp(-q r_n) until sum 1/(r_n exp(q r_n)) >= target_sum.

    Returns a report whose witness holds n (the number of terms needed).
    With asymptotic=True, a target out of reach after `cap` direct steps is
    completed by the continuum limit and the report says how far direct
    iteration got.

    Raises:
        IterationCap: target not reached within cap and asymptotic is off
    """
    if min(r1, p, q) <= 0:
        raise ValueError("r1, p and q must be positive")

    r = float(r1)
    partial = 0.0
    increasing = True
    n = 0
    second = None
    while n < cap:
        n += 1
        partial += 1.0 / (r * math.exp(q * r))
        if partial >= target_sum:
            break
        r_next = r + p * math.exp(-q * r)
        if n == 1:
            second = r_next
        if not r_next > r:
            increasing = False
            break
        r = r_next

    details = {"direct_steps": n, "direct_partial_sum": partial, "r2": second}
    if partial >= target_sum:
        witness = {"n": n, "partial_sum": partial, "r_n": r}
        ok = increasing
    elif asymptotic:
        n_end, log10_n, r_end = _continue_asymptotically(math.exp(-q * r), n, partial, p, q, target_sum)
        witness = {"n": n_end, "log10_n": log10_n, "partial_sum": target_sum, "r_n": r_end}
        details["asymptotic"] = True
        ok = increasing
        logger.info(f"Recurrence target {target_sum:g} completed asymptotically (log10 n ~ {log10_n:.3f})")
    else:
        raise IterationCap(
            f"partial sum {partial:.6g} below {target_sum:g} after {n} steps",
            {"cap": cap, "partial_sum": partial, "r_n": r},
        )
    return CheckReport(
        check="recurrence_divergence",
        verdict=verdict_of(ok),
        witness=witness,
        details={**details, "increasing": increasing},
    )


def constant_data_oracle(model: Model, r: float, t: float) -> float:
    """
    Value at time t of the constant solution started at r.

    Logistic models use the closed form; others integrate
    u' = u (beta - G(u)) with an adaptive high-order Runge-Kutta method.
    """
    if r == 0 or t == 0:
        return float(r)
    beta = model.beta
    if model.variant == Variant.LOGISTIC:
        theta = model.theta
        growth = math.exp(beta * t)
        return theta * r * growth / (theta - r + r * growth)

    def rhs(_, u):
        return u * (beta - model.competition.on_constant(float(u[0])))

    sol = solve_ivp(rhs, (0.0, t), [float(r)], method="DOP853", rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1])


def check_constant_data(
    model: Model,
    kernel: Kernel,
    r: float,
    t: float,
    tol: float = 1e-6,
    opts: Optional[EvolveOptions] = None,
) -> CheckReport:
    """Evolve the constant field r and compare every cell with the scalar oracle."""
    traj = evolve(Field.constant(kernel.grid, r), t, model, kernel, opts)
    expected = constant_data_oracle(model, r, t)
    err = float(np.max(np.abs(traj.final.values - expected)))
    rel = err / max(abs(expected), 1e-300)
    return CheckReport(
        check="constant_data",
        verdict=verdict_of(rel <= tol),
        margin=tol - rel,
        witness={"r": r, "t": t, "expected": expected, "relative_error": rel},
        details={"steps": traj.steps},
    )
