"""Spreading speeds c*_t(xi), the spreading set and the drift-in-front check."""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import optimize

from app.core.exceptions import BracketNotFound, NoStall
from app.core.parallel import parallel_map, worker_count
from app.core.reports import CheckReport, verdict_of
from app.evolution.stepper import EvolveOptions
from app.kernels.builders import Kernel, reduce_kernel
from app.nonlinearity.model import Model, drift
from app.spreading.weinberger import WeinbergerProblem, classify_trend

logger = logging.getLogger(__name__)

MAX_WIDENINGS = 8


class ProbeResult(BaseModel):
    c: float
    side: str = Field(..., description="theta or zero")
    right_limit: float
    iterations: int
    stalled: bool


class SpreadingResult(BaseModel):
    """Outcome of the bisection for c*_t(xi)."""

    xi: List[float]
    t: float
    c_star: float
    bracket: Tuple[float, float]
    dichotomy_witnesses: Dict[str, float] = Field(
        default_factory=dict, description="f(inf) proxies at the bracket ends"
    )
    iterations: int = 0
    probes: List[ProbeResult] = Field(default_factory=list)

    def to_row(self) -> dict:
        return {
            "xi": " ".join(f"{x:.6g}" for x in self.xi),
            "t": self.t,
            "c_star": self.c_star,
            "c_lo": self.bracket[0],
            "c_hi": self.bracket[1],
            "f_inf_lo": self.dichotomy_witnesses.get("c_lo"),
            "f_inf_hi": self.dichotomy_witnesses.get("c_hi"),
            "iterations": self.iterations,
        }


def linear_spreading_speed(t: float, xi: Sequence[float], model: Model, kernel: Kernel) -> float:
    """
    Linearization estimate t * min_{lambda > 0} (kappa M(lambda) - m) / lambda.

    M(lambda) is the moment generating sum of the kernel along xi; lambda is
    bounded so that exp(lambda y.xi) stays finite on the lattice.
    """
    reduced = reduce_kernel(kernel, np.atleast_1d(np.asarray(xi, dtype=float)))
    reach = float(np.max(np.abs(reduced.grid.lags(0))))
    lam_max = min(50.0, 600.0 / reach)

    def rate(lam: float) -> float:
        return (model.kappa * reduced.moment_generating(lam, [1.0]) - model.m) / lam

    res = optimize.minimize_scalar(rate, bounds=(1e-6, lam_max), method="bounded",
                                   options={"xatol": 1e-10})
    if res.x > 0.99 * lam_max:
        logger.warning(f"Linearization minimum sits at the lambda bound {lam_max:.3g}")
    return float(t * res.fun)


def probe(
    c: float,
    t: float,
    xi: Sequence[float],
    model: Model,
    kernel: Kernel,
    half_width: Optional[float] = None,
    n_max: int = 200,
    stall_tol: float = 1e-6,
    opts: Optional[EvolveOptions] = None,
) -> ProbeResult:
    """Classify c by the right limit of the recursion (threshold theta/2)."""
    problem = WeinbergerProblem(t, c, xi, model, kernel, half_width, opts)
    theta = problem.theta
    try:
        result = problem.limit(problem.phi(), n_max, stall_tol, stop_above=0.5 * theta)
        side = "theta" if result.right_limit >= 0.5 * theta else "zero"
        return ProbeResult(c=c, side=side, right_limit=result.right_limit,
                           iterations=result.iterations, stalled=result.stalled)
    except NoStall as exc:
        side = classify_trend(exc.history, theta, exc.fronts, problem.lattice.spacing[0])
        logger.info(f"Probe c={c:g} did not stall; trend says {side}")
        return ProbeResult(c=c, side=side, right_limit=exc.history[-1], iterations=exc.n_max, stalled=False)


def estimate_cstar(
    t: float,
    xi: Sequence[float],
    model: Model,
    kernel: Kernel,
    bracket: Optional[Tuple[float, float]] = None,
    tol_c: float = 0.05,
    half_width: Optional[float] = None,
    n_max: int = 200,
    stall_tol: float = 1e-6,
    max_workers: Optional[int] = None,
    opts: Optional[EvolveOptions] = None,
) -> SpreadingResult:
    """
    Bisect (k-sect with several workers) on c between the two dichotomy sides.

    Args:
        t: Time per recursion step; c*_t is a displacement over t
        xi: Unit direction
        bracket: (c_lo, c_hi); default around the linearization estimate,
            widened geometrically until it straddles the dichotomy
        tol_c: Final bracket width

    Raises:
        BracketNotFound: no straddling bracket after repeated widening
    """
    xi = [float(x) for x in np.atleast_1d(xi)]
    probes: List[ProbeResult] = []

    def classify(cs: Sequence[float]) -> List[ProbeResult]:
        found = parallel_map(
            lambda c: probe(c, t, xi, model, kernel, half_width, n_max, stall_tol, opts), cs, max_workers
        )
        probes.extend(found)
        return found

    if bracket is None:
        guess = linear_spreading_speed(t, xi, model, kernel)
        width = 0.25 * abs(guess) + t * reduce_kernel(kernel, xi).scale
        bracket = (guess - width, guess + width)
    lo, hi = map(float, bracket)
    if lo >= hi:
        raise ValueError("bracket must satisfy c_lo < c_hi")

    lo_probe, hi_probe = classify([lo, hi])
    width = hi - lo
    for widening in range(MAX_WIDENINGS + 1):
        if lo_probe.side == "theta" and hi_probe.side == "zero":
            break
        if widening == MAX_WIDENINGS:
            raise BracketNotFound(
                f"no dichotomy between c={lo:g} and c={hi:g}", {"bracket": [lo, hi]}
            )
        width *= 2
        if lo_probe.side == "zero":
            hi, hi_probe = lo, lo_probe
            lo = lo - width
            (lo_probe,) = classify([lo])
        else:
            lo, lo_probe = hi, hi_probe
            hi = hi + width
            (hi_probe,) = classify([hi])
        logger.info(f"Widened c bracket to [{lo:.5g}, {hi:.5g}]")

    workers = worker_count(max_workers)
    while hi - lo > tol_c:
        interior = list(np.linspace(lo, hi, workers + 2)[1:-1])
        results = classify(interior)
        points = [lo_probe] + results + [hi_probe]
        first_zero = next(i for i, p in enumerate(points) if p.side == "zero")
        lo_probe, hi_probe = points[first_zero - 1], points[first_zero]
        lo, hi = lo_probe.c, hi_probe.c
        logger.debug(f"c* bracket [{lo:.5g}, {hi:.5g}]")

    result = SpreadingResult(
        xi=xi,
        t=t,
        c_star=0.5 * (lo + hi),
        bracket=(lo, hi),
        dichotomy_witnesses={"c_lo": lo_probe.right_limit, "c_hi": hi_probe.right_limit},
        iterations=sum(p.iterations for p in probes),
        probes=probes,
    )
    logger.info(f"c*_{t:g}({xi}) = {result.c_star:.5g} in [{lo:.5g}, {hi:.5g}] after {len(probes)} probes")
    return result


def upsilon_contains(
    point: Sequence[float],
    t: float,
    model: Model,
    kernel: Kernel,
    directions: Sequence[Sequence[float]],
    tol: float = 0.0,
    results: Optional[List[SpreadingResult]] = None,
    **cstar_kwargs,
) -> CheckReport:
    """
    Whether x.xi <= c*_t(xi) - margin for every sampled xi.

    Interior membership needs every margin c*_t(xi) - x.xi to exceed tol.
    Precomputed results (one per direction, same order) skip the bisections.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if results is None:
        results = [estimate_cstar(t, xi, model, kernel, **cstar_kwargs) for xi in directions]
    rows = []
    for xi, res in zip(directions, results):
        proj = float(np.dot(point, np.atleast_1d(xi)))
        rows.append({"xi": list(np.atleast_1d(xi).astype(float)), "c_star": res.c_star,
                     "projection": proj, "margin": res.c_star - proj})
    worst = min(rows, key=lambda r: r["margin"])
    return CheckReport(
        check="upsilon_contains",
        verdict=verdict_of(worst["margin"] > tol),
        margin=worst["margin"],
        witness={"point": point.tolist(), "xi": worst["xi"]},
        table=rows,
    )


def check_drift_in_front(
    model: Model,
    kernel: Kernel,
    t: float,
    directions: Sequence[Sequence[float]],
    tol: float = 0.0,
    **cstar_kwargs,
) -> CheckReport:
    """t*m lies in the interior of the spreading set, m = kappa * first moment of a."""
    m_vec = drift(model, kernel)
    report = upsilon_contains(t * m_vec, t, model, kernel, directions, tol, **cstar_kwargs)
    report.check = "drift_in_front"
    report.details["drift"] = m_vec.tolist()
    return report


def upsilon_polygon(results: Sequence[SpreadingResult]) -> np.ndarray:
    """
    Vertices of the 2D polygon {x : x.xi <= c*(xi)} from sampled half-planes.

    Directions are sorted by angle; consecutive half-plane boundaries are
    intersected.
    """
    if any(len(r.xi) != 2 for r in results):
        raise ValueError("the spreading polygon is two-dimensional")
    ordered = sorted(results, key=lambda r: np.arctan2(r.xi[1], r.xi[0]))
    vertices = []
    for a, b in zip(ordered, ordered[1:] + ordered[:1]):
        mat = np.array([a.xi, b.xi])
        if abs(np.linalg.det(mat)) < 1e-12:
            continue
        vertices.append(np.linalg.solve(mat, [a.c_star, b.c_star]))
    return np.array(vertices)


def check_profile_stability(
    t: float,
    c: float,
    xi: Sequence[float],
    model: Model,
    kernel: Kernel,
    half_width: float,
    n_max: int = 200,
    stall_tol: float = 1e-6,
    tol: float = 1e-3,
    opts: Optional[EvolveOptions] = None,
) -> CheckReport:
    """Classification and f(inf) proxy agree when S is doubled."""
    rows = []
    for S in (half_width, 2 * half_width):
        res = probe(c, t, xi, model, kernel, S, n_max, stall_tol, opts)
        rows.append({"half_width": S, "side": res.side, "right_limit": res.right_limit,
                     "stalled": res.stalled})
    same_side = rows[0]["side"] == rows[1]["side"]
    gap = abs(rows[0]["right_limit"] - rows[1]["right_limit"])
    ok = same_side and (gap <= tol or not (rows[0]["stalled"] and rows[1]["stalled"]))
    return CheckReport(check="profile_stability", verdict=verdict_of(ok), margin=tol - gap,
                       witness={"c": c, "gap": gap}, table=rows)
