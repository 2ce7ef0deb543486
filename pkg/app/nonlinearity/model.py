"""Competition operators G, the reaction term and the carrying capacity."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from app.core.exceptions import NoRoot
from app.kernels.builders import Kernel, embed_kernel, normalize_kernel, reduce_kernel, truncate_kernel
from app.kernels.convolution import convolve_values
from app.kernels.grid import Field, Grid, require_same_grid

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

THETA_TOL = 1e-12
THETA_CHECK_TOL = 1e-10


class Variant(str, Enum):
    """Families of competition operators."""
    LOCAL = "local"
    LOGISTIC = "logistic"
    GENERAL = "general"


class CompetitionOperator(ABC):
    """Seam for the competition operator G acting on grid fields."""

    variant: Variant

    def __init__(self, name: str, declared_theta: Optional[float] = None):
        self.name = name
        self.declared_theta = declared_theta

    @abstractmethod
    def apply(self, values: np.ndarray) -> np.ndarray:
        """G evaluated cell-wise."""

    @abstractmethod
    def product(self, values: np.ndarray) -> np.ndarray:
        """u * Gu, finite at u = 0."""

    @abstractmethod
    def on_constant(self, r: float) -> float:
        """G of the constant field r."""

    def reduced(self, xi: Sequence[float]) -> "CompetitionOperator":
        """Operator seen by planar fields along xi."""
        return self

    def rebind(self, grid: Grid) -> "CompetitionOperator":
        """Same operator on another grid with the same spacing."""
        return self

    @property
    def grid(self) -> Optional[Grid]:
        return None

    def lipschitz_hint(self) -> Optional[float]:
        """Exact Lipschitz constant on [0, theta] when known in closed form."""
        return None

    def describe(self) -> dict:
        return {"variant": self.variant.value, "name": self.name}


class LocalCompetition(CompetitionOperator):
    """Local nonlinearity: u*Gu = beta0*u - f(u)."""

    variant = Variant.LOCAL

    def __init__(
        self,
        f: ScalarFn,
        beta0: float,
        name: str = "local",
        declared_theta: Optional[float] = None,
        lipschitz: Optional[float] = None,
    ):
        super().__init__(name, declared_theta)
        self.f = f
        self.beta0 = float(beta0)
        self._lipschitz = lipschitz

    def product(self, values: np.ndarray) -> np.ndarray:
        return self.beta0 * values - self.f(values)

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        out = np.empty_like(values)
        nz = values != 0
        out[nz] = self.beta0 - self.f(values[nz]) / values[nz]
        # removable singularity at u = 0: G(0) = beta0 - f'(0+), Richardson-extrapolated
        eps = 1e-6
        slope1, slope2 = (float(self.f(np.array([h]))[0]) / h for h in (eps, 2 * eps))
        out[~nz] = self.beta0 - (2 * slope1 - slope2)
        return out

    def on_constant(self, r: float) -> float:
        return float(self.apply(np.array([r]))[0])

    def lipschitz_hint(self) -> Optional[float]:
        return self._lipschitz


class LogisticCompetition(CompetitionOperator):
    """Gu = kappa_minus * (a_minus * u)."""

    variant = Variant.LOGISTIC

    def __init__(self, kappa_minus: float, kernel: Kernel, name: str = "logistic"):
        super().__init__(name)
        self.kappa_minus = float(kappa_minus)
        self.kernel = kernel

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.kappa_minus * convolve_values(self.kernel, values)

    def product(self, values: np.ndarray) -> np.ndarray:
        return values * self.apply(values)

    def on_constant(self, r: float) -> float:
        return self.kappa_minus * self.kernel.mass * r

    def reduced(self, xi: Sequence[float]) -> "LogisticCompetition":
        return LogisticCompetition(self.kappa_minus, reduce_kernel(self.kernel, xi), self.name)

    def rebind(self, grid: Grid) -> "LogisticCompetition":
        return LogisticCompetition(self.kappa_minus, embed_kernel(self.kernel, grid), self.name)

    def lipschitz_hint(self) -> float:
        return self.kappa_minus * self.kernel.mass


class GeneralCompetition(CompetitionOperator):
    """Gu = g(a_minus * u) with g(s) = kappa_minus*s - g1(s)."""

    variant = Variant.GENERAL

    def __init__(
        self,
        kappa_minus: float,
        kernel: Kernel,
        g1: ScalarFn,
        name: str = "general",
        declared_theta: Optional[float] = None,
        lipschitz: Optional[float] = None,
    ):
        super().__init__(name, declared_theta)
        self.kappa_minus = float(kappa_minus)
        self.kernel = kernel
        self.g1 = g1
        self._lipschitz = lipschitz

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    def g(self, s: np.ndarray) -> np.ndarray:
        return self.kappa_minus * s - self.g1(s)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.g(convolve_values(self.kernel, values))

    def product(self, values: np.ndarray) -> np.ndarray:
        return values * self.apply(values)

    def on_constant(self, r: float) -> float:
        return float(self.g(np.array([self.kernel.mass * r]))[0])

    def reduced(self, xi: Sequence[float]) -> "GeneralCompetition":
        return self._with_kernel(reduce_kernel(self.kernel, xi))

    def rebind(self, grid: Grid) -> "GeneralCompetition":
        return self._with_kernel(embed_kernel(self.kernel, grid))

    def _with_kernel(self, kernel: Kernel) -> "GeneralCompetition":
        return GeneralCompetition(
            self.kappa_minus, kernel, self.g1, self.name, self.declared_theta, self._lipschitz
        )

    def lipschitz_hint(self) -> Optional[float]:
        return self._lipschitz


def kpp_local(beta: float, theta: float) -> LocalCompetition:
    """f(u) = (beta/theta) u (theta - u), so Gu = (beta/theta) u."""
    rate = beta / theta
    return LocalCompetition(
        lambda u: rate * u * (theta - u), beta, "kpp", declared_theta=theta, lipschitz=rate
    )


def power_local(beta: float, theta: float, n: float) -> LocalCompetition:
    """f(u) = beta u (1 - (u/theta)^n), so Gu = beta (u/theta)^n."""
    return LocalCompetition(
        lambda u: beta * u * (1 - (np.clip(u, 0, None) / theta) ** n),
        beta,
        f"power{n:g}",
        declared_theta=theta,
        lipschitz=beta * n / theta,
    )


def power_general(beta: float, theta: float, n: float, kernel: Kernel) -> GeneralCompetition:
    """g(s) = beta (1 - (1 - s/theta)^n) with kappa_minus = beta n / theta."""
    kappa_minus = beta * n / theta

    def g1(s: np.ndarray) -> np.ndarray:
        return kappa_minus * s - beta * (1 - (1 - s / theta) ** n)

    return GeneralCompetition(
        kappa_minus, kernel, g1, f"power{n:g}", declared_theta=theta, lipschitz=kappa_minus * kernel.mass
    )


@dataclass(frozen=True, eq=False)
class Model:
    """du/dt = kappa (a*u) - m u - u Gu."""

    kappa: float
    m: float
    competition: CompetitionOperator
    label: str = ""

    @property
    def beta(self) -> float:
        return self.kappa - self.m

    @property
    def variant(self) -> Variant:
        return self.competition.variant

    @cached_property
    def theta(self) -> float:
        return theta_of(self)

    @classmethod
    def logistic(cls, kappa: float, m: float, kappa_minus: float, kernel: Kernel) -> "Model":
        return cls(kappa, m, LogisticCompetition(kappa_minus, kernel))

    @classmethod
    def local(cls, kappa: float, m: float, f: ScalarFn, **kwargs) -> "Model":
        return cls(kappa, m, LocalCompetition(f, kappa - m, **kwargs))

    def G(self, values: np.ndarray) -> np.ndarray:
        return self.competition.apply(values)

    def uGu(self, values: np.ndarray) -> np.ndarray:
        return self.competition.product(values)

    def lipschitz_hint(self) -> Optional[float]:
        return self.competition.lipschitz_hint()

    def reduced(self, xi: Sequence[float]) -> "Model":
        """Model for planar fields along xi (competition kernels marginalized)."""
        return replace(self, competition=self.competition.reduced(xi))

    def on_grid(self, grid: Grid) -> "Model":
        return replace(self, competition=self.competition.rebind(grid))

    def check_grid(self, grid: Grid) -> None:
        if self.competition.grid is not None:
            require_same_grid(self.competition.grid, grid, "competition kernel and field")

    def describe(self) -> dict:
        return {
            "kappa": self.kappa,
            "m": self.m,
            "beta": self.beta,
            **self.competition.describe(),
        }


def drift(model: Model, kernel: Kernel) -> np.ndarray:
    """Mean displacement rate kappa * first moment of a."""
    return model.kappa * kernel.drift_density


def _warn_outside_tube(model: Model, u: Field) -> None:
    try:
        theta = model.theta
    except NoRoot:
        return
    if not u.in_tube(theta):
        logger.warning(
            f"Field outside E_theta+ (theta={theta:.6g}): range "
            f"[{u.values.min():.3g}, {u.values.max():.3g}]"
        )


def apply_G(model: Model, u: Field) -> Field:
    """
    Evaluate the competition operator on a field.

    Args:
        model: Model carrying the competition variant
        u: Field, expected in E_theta+ (warns otherwise)

    Returns:
        Field of Gu values
    """
    model.check_grid(u.grid)
    _warn_outside_tube(model, u)
    return u.with_values(model.G(u.values))


def reaction(model: Model, u: Field) -> Field:
    """Fu = u (beta - Gu); equals f(u) for the local variant."""
    model.check_grid(u.grid)
    return u.with_values(model.beta * u.values - model.uGu(u.values))


def theta_of(model: Model, r_max: float = 1e6) -> float:
    """
    Carrying capacity: the positive constant r with G(r) = beta.

    Logistic variants use (kappa - m) / (kappa_minus * mass); a declared theta
    is accepted after a residual check; otherwise the first upward crossing
    of G(r) - beta on a geometric scan is bisected to 1e-12.

    Raises:
        NoRoot: no crossing on (0, r_max]
    """
    op = model.competition
    beta = model.beta
    if isinstance(op, LogisticCompetition):
        return beta / (op.kappa_minus * op.kernel.mass)

    if op.declared_theta is not None:
        residual = abs(op.on_constant(op.declared_theta) - beta)
        if residual <= THETA_CHECK_TOL:
            return float(op.declared_theta)
        logger.info(
            f"Declared theta={op.declared_theta} misses G(theta)=beta by {residual:.3e}; solving"
        )

    def gap(r: float) -> float:
        return op.on_constant(r) - beta

    scan = np.geomspace(1e-8, r_max, 400)
    prev = scan[0]
    if gap(prev) >= 0:
        raise NoRoot(f"G(r) >= beta already at r={prev:g}", {"beta": beta})
    for r in scan[1:]:
        if gap(r) >= 0:
            root = optimize.bisect(gap, prev, r, xtol=THETA_TOL, maxiter=500)
            return float(root)
        prev = r
    raise NoRoot(f"G(r) never reaches beta={beta} on (0, {r_max:g}]", {"beta": beta, "r_max": r_max})


def approximating_model(model: Model, kernel: Kernel, radius: float) -> Tuple[Model, Kernel, np.ndarray]:
    """
    Truncated approximation of a model on the ball B_radius.

    The dispersal kernel is cut to the ball and renormalized with
    kappa_n = kappa * mass(a_n); a logistic competition kernel gets the same
    treatment with kappa_minus_n = kappa_minus * mass(a_minus_n); a general
    competition kernel stays sub-stochastic so g is unchanged.

    Returns:
        (model_n, normalized kernel_n, drift m_n = kappa * first moment of a_n)
    """
    truncated, moment = truncate_kernel(kernel, radius)
    kernel_n = normalize_kernel(truncated)
    op = model.competition
    if isinstance(op, LogisticCompetition):
        comp_t, _ = truncate_kernel(op.kernel, radius)
        op_n: CompetitionOperator = LogisticCompetition(
            op.kappa_minus * comp_t.mass, normalize_kernel(comp_t), op.name
        )
    elif isinstance(op, GeneralCompetition):
        comp_t, _ = truncate_kernel(op.kernel, radius)
        op_n = op._with_kernel(comp_t)
        op_n.declared_theta = None
    else:
        op_n = LocalCompetition(op.f, op.beta0, op.name, None, op.lipschitz_hint())

    model_n = Model(model.kappa * truncated.mass, model.m, op_n, f"{model.label}|B{radius:g}")
    drift_n = model.kappa * moment
    logger.info(
        f"Approximating model on B{radius:g}: kappa_n={model_n.kappa:.6g}, "
        f"mass(a_n)={truncated.mass:.6g}, drift_n={drift_n.tolist()}"
    )
    return model_n, kernel_n, drift_n
