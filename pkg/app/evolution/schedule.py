"""Step-size schedule for the integrating-factor fixed-point scheme.

For a bound mu on the current sup-norm, the contraction settings are

    r  = mu + alpha*m*e^(1 - q*mu)
    dt = alpha*m*e^(1 - q*r) / (2*kappa*r)

where q is the exponent with ||Gv - Gw|| <= e^(q r) ||v - w|| on E_r+.
Iterating the first line gives r_{n+1} = r_n + p*e^(-q r_n), p = alpha*m*e.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

logger = logging.getLogger(__name__)


def effective_mortality(m: float, kappa: float) -> float:
    """Mortality used by the settings; m = 0 borrows kappa."""
    return m if m > 0 else kappa


def lipschitz_exponent(l_theta: float, theta: float) -> float:
    """Smallest q with e^(q*theta) = 1 + l_theta, so e^(q r) >= l_theta for r >= theta."""
    return float(np.log1p(l_theta) / theta)


def schedule_cap(mu: float, alpha: float, m: float, kappa: float, q: float) -> float:
    """Largest step allowed from a state with sup-norm mu."""
    m_eff = effective_mortality(m, kappa)
    r = mu + alpha * m_eff * np.exp(1 - q * mu)
    return float(alpha * m_eff * np.exp(1 - q * r) / (2 * kappa * r))


@dataclass
class StepSchedule:
    """Norm bounds r_n and step lengths dt_n of the a-priori recurrence."""

    r_seq: List[float]
    dt_seq: List[float]
    p: float
    q: float
    alpha: float = 0.5
    meta: dict = field(default_factory=dict)

    @classmethod
    def a_priori(cls, r1: float, alpha: float, m: float, kappa: float, q: float, n: int) -> "StepSchedule":
        """
        Build n terms of the schedule starting from the bound r1.

        Args:
            r1: Initial norm bound (> 0)
            alpha: Contraction parameter in (0, 1)
            m: Mortality (0 falls back to kappa)
            kappa: Dispersal rate
            q: Lipschitz exponent
            n: Number of terms
        """
        if r1 <= 0 or not 0 < alpha < 1 or q <= 0 or n < 1:
            raise ValueError("need r1 > 0, alpha in (0, 1), q > 0 and n >= 1")
        m_eff = effective_mortality(m, kappa)
        p = alpha * m_eff * np.e
        r = np.empty(n)
        r[0] = r1
        for k in range(1, n):
            r[k] = r[k - 1] + p * np.exp(-q * r[k - 1])
        dt = alpha * m_eff * np.exp(1 - q * r) / (2 * kappa * r)
        return cls(r_seq=r.tolist(), dt_seq=dt.tolist(), p=float(p), q=float(q), alpha=alpha,
                   meta={"m": m, "kappa": kappa})

    @property
    def horizon(self) -> float:
        return float(np.sum(self.dt_seq))

    def recurrence_residual(self) -> float:
        """Max |r_{n+1} - r_n - p e^{-q r_n}| over the stored terms."""
        r = np.asarray(self.r_seq)
        if r.size < 2:
            return 0.0
        return float(np.max(np.abs(r[1:] - r[:-1] - self.p * np.exp(-self.q * r[:-1]))))
