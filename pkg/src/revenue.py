"""Revenue functionals of the second-price auction with a random reserve"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import structlog

from src.distributions import HighestValueDist, ReserveDist, ValueProfile, WorstCaseDist
from src.equilibrium import Equilibrium
from src.errors import DomainError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class AffineCertificate:
    """L(v) = sum_i coeffs_i * v_i + intercept over the active bidders"""

    coeffs: Tuple[float, ...]
    intercept: float

    def __post_init__(self):
        if any(c <= 0.0 for c in self.coeffs):
            raise DomainError("Certificate coefficients must be strictly positive")

    def evaluate(self, values: Union[np.ndarray, ValueProfile]) -> Union[float, np.ndarray]:
        """
        Evaluate L on one profile or a batch of shape (N, k)
        """
        if isinstance(values, ValueProfile):
            values = np.asarray(values.values, dtype=float)
        arr = np.asarray(values, dtype=float)
        result = arr @ np.asarray(self.coeffs, dtype=float) + self.intercept
        return float(result) if arr.ndim == 1 else result


@dataclass(frozen=True)
class InterimAllocation:
    """Interim allocation of each active bidder at v = 1 and at v = alpha"""

    x_at_one: Tuple[float, ...]
    x_at_alpha: Tuple[float, ...]

    def __post_init__(self):
        if len(self.x_at_one) != len(self.x_at_alpha):
            raise DomainError("x_at_one and x_at_alpha must have one entry per active bidder")
        for x in self.x_at_one + self.x_at_alpha:
            if not 0.0 <= x <= 1.0:
                raise DomainError(f"Interim allocations must lie in [0, 1], got {x}")

    @classmethod
    def uniform(cls, k: int, at_one: float, at_alpha: float) -> "InterimAllocation":
        return cls(x_at_one=(at_one,) * k, x_at_alpha=(at_alpha,) * k)


def top_two(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Highest and second-highest entry of each row; a single column has v2 = 0"""
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    if arr.shape[1] == 1:
        return arr[:, 0], np.zeros(arr.shape[0])
    part = np.partition(arr, arr.shape[1] - 2, axis=1)
    return part[:, -1], part[:, -2]


def phi_batch(values: np.ndarray, g: ReserveDist) -> np.ndarray:
    """
    Expected revenue phi(v; G*) for every row of a value matrix

    phi = v2 * G(v2) + integral of p dG over (v2, v1), and the density part of G*
    integrates p * 1/(p * scale) to a linear term. A sale needs v1 > reserve.
    """
    v1, v2 = top_two(values)
    a = g.alpha
    atom_and_low = v2 * np.asarray(g.cdf(v2), dtype=float)
    upper = (np.maximum(v1, a) - np.maximum(v2, a)) / g.scale
    return atom_and_low + upper


def phi(v: ValueProfile, g: ReserveDist) -> float:
    return float(phi_batch(np.asarray([v.values]), g)[0])


def eta_batch(p: np.ndarray, d: WorstCaseDist) -> np.ndarray:
    """
    Seller revenue against F* for each deterministic reserve p

    A sale happens iff the highest value strictly exceeds p; revenue is
    max(second value, p). At p = 1 the atom of H sits exactly at the reserve, so
    nothing sells.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("reserve prices must lie in [0, 1]")
    sale_probability = np.where(arr >= 1.0, 0.0, 1.0 - np.asarray(d.highest.cdf(arr), dtype=float))
    return np.maximum(d.second_value(), arr) * sale_probability


def eta(p: float, d: WorstCaseDist) -> float:
    return float(eta_batch(np.asarray([p]), d)[0])


def psi_closed_form(eq: Equilibrium) -> float:
    """Equilibrium revenue Psi(F*, G*) = alpha"""
    return eq.alpha


def certificate(eq: Equilibrium) -> AffineCertificate:
    """Supporting affine function of phi(.; G*) over the k active bidders"""
    scale = eq.log_scale
    return AffineCertificate(coeffs=(1.0 / scale,) * eq.k, intercept=-eq.alpha / scale)


def virtual_value(v: float, alpha: float) -> float:
    """
    v - (H(1-) - H(v)) / h(v) under H; algebraically equal to v**2
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not alpha < v < 1.0:
        raise DomainError(f"virtual value needs alpha < v < 1, got v={v}")
    h = HighestValueDist(alpha)
    return v - (h.cdf_left(1.0) - h.cdf(v)) / h.density(v)


def competitive_mechanism_revenue(eq: Equilibrium, alloc: InterimAllocation) -> float:
    """
    Revenue of a mechanism against F* from its interim allocations at 1 and alpha

    sum_i theta_i * alpha * X_i(1) + (1 - theta_i) * alpha * X_i(alpha)
    """
    if len(alloc.x_at_one) != eq.k:
        raise DomainError(f"Expected {eq.k} active-bidder allocations, got {len(alloc.x_at_one)}")
    a = eq.alpha
    return math.fsum(
        theta * a * x1 + (1.0 - theta) * a * xa
        for theta, x1, xa in zip(eq.thetas, alloc.x_at_one, alloc.x_at_alpha)
    )


def counterexample_allocation(eq: Equilibrium) -> InterimAllocation:
    """
    Interim allocation of the handicapping mechanism for two symmetric bidders

    The low bidder at alpha wins unless the high bidder has value 1, so
    X_i(1) = 1 and X_i(alpha) = 1 - alpha.
    """
    if eq.k != 2:
        raise DomainError(
            f"The handicapping mechanism is defined for two active bidders, got k={eq.k}"
        )
    return InterimAllocation.uniform(2, 1.0, 1.0 - eq.alpha)


def counterexample_revenue(alpha: float) -> float:
    """alpha + alpha * (1 - alpha): the non-competitive mechanism beats the auction"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha + alpha * (1.0 - alpha)
