"""Equilibrium laws: highest value H, random reserve G* and the worst-case joint law F*"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import structlog

from src.equilibrium import Equilibrium
from src.errors import DomainError

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


def _unit_interval(x: ArrayLike, name: str) -> np.ndarray:
    """Validate that every entry lies in [0, 1] and return a float array"""
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _like(x: ArrayLike, result: np.ndarray) -> ArrayLike:
    return float(result) if np.ndim(x) == 0 else result


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class HighestValueDist:
    """
    Law of the highest value under F*

    Density alpha / v**2 on (alpha, 1) plus an atom of mass alpha at v = 1.
    """

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha)

    def cdf(self, v: ArrayLike) -> ArrayLike:
        arr = _unit_interval(v, "v")
        a = self.alpha
        result = np.where(arr >= 1.0, 1.0, np.where(arr <= a, 0.0, (arr - a) / np.maximum(arr, a)))
        return _like(v, result)

    def cdf_left(self, v: ArrayLike) -> ArrayLike:
        """Left limit H(v-); differs from cdf only at the atom v = 1"""
        arr = _unit_interval(v, "v")
        a = self.alpha
        result = np.where(arr <= a, 0.0, (arr - a) / np.maximum(arr, a))
        return _like(v, result)

    def density(self, v: ArrayLike) -> ArrayLike:
        arr = _unit_interval(v, "v")
        a = self.alpha
        result = np.where((arr > a) & (arr < 1.0), a / np.maximum(arr, a) ** 2, 0.0)
        return _like(v, result)

    @property
    def atom(self) -> float:
        """Mass at v = 1"""
        return self.alpha

    def mean(self) -> float:
        return self.alpha * (1.0 - math.log(self.alpha))

    def sample(self, u: ArrayLike) -> ArrayLike:
        """Inverse-CDF draw: alpha / (1 - u) below 1 - alpha, else the atom at 1"""
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError("uniform draws must lie in [0, 1)")
        a = self.alpha
        below = arr < 1.0 - a
        result = np.where(below, a / np.where(below, 1.0 - arr, 1.0), 1.0)
        return _like(u, result)


@dataclass(frozen=True)
class ReserveDist:
    """
    Seller's random reserve G*

    Atom (k-1)/(k-1-ln alpha) at p = 0, density 1/(p (k-1-ln alpha)) on (alpha, 1],
    nothing on (0, alpha] and no atom at 1.
    """

    alpha: float
    k: int

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.k < 1:
            raise DomainError(f"k must be at least 1, got {self.k}")

    @property
    def scale(self) -> float:
        return self.k - 1 - math.log(self.alpha)

    @property
    def atom(self) -> float:
        """Mass on a zero reserve"""
        return (self.k - 1) / self.scale

    @property
    def mass_above_zero(self) -> float:
        return -math.log(self.alpha) / self.scale

    def cdf(self, p: ArrayLike) -> ArrayLike:
        arr = _unit_interval(p, "p")
        a = self.alpha
        result = self.atom + np.log(np.maximum(arr, a) / a) / self.scale
        return _like(p, result)

    def density(self, p: ArrayLike) -> ArrayLike:
        arr = _unit_interval(p, "p")
        a = self.alpha
        result = np.where(arr > a, 1.0 / (np.maximum(arr, a) * self.scale), 0.0)
        return _like(p, result)

    def sample(self, u: ArrayLike) -> ArrayLike:
        """Inverse-CDF draw: 0 below the atom, else alpha * exp((u - atom) * scale)"""
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError("uniform draws must lie in [0, 1)")
        g0 = self.atom
        result = np.where(arr < g0, 0.0, self.alpha * np.exp((arr - g0) * self.scale))
        return _like(u, np.minimum(result, 1.0))


@dataclass(frozen=True)
class ValueProfile:
    """A value profile with cached first and second order statistics"""

    values: Tuple[float, ...]
    v1: float = field(init=False)
    v2: float = field(init=False)

    def __post_init__(self):
        if not self.values:
            raise DomainError("A value profile needs at least one value")
        for value in self.values:
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"Values must lie in [0, 1], got {value}")
        ordered = sorted(self.values, reverse=True)
        object.__setattr__(self, "v1", float(ordered[0]))
        # A lone bidder faces no competing bid
        object.__setattr__(self, "v2", float(ordered[1]) if len(ordered) > 1 else 0.0)

    @classmethod
    def of(cls, *values: float) -> "ValueProfile":
        return cls(tuple(float(v) for v in values))

    @property
    def n(self) -> int:
        return len(self.values)


class WorstCaseDist:
    """
    Nature's worst-case joint law F*

    One active bidder, picked with probability theta_i, draws from H; the other
    active bidders sit at alpha; inactive bidders sit at their means.
    """

    def __init__(self, equilibrium: Equilibrium):
        self.equilibrium = equilibrium
        self.highest = HighestValueDist(equilibrium.alpha)
        self._cumulative = np.cumsum(np.asarray(equilibrium.thetas, dtype=float))
        self._active_columns = np.asarray(equilibrium.active_bidders, dtype=int)

        base = np.full(equilibrium.instance.n, equilibrium.alpha, dtype=float)
        for index, mean in equilibrium.inactive_means.items():
            base[index] = mean
        self._base_profile = base

    @property
    def alpha(self) -> float:
        return self.equilibrium.alpha

    @property
    def n(self) -> int:
        return self.equilibrium.instance.n

    def second_value(self) -> float:
        """Second-highest value on the support (alpha whenever k >= 2)"""
        if self.equilibrium.k >= 2:
            return self.alpha
        return max(self.equilibrium.inactive_means.values(), default=0.0)

    def select(self, u_select: np.ndarray) -> np.ndarray:
        """Position in the active set of the bidder picked to hold the highest value"""
        picked = np.searchsorted(self._cumulative, u_select, side="right")
        return np.minimum(picked, self.equilibrium.k - 1)

    def sample_batch(self, u_select: np.ndarray, u_value: np.ndarray) -> np.ndarray:
        """
        Draw profiles from F*

        Args:
            u_select: Uniform draws picking the highest bidder
            u_value: Uniform draws for the highest value

        Returns:
            Array of shape (len(u_select), n) in original bidder order
        """
        u_select = np.asarray(u_select, dtype=float)
        u_value = np.asarray(u_value, dtype=float)
        picked = self.select(u_select)
        highest = np.asarray(self.highest.sample(u_value), dtype=float)

        profiles = np.tile(self._base_profile, (u_select.shape[0], 1))
        profiles[np.arange(u_select.shape[0]), self._active_columns[picked]] = highest
        return profiles

    def sample(self, u_select: float, u_value: float) -> ValueProfile:
        row = self.sample_batch(np.array([u_select]), np.array([u_value]))[0]
        return ValueProfile(tuple(float(v) for v in row))

    def marginal_cdf(self, bidder: int, v: ArrayLike) -> ArrayLike:
        """
        Marginal CDF of one bidder (original index) under F*

        Active bidders: atom 1 - theta_i at alpha, theta_i * H above it.
        Inactive bidders: point mass at their mean.
        """
        arr = _unit_interval(v, "v")
        theta = self.equilibrium.theta_for(bidder)
        inactive = self.equilibrium.inactive_means
        if bidder in inactive:
            result = np.where(arr >= inactive[bidder], 1.0, 0.0)
        else:
            lifted = (1.0 - theta) + theta * np.asarray(self.highest.cdf(arr), dtype=float)
            result = np.where(arr < self.alpha, 0.0, lifted)
        return _like(v, result)

    def marginal_mean(self, bidder: int) -> float:
        inactive = self.equilibrium.inactive_means
        if bidder in inactive:
            return inactive[bidder]
        theta = self.equilibrium.theta_for(bidder)
        return theta * self.highest.mean() + (1.0 - theta) * self.alpha

    def mean_residuals(self) -> List[float]:
        """|marginal mean - m_i| per bidder, original order"""
        means = self.equilibrium.instance.means_in_original_order()
        return [abs(self.marginal_mean(i) - m) for i, m in enumerate(means)]

    def mass_residual(self) -> float:
        """|sum of selection weights - 1|"""
        return abs(math.fsum(self.equilibrium.thetas) - 1.0)

    def to_record(self) -> Dict[str, Any]:
        eq = self.equilibrium
        return {
            "alpha": eq.alpha,
            "k": eq.k,
            "thetas": {int(i): float(t) for i, t in zip(eq.active_bidders, eq.thetas)},
            "inactive_means": {int(i): float(m) for i, m in eq.inactive_means.items()},
        }

    def format_record(self) -> str:
        """Plain-text key=value record of the equilibrium laws"""
        record = self.to_record()
        thetas = ",".join(f"{i}:{t!r}" for i, t in record["thetas"].items())
        inactive = ",".join(f"{i}:{m!r}" for i, m in record["inactive_means"].items())
        lines = [
            f"alpha={record['alpha']!r}",
            f"k={record['k']}",
            f"thetas={thetas}",
            f"inactive_means={inactive}",
            f"reserve_atom={self.equilibrium.reserve_atom!r}",
        ]
        return "\n".join(lines) + "\n"


def h_cdf(d: HighestValueDist, v: ArrayLike) -> ArrayLike:
    return d.cdf(v)


def h_sample(d: HighestValueDist, u: ArrayLike) -> ArrayLike:
    return d.sample(u)


def g_cdf(d: ReserveDist, p: ArrayLike) -> ArrayLike:
    return d.cdf(p)


def g_sample(d: ReserveDist, u: ArrayLike) -> ArrayLike:
    return d.sample(u)


def f_sample(d: WorstCaseDist, u_select: float, u_value: float) -> ValueProfile:
    return d.sample(u_select, u_value)


def equilibrium_laws(eq: Equilibrium) -> Tuple[HighestValueDist, ReserveDist, WorstCaseDist]:
    """H, G* and F* of an equilibrium"""
    return HighestValueDist(eq.alpha), ReserveDist(eq.alpha, eq.k), WorstCaseDist(eq)


def fosd_gap(alpha_small: float, alpha_large: float, v: ArrayLike) -> ArrayLike:
    """
    H_n(v) - H_n'(v) written piecewise, with alpha_small = alpha(n) <= alpha_large = alpha(n')
    """
    arr = _unit_interval(v, "v")
    a, b = alpha_small, alpha_large
    safe = np.maximum(arr, a)
    result = np.select(
        [arr <= a, arr <= b, arr < 1.0],
        [0.0, (arr - a) / safe, (b - a) / safe],
        default=0.0,
    )
    return _like(v, result)


def fosd_compare(
    h_small: HighestValueDist, h_large: HighestValueDist, grid_size: int = 10_000
) -> bool:
    """
    True iff h_large first-order stochastically dominates h_small on a grid of [0, 1]

    Args:
        h_small: H built from fewer bidders
        h_large: H built from more bidders with the same mean
        grid_size: Number of grid points

    Returns:
        Whether CDF(h_large) <= CDF(h_small) at every grid point
    """
    grid = np.linspace(0.0, 1.0, grid_size)
    large = np.asarray(h_large.cdf(grid))
    small = np.asarray(h_small.cdf(grid))
    dominates = bool(np.all(large <= small + 1e-15))
    logger.debug(
        "fosd_compared", alpha_small=h_small.alpha, alpha_large=h_large.alpha, dominates=dominates
    )
    return dominates
