"""Analytic equilibrium objects: active-bidder cutoff, lower bound alpha and selection weights"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import structlog

from src.errors import DomainError

logger = structlog.get_logger(__name__)

BRANCH_POINT = -math.exp(-1.0)
BRACKET_EPSILON = 1e-15
MAX_BISECTION_ITERATIONS = 200
MAX_HALLEY_ITERATIONS = 60
BOUNDARY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AuctionInstance:
    """
    Bidder count and mean constraints

    Means are stored sorted descending; original_indices[j] is the position the
    j-th stored mean had in the caller's input.
    """

    means: Tuple[float, ...]
    original_indices: Tuple[int, ...]

    def __post_init__(self):
        if len(self.means) < 1:
            raise DomainError("An auction needs at least one bidder")
        if len(self.means) != len(self.original_indices):
            raise DomainError("means and original_indices must have the same length")
        if sorted(self.original_indices) != list(range(len(self.means))):
            raise DomainError("original_indices must be a permutation of 0..n-1")
        for mean in self.means:
            if not (isinstance(mean, (int, float)) and 0.0 < mean < 1.0):
                raise DomainError(f"Every mean must lie in (0, 1), got {mean!r}")
        for first, second in zip(self.means, self.means[1:]):
            if second > first:
                raise DomainError("Stored means must be non-increasing")

    @classmethod
    def from_means(cls, means: Sequence[float]) -> "AuctionInstance":
        """Build an instance from means in bidder order (stable descending sort)"""
        values = [float(m) for m in means]
        order = sorted(range(len(values)), key=lambda i: -values[i])
        return cls(means=tuple(values[i] for i in order), original_indices=tuple(order))

    @classmethod
    def symmetric(cls, m: float, n: int) -> "AuctionInstance":
        """n bidders sharing the mean m"""
        if n < 1:
            raise DomainError(f"n must be at least 1, got {n}")
        return cls.from_means([m] * n)

    @property
    def n(self) -> int:
        return len(self.means)

    def means_in_original_order(self) -> List[float]:
        result = [0.0] * self.n
        for mean, index in zip(self.means, self.original_indices):
            result[index] = mean
        return result

    def top_mean(self, k: int) -> float:
        """Average of the k largest means"""
        return math.fsum(self.means[:k]) / k


@dataclass(frozen=True)
class ActiveSet:
    """Cutoff k, the average of the top-k means and the resulting lower bound alpha"""

    k: int
    mbar_k: float
    alpha: float
    boundary_bidders: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Equilibrium:
    """Equilibrium of the reserve-price game: instance, active set and selection weights"""

    instance: AuctionInstance
    active: ActiveSet
    thetas: Tuple[float, ...]

    @property
    def k(self) -> int:
        return self.active.k

    @property
    def alpha(self) -> float:
        return self.active.alpha

    @property
    def revenue(self) -> float:
        return self.active.alpha

    @property
    def log_scale(self) -> float:
        """k - 1 - ln(alpha), the normalizer shared by G* and the certificate"""
        return self.k - 1 - math.log(self.alpha)

    @property
    def reserve_atom(self) -> float:
        """Mass G* puts on a zero reserve"""
        return (self.k - 1) / self.log_scale

    @property
    def active_bidders(self) -> Tuple[int, ...]:
        """Original indices of the active bidders, in stored (descending mean) order"""
        return self.instance.original_indices[: self.k]

    @property
    def inactive_means(self) -> Dict[int, float]:
        """Original index -> mean of every inactive bidder"""
        return {
            index: mean
            for index, mean in zip(
                self.instance.original_indices[self.k:], self.instance.means[self.k:]
            )
        }

    def theta_for(self, bidder: int) -> float:
        """Selection probability of a bidder given by original index (0 when inactive)"""
        for position, index in enumerate(self.active_bidders):
            if index == bidder:
                return self.thetas[position]
        if 0 <= bidder < self.instance.n:
            return 0.0
        raise DomainError(f"No bidder with index {bidder}")

    def with_alpha(self, alpha: float) -> "Equilibrium":
        """
        Same instance and cutoff with a different alpha; thetas follow the formula

        Raises:
            DomainError: alpha outside (0, 1)
        """
        if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
            raise DomainError(f"Shifted alpha must lie in (0, 1), got {alpha}")
        active = ActiveSet(
            k=self.k,
            mbar_k=self.active.mbar_k,
            alpha=alpha,
            boundary_bidders=self.active.boundary_bidders,
        )
        return Equilibrium(
            instance=self.instance,
            active=active,
            thetas=tuple(selection_weights(self.instance.means[: self.k], alpha)),
        )


def alpha_residual(k: int, mbar: float, alpha: float) -> float:
    """mbar - alpha * (1 - ln(alpha) / k); zero at the lower bound"""
    return mbar - alpha * (1.0 - math.log(alpha) / k)


def bisect_increasing(
    func, lo: float, hi: float, max_iterations: int = MAX_BISECTION_ITERATIONS
) -> float:
    """
    Root of an increasing function on a bracket with func(lo) < 0 < func(hi)

    Args:
        func: Continuous, strictly increasing function
        lo: Lower end of the bracket
        hi: Upper end of the bracket
        max_iterations: Upper bound on halvings

    Returns:
        Midpoint of the final bracket
    """
    for _ in range(max_iterations):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        value = func(mid)
        if value == 0.0:
            return mid
        if value < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_alpha(k: int, mbar: float) -> float:
    """
    Lower bound alpha solving mbar = alpha * (1 - ln(alpha) / k)

    Bracketed bisection on (eps, mbar]; the right-hand side is continuous and
    strictly increasing in alpha on (0, 1).

    Args:
        k: Number of active bidders (>= 1)
        mbar: Average of the active means, in (0, 1)

    Returns:
        The unique alpha in (0, mbar)
    """
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    if not 0.0 < mbar < 1.0:
        raise DomainError(f"mbar must lie in (0, 1), got {mbar}")

    def excess(alpha: float) -> float:
        return alpha * (1.0 - math.log(alpha) / k) - mbar

    alpha = bisect_increasing(excess, BRACKET_EPSILON, mbar)
    logger.debug("alpha_solved", k=k, mbar=mbar, alpha=alpha, residual=excess(alpha))
    return alpha


def lambert_w_minus1(x: float) -> float:
    """
    Lower real branch W_{-1} of the Lambert W function

    Halley iteration from a branch-point series (near -1/e) or the asymptotic
    log expansion (near 0), with a bisection fallback on w <= -1.

    Args:
        x: Argument in [-1/e, 0)

    Returns:
        w <= -1 with w * exp(w) = x
    """
    if not (isinstance(x, (int, float)) and math.isfinite(x)):
        raise DomainError(f"W_-1 needs a finite real argument, got {x!r}")
    if x >= 0.0 or x < BRANCH_POINT:
        raise DomainError(f"W_-1 is defined on [-1/e, 0), got {x}")

    if x < -0.25:
        p = -math.sqrt(max(0.0, 2.0 * (1.0 + math.e * x)))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(MAX_HALLEY_ITERATIONS):
        ew = math.exp(w)
        f = w * ew - x
        if f == 0.0 or w == -1.0:
            break
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_next = min(w - step, -1.0)
        if abs(w_next - w) <= 1e-15 * abs(w):
            w = w_next
            break
        w = w_next

    if w > -1.0 or abs(w * math.exp(w) - x) > 1e-12:
        w = _lambert_w_minus1_bisect(x)
    return w


def _lambert_w_minus1_bisect(x: float) -> float:
    # w * exp(w) decreases from -1/e to 0 as w runs from -1 to -inf
    lower = -2.0
    while lower * math.exp(lower) < x:
        lower *= 2.0
    return bisect_increasing(lambda w: x - w * math.exp(w), lower, -1.0)


def solve_alpha_closed_form(k: int, mbar: float) -> float:
    """alpha = exp(k + W_{-1}(-k * mbar / e^k)), the cross-check for solve_alpha"""
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    if not 0.0 < mbar < 1.0:
        raise DomainError(f"mbar must lie in (0, 1), got {mbar}")
    x = -k * mbar * math.exp(-k)
    if x == 0.0:
        raise DomainError(f"k={k} underflows the closed form; use solve_alpha")
    return math.exp(k + lambert_w_minus1(max(x, BRANCH_POINT)))


def selection_weights(active_means: Sequence[float], alpha: float) -> List[float]:
    """theta_i = (m_i - alpha) / (-alpha * ln(alpha)) for each active mean"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    scale = -alpha * math.log(alpha)
    return [(mean - alpha) / scale for mean in active_means]


def cutoff_k(instance: AuctionInstance) -> ActiveSet:
    """
    Active-bidder cutoff

    Starting at i = 2, returns k = i - 1 as soon as m_i <= alpha_{i-1}(mbar_{i-1});
    when every bidder passes, k = n.

    Args:
        instance: Auction instance (means sorted descending)

    Returns:
        ActiveSet with k, the top-k mean average and alpha
    """
    n = instance.n
    k = n
    for i in range(2, n + 1):
        ell = i - 1
        alpha_ell = solve_alpha(ell, instance.top_mean(ell))
        if instance.means[i - 1] <= alpha_ell:
            k = ell
            break

    mbar = instance.top_mean(k)
    alpha = solve_alpha(k, mbar)

    if any(mean <= alpha for mean in instance.means[:k]) or any(
        mean > alpha for mean in instance.means[k:]
    ):
        logger.warning("cutoff_invariant_violated", k=k, alpha=alpha, means=list(instance.means))

    boundary = tuple(
        index
        for mean, index in zip(instance.means, instance.original_indices)
        if abs(mean - alpha) <= BOUNDARY_TOLERANCE
    )
    if boundary:
        logger.warning("bidders_on_cutoff_boundary", bidders=list(boundary), alpha=alpha)

    logger.debug("cutoff_found", n=n, k=k, mbar_k=mbar, alpha=alpha)
    return ActiveSet(k=k, mbar_k=mbar, alpha=alpha, boundary_bidders=boundary)


def compute_equilibrium(instance: AuctionInstance) -> Equilibrium:
    """
    Cutoff, lower bound and selection weights of the equilibrium

    Args:
        instance: Auction instance

    Returns:
        Equilibrium whose revenue is alpha
    """
    active = cutoff_k(instance)
    thetas = selection_weights(instance.means[: active.k], active.alpha)
    equilibrium = Equilibrium(instance=instance, active=active, thetas=tuple(thetas))
    logger.info(
        "equilibrium_computed",
        n=instance.n,
        k=active.k,
        alpha=active.alpha,
        theta_sum=math.fsum(thetas),
    )
    return equilibrium
