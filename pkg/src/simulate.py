"""Monte Carlo second-price auctions with a random reserve"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from src.distributions import (
    HighestValueDist,
    ReserveDist,
    ValueProfile,
    WorstCaseDist,
    fosd_compare,
)
from src.equilibrium import AuctionInstance, Equilibrium, compute_equilibrium
from src.errors import DomainError
from src.revenue import top_two

logger = structlog.get_logger(__name__)

# rng, size -> (size, n) value profiles
ProfileSampler = Callable[[np.random.Generator, int], np.ndarray]
# rng, size -> (size,) reserves
ReserveSampler = Callable[[np.random.Generator, int], np.ndarray]
# count, mean, sum of squared deviations
Moments = Tuple[int, float, float]

FLOOR_STANDARD_ERRORS = 3.0
SWEEP_COLUMNS = ["n", "alpha", "mass_above_zero", "revenue", "stderr"]


@dataclass(frozen=True)
class SimConfig:
    """Trial count, root seed and thread count of a Monte Carlo run"""

    trials: int
    seed: int
    parallel_streams: int = 1
    chunk_size: int = 65_536

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError(f"trials must be positive, got {self.trials}")
        if self.parallel_streams < 1 or self.chunk_size < 1:
            raise DomainError("parallel_streams and chunk_size must be positive")

    @property
    def num_chunks(self) -> int:
        return math.ceil(self.trials / self.chunk_size)


@dataclass(frozen=True)
class SweepRow:
    n: int
    alpha_n: float
    reserve_mass_above_zero: float
    revenue: float
    stderr: float = 0.0


@dataclass(frozen=True)
class AuctionOutcome:
    winner: Optional[int]
    revenue: float


@dataclass(frozen=True)
class CandidateDistribution:
    """A named joint value law that satisfies the mean constraints"""

    name: str
    sampler: ProfileSampler


@dataclass(frozen=True)
class FloorResult:
    candidate: str
    revenue: float
    stderr: float
    floor: float
    passed: bool


def run_auction(profile: ValueProfile, reserve: float) -> AuctionOutcome:
    """
    Second-price auction with a common reserve and truthful bids

    The highest bidder (lowest index among ties) wins iff its value strictly
    exceeds the reserve and pays max(second value, reserve).
    """
    if not 0.0 <= reserve <= 1.0:
        raise DomainError(f"reserve must lie in [0, 1], got {reserve}")
    if profile.v1 <= reserve:
        return AuctionOutcome(winner=None, revenue=0.0)
    winner = profile.values.index(profile.v1)
    return AuctionOutcome(winner=winner, revenue=max(profile.v2, reserve))


def auction_revenue(values: np.ndarray, reserves: np.ndarray) -> np.ndarray:
    """Revenue of every row of a (N, n) value matrix against its own reserve"""
    v1, v2 = top_two(values)
    return np.where(v1 > reserves, np.maximum(v2, reserves), 0.0)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based Philox stream owned by one chunk of trials"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunk_moments(
    f_sampler: ProfileSampler, g_sampler: ReserveSampler, sim_config: SimConfig, chunk: int
) -> Moments:
    size = min(sim_config.chunk_size, sim_config.trials - chunk * sim_config.chunk_size)
    rng = chunk_generator(sim_config.seed, chunk)
    revenue = auction_revenue(f_sampler(rng, size), g_sampler(rng, size))
    mean = float(revenue.mean())
    return size, mean, float(np.sum((revenue - mean) ** 2))


def _merge(left: Moments, right: Moments) -> Moments:
    """Pairwise combination of (count, mean, M2)"""
    n_a, mean_a, m2_a = left
    n_b, mean_b, m2_b = right
    total = n_a + n_b
    delta = mean_b - mean_a
    return total, mean_a + delta * n_b / total, m2_a + m2_b + delta * delta * n_a * n_b / total


def estimate_psi(
    f_sampler: ProfileSampler, g_sampler: ReserveSampler, sim_config: SimConfig
) -> Tuple[float, float]:
    """
    Sample mean and standard error of auction revenue under (F, G)

    Trials are split into fixed chunks with their own Philox stream; chunks are
    reduced in index order, so the estimate is the same for any thread count.

    Args:
        f_sampler: Value-profile sampler
        g_sampler: Reserve sampler
        sim_config: Trials, seed and threads

    Returns:
        (mean revenue, standard error)
    """
    with ThreadPoolExecutor(max_workers=sim_config.parallel_streams) as pool:
        moments = list(
            pool.map(
                lambda c: _chunk_moments(f_sampler, g_sampler, sim_config, c),
                range(sim_config.num_chunks),
            )
        )

    total = moments[0]
    for part in moments[1:]:
        total = _merge(total, part)
    count, mean, m2 = total

    stderr = math.sqrt(m2 / (count - 1) / count) if count > 1 else 0.0
    logger.debug("psi_estimated", trials=count, mean=mean, stderr=stderr, chunks=len(moments))
    return mean, stderr


def worst_case_sampler(eq: Equilibrium) -> ProfileSampler:
    law = WorstCaseDist(eq)
    return lambda rng, size: law.sample_batch(rng.random(size), rng.random(size))


def reserve_sampler(eq: Equilibrium) -> ReserveSampler:
    law = ReserveDist(eq.alpha, eq.k)
    return lambda rng, size: np.asarray(law.sample(rng.random(size)), dtype=float)


def fixed_reserve_sampler(reserve: float) -> ReserveSampler:
    if not 0.0 <= reserve <= 1.0:
        raise DomainError(f"reserve must lie in [0, 1], got {reserve}")
    return lambda rng, size: np.full(size, reserve)


def _point_mass(means: np.ndarray) -> ProfileSampler:
    return lambda rng, size: np.tile(means, (size, 1))


def _bernoulli(means: np.ndarray) -> ProfileSampler:
    return lambda rng, size: (rng.random((size, means.size)) < means).astype(float)


def _beta(means: np.ndarray, concentration: float = 2.0) -> ProfileSampler:
    a = concentration * means
    b = concentration * (1.0 - means)
    return lambda rng, size: rng.beta(a, b, size=(size, means.size))


def _perturbed_l_shape(eq: Equilibrium, perturbation: float) -> ProfileSampler:
    """F* with every active bidder sitting at alpha moved to alpha +/- eps"""
    law = WorstCaseDist(eq)
    eps = min(perturbation, eq.alpha / 2.0, (1.0 - eq.alpha) / 2.0)
    active = np.asarray(eq.active_bidders, dtype=int)

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        u_select = rng.random(size)
        profiles = law.sample_batch(u_select, rng.random(size))
        noise = eps * rng.choice((-1.0, 1.0), size=(size, active.size))
        noise[np.arange(size), law.select(u_select)] = 0.0
        profiles[:, active] += noise
        return profiles

    return sample


def _comonotone(eq: Equilibrium) -> ProfileSampler:
    """The marginals of F* coupled through one common uniform"""
    law = WorstCaseDist(eq)
    means = np.asarray(eq.instance.means_in_original_order(), dtype=float)
    active = np.asarray(eq.active_bidders, dtype=int)
    thetas = np.asarray(eq.thetas, dtype=float)

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)[:, None]
        low = 1.0 - thetas[None, :]
        upper_u = np.clip((u - low) / thetas[None, :], 0.0, np.nextafter(1.0, 0.0))
        active_values = np.where(u < low, eq.alpha, law.highest.sample(upper_u))
        profiles = np.tile(means, (size, 1))
        profiles[:, active] = active_values
        return profiles

    return sample


def adversarial_candidates(
    instance: AuctionInstance, perturbation: float = 0.01
) -> List[CandidateDistribution]:
    """
    Fixed battery of mean-feasible value laws to test the revenue floor of G*
    """
    eq = compute_equilibrium(instance)
    means = np.asarray(instance.means_in_original_order(), dtype=float)
    return [
        CandidateDistribution("point_mass", _point_mass(means)),
        CandidateDistribution("bernoulli", _bernoulli(means)),
        CandidateDistribution("beta", _beta(means)),
        CandidateDistribution("perturbed_l_shape", _perturbed_l_shape(eq, perturbation)),
        CandidateDistribution("comonotone", _comonotone(eq)),
        CandidateDistribution("worst_case", worst_case_sampler(eq)),
    ]


def floor_test(
    instance: AuctionInstance, sim_config: SimConfig, perturbation: float = 0.01
) -> List[FloorResult]:
    """
    Estimate revenue of every candidate against G*; each must reach alpha - 3 s.e.
    """
    eq = compute_equilibrium(instance)
    reserves = reserve_sampler(eq)
    results = []
    for candidate in adversarial_candidates(instance, perturbation):
        revenue, stderr = estimate_psi(candidate.sampler, reserves, sim_config)
        passed = revenue >= eq.alpha - FLOOR_STANDARD_ERRORS * stderr - 1e-12
        results.append(FloorResult(candidate.name, revenue, stderr, eq.alpha, passed))
        if not passed:
            logger.warning(
                "revenue_floor_violated", candidate=candidate.name, revenue=revenue, alpha=eq.alpha
            )
    logger.info(
        "floor_test_finished",
        candidates=len(results),
        failed=[r.candidate for r in results if not r.passed],
    )
    return results


def floor_frame(results: Sequence[FloorResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.candidate, r.revenue, r.stderr, r.floor, r.passed) for r in results],
        columns=["candidate", "revenue", "stderr", "floor", "passed"],
    )


def asymptotic_sweep(
    m: float, n_list: Sequence[int], sim_config: Optional[SimConfig] = None
) -> List[SweepRow]:
    """
    alpha(n), the reserve mass above zero and revenue for symmetric instances

    Args:
        m: Common mean in (0, 1)
        n_list: Bidder counts, each >= 1
        sim_config: When given, revenue is a Monte Carlo estimate of Psi(F*, G*)

    Returns:
        One SweepRow per n, in the given order
    """
    if not 0.0 < m < 1.0:
        raise DomainError(f"m must lie in (0, 1), got {m}")
    rows = []
    for n in n_list:
        if n < 1:
            raise DomainError(f"n must be at least 1, got {n}")
        eq = compute_equilibrium(AuctionInstance.symmetric(m, n))
        mass = ReserveDist(eq.alpha, eq.k).mass_above_zero
        revenue, stderr = eq.alpha, 0.0
        if sim_config is not None:
            revenue, stderr = estimate_psi(worst_case_sampler(eq), reserve_sampler(eq), sim_config)
        rows.append(SweepRow(n, eq.alpha, mass, revenue, stderr))
    logger.info("sweep_finished", m=m, rows=len(rows))
    return rows


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.n, r.alpha_n, r.reserve_mass_above_zero, r.revenue, r.stderr) for r in rows],
        columns=SWEEP_COLUMNS,
    )


def fosd_chain(rows: Sequence[SweepRow]) -> List[bool]:
    """Dominance of H for each consecutive pair of sweep rows"""
    return [
        fosd_compare(HighestValueDist(a.alpha_n), HighestValueDist(b.alpha_n))
        for a, b in zip(rows, rows[1:])
    ]


def cdf_frame(m: float, n: int, points: int) -> pd.DataFrame:
    """
    Marginal CDF of F* for one bidder and the CDF of G* on a grid of [0, 1]
    """
    eq = compute_equilibrium(AuctionInstance.symmetric(m, n))
    grid = np.union1d(np.linspace(0.0, 1.0, points), [eq.alpha])
    marginal = WorstCaseDist(eq).marginal_cdf(0, grid)
    reserve = ReserveDist(eq.alpha, eq.k).cdf(grid)
    return pd.DataFrame({"v": grid, "marginal_cdf": marginal, "reserve_cdf": reserve})
