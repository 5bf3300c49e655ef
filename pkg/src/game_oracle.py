"""
Brute-force oracle: the reserve-price game on finite grids, solved as a linear program
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import structlog

from src.config import config
from src.distributions import ReserveDist
from src.equilibrium import AuctionInstance, compute_equilibrium
from src.errors import DomainError, OracleSizeError
from src.revenue import top_two
from src.simplex import LPResult, PivotRule, lp_solve

logger = structlog.get_logger(__name__)

PAYOFF_CHUNK_ROWS = 4096
SUPPORT_MASS_TOLERANCE = 1e-9


@dataclass
class DiscretizedGame:
    """Seller picks a reserve from reserve_grid, nature a law over value_grid^n"""

    value_grid: np.ndarray
    reserve_grid: np.ndarray
    n: int
    means: Tuple[float, ...]
    profiles: np.ndarray  # (P, n), bidders in original order
    payoff: np.ndarray  # (P, R): max(v2, p) * 1{v1 > p}
    alpha: Optional[float] = None
    solver_options: Dict[str, Any] = field(default_factory=dict)

    @property
    def num_profiles(self) -> int:
        return int(self.profiles.shape[0])


@dataclass
class LPSolution:
    """Minimax solution with the seller mixture and the affine dual certificate"""

    game_value: float
    seller_mixture: np.ndarray
    dual_gamma: np.ndarray
    dual_eta: float
    nature_distribution: np.ndarray
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0

    def to_dict(self, game: Optional[DiscretizedGame] = None) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "game_value": self.game_value,
            "seller_mixture": self.seller_mixture.tolist(),
            "dual_gamma": self.dual_gamma.tolist(),
            "dual_eta": self.dual_eta,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
        }
        if game is not None:
            support = np.flatnonzero(self.nature_distribution > SUPPORT_MASS_TOLERANCE)
            record["reserve_grid"] = game.reserve_grid.tolist()
            record["nature_support"] = [
                {"profile": game.profiles[i].tolist(), "mass": float(self.nature_distribution[i])}
                for i in support
            ]
        return record


def _solver_options(game: DiscretizedGame) -> Dict[str, Any]:
    """config.yaml oracle settings, overridden by the ones the game was built with"""
    oracle = config.oracle_config
    options = {
        "max_iterations": int(oracle.get('max_iterations', 100_000)),
        "tol": float(oracle.get('pivot_tolerance', 1e-9)),
        "refactor_every": int(oracle.get('refactor_every', 200)),
        "pivot_rule": oracle.get('pivot_rule', 'hybrid'),
    }
    options.update(game.solver_options)
    options["pivot_rule"] = PivotRule(options["pivot_rule"])
    return options


def _grid(size: int, alpha: Optional[float]) -> np.ndarray:
    points = np.linspace(0.0, 1.0, size)
    if alpha is not None:
        points = np.union1d(points, [alpha])
    return points


def _payoff_rows(profiles: np.ndarray, reserves: np.ndarray) -> np.ndarray:
    v1, v2 = top_two(profiles)
    sale = v1[:, None] > reserves[None, :]
    return np.where(sale, np.maximum(v2[:, None], reserves[None, :]), 0.0)


def build_game(
    instance: AuctionInstance,
    value_grid_size: int,
    reserve_grid_size: int,
    inject_alpha: bool = True,
    workers: int = 4,
    max_bidders: Optional[int] = None,
    max_profiles: Optional[int] = None,
    solver_options: Optional[Dict[str, Any]] = None,
) -> DiscretizedGame:
    """
    Discretize the game on uniform grids of [0, 1]

    Args:
        instance: Auction instance (at most max_bidders bidders)
        value_grid_size: Points of the value grid, 0 and 1 included
        reserve_grid_size: Points of the reserve grid
        inject_alpha: Add the equilibrium alpha to both grids
        workers: Threads used to fill the payoff matrix
        max_bidders: Bidder limit (oracle.max_bidders when None)
        max_profiles: Profile limit (oracle.max_profiles when None)
        solver_options: lp_solve options kept on the game for every later solve

    Returns:
        DiscretizedGame with the full product of value grids as profiles

    Raises:
        OracleSizeError: Too many bidders or profiles
        DomainError: Grid sizes below 2
    """
    if max_bidders is None:
        max_bidders = int(config.get('oracle.max_bidders', 3))
    if max_profiles is None:
        max_profiles = int(config.get('oracle.max_profiles', 40_000))
    if instance.n > max_bidders:
        raise OracleSizeError(f"The oracle handles at most {max_bidders} bidders, got {instance.n}")
    if value_grid_size < 2 or reserve_grid_size < 2:
        raise DomainError("Grid sizes must be at least 2")

    alpha = compute_equilibrium(instance).alpha if inject_alpha else None
    values = _grid(value_grid_size, alpha)
    reserves = _grid(reserve_grid_size, alpha)

    num_profiles = values.size ** instance.n
    if num_profiles > max_profiles:
        raise OracleSizeError(
            f"{num_profiles} profiles exceed the limit of {max_profiles}; use a coarser value grid"
        )

    mesh = np.meshgrid(*([values] * instance.n), indexing="ij")
    profiles = np.stack([axis.ravel() for axis in mesh], axis=1)

    starts = range(0, num_profiles, PAYOFF_CHUNK_ROWS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunks = list(
            pool.map(lambda s: _payoff_rows(profiles[s:s + PAYOFF_CHUNK_ROWS], reserves), starts)
        )
    payoff = np.vstack(chunks)

    logger.info(
        "game_built",
        n=instance.n,
        profiles=num_profiles,
        reserves=int(reserves.size),
        alpha_injected=inject_alpha,
    )
    return DiscretizedGame(
        value_grid=values,
        reserve_grid=reserves,
        n=instance.n,
        means=tuple(instance.means_in_original_order()),
        profiles=profiles,
        payoff=payoff,
        alpha=alpha,
        solver_options=dict(solver_options or {}),
    )


def _moment_constraints(game: DiscretizedGame) -> Tuple[np.ndarray, np.ndarray]:
    """n mean rows and one normalization row over the profile probabilities"""
    A_eq = np.vstack([game.profiles.T, np.ones((1, game.num_profiles))])
    b_eq = np.concatenate([np.asarray(game.means, dtype=float), [1.0]])
    return A_eq, b_eq


def _check_mixture(game: DiscretizedGame, mixture: np.ndarray) -> np.ndarray:
    w = np.asarray(mixture, dtype=float)
    if w.shape != game.reserve_grid.shape:
        raise DomainError(f"Mixture needs {game.reserve_grid.size} weights, got {w.shape}")
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-9:
        raise DomainError("Seller mixture must be non-negative and sum to 1")
    return w


def nature_best_response(
    game: DiscretizedGame, seller_mixture: np.ndarray
) -> Tuple[np.ndarray, float]:
    """
    Nature's revenue-minimizing law over grid profiles against a fixed seller mixture

    Returns:
        (probability per profile, minimal expected revenue)
    """
    w = _check_mixture(game, seller_mixture)
    A_eq, b_eq = _moment_constraints(game)
    result = lp_solve(game.payoff @ w, A_eq=A_eq, b_eq=b_eq, **_solver_options(game))
    return result.x, result.objective


def solve_minimax(game: DiscretizedGame) -> LPSolution:
    """
    Value of the discretized game and both players' optimal strategies

    Nature's side is solved directly: minimize z over profile probabilities f
    subject to the mean and normalization rows and, for every reserve p,
    sum_v payoff(v, p) f_v <= z. The row duals are the seller mixture (reserve
    rows) and the affine certificate gamma.v + eta (mean and normalization rows).

    Raises:
        LPSolverError subclasses with iteration diagnostics
    """
    num_profiles = game.num_profiles
    num_reserves = game.reserve_grid.size

    c = np.zeros(num_profiles + 1)
    c[-1] = 1.0
    A_ub = np.hstack([game.payoff.T, -np.ones((num_reserves, 1))])
    b_ub = np.zeros(num_reserves)
    A_moments, b_eq = _moment_constraints(game)
    A_eq = np.hstack([A_moments, np.zeros((A_moments.shape[0], 1))])

    result: LPResult = lp_solve(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, **_solver_options(game)
    )

    mixture = np.maximum(-result.duals_ub, 0.0)
    total = mixture.sum()
    mixture = mixture / total if total > 0.0 else np.full(num_reserves, 1.0 / num_reserves)

    solution = LPSolution(
        game_value=result.objective,
        seller_mixture=mixture,
        dual_gamma=result.duals_eq[: game.n].copy(),
        dual_eta=float(result.duals_eq[game.n]),
        nature_distribution=result.x[:num_profiles],
        iterations=result.iterations,
        primal_residual=result.primal_residual,
        dual_residual=result.dual_residual,
    )
    logger.info(
        "minimax_solved",
        game_value=solution.game_value,
        alpha=game.alpha,
        gamma=solution.dual_gamma,
        eta=solution.dual_eta,
        iterations=solution.iterations,
    )
    return solution


def pure_reserve_guarantees(game: DiscretizedGame) -> np.ndarray:
    """Nature's best-response value against each deterministic reserve on the grid"""
    guarantees = np.empty(game.reserve_grid.size)
    for j in range(game.reserve_grid.size):
        pure = np.zeros(game.reserve_grid.size)
        pure[j] = 1.0
        _, guarantees[j] = nature_best_response(game, pure)
    logger.debug(
        "pure_guarantees",
        best=float(guarantees.max()),
        reserve=float(game.reserve_grid[guarantees.argmax()]),
    )
    return guarantees


def discretize_reserve_law(game: DiscretizedGame, reserve: ReserveDist) -> np.ndarray:
    """
    G* moved onto the reserve grid: the mass of (r_{j-1}, r_j] goes to r_j
    """
    cdf = np.asarray(reserve.cdf(game.reserve_grid), dtype=float)
    weights = np.diff(np.concatenate([[0.0], cdf]))
    weights[-1] += 1.0 - cdf[-1]
    return np.maximum(weights, 0.0) / np.maximum(weights, 0.0).sum()


def duality_sandwich(
    game: DiscretizedGame, solution: LPSolution, mixture: Optional[np.ndarray] = None
) -> Tuple[float, float, float]:
    """
    Weak-duality bounds around the LP value

    Returns:
        (nature's best response to `mixture`, LP value, best pure reserve
        against nature's LP distribution); the first never exceeds the second
        and the second never exceeds the third
    """
    if mixture is None:
        mixture = solution.seller_mixture
    _, lower = nature_best_response(game, mixture)
    upper = float(np.max(solution.nature_distribution @ game.payoff))
    return lower, solution.game_value, upper


def complementary_slackness_gap(game: DiscretizedGame, solution: LPSolution) -> float:
    """
    Largest |seller payoff - (gamma.v + eta)| over profiles that nature uses
    """
    support = solution.nature_distribution > SUPPORT_MASS_TOLERANCE
    if not np.any(support):
        return 0.0
    expected = game.payoff[support] @ solution.seller_mixture
    affine = game.profiles[support] @ solution.dual_gamma + solution.dual_eta
    return float(np.max(np.abs(expected - affine)))


def convergence_table(instance: AuctionInstance, grid_sizes: List[int]) -> List[Dict[str, float]]:
    """LP value against alpha for a sequence of grid refinements"""
    alpha = compute_equilibrium(instance).alpha
    rows = []
    for size in grid_sizes:
        solution = solve_minimax(build_game(instance, size, size))
        rows.append({
            "grid_size": size,
            "game_value": solution.game_value,
            "error": abs(solution.game_value - alpha),
        })
    return rows
