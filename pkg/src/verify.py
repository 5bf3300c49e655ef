"""Numeric certification of the reserve-price equilibrium as a saddle point"""

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog
from scipy import integrate

from src.config import RunConfig
from src.distributions import WorstCaseDist, equilibrium_laws
from src.equilibrium import (
    AuctionInstance,
    Equilibrium,
    alpha_residual,
    compute_equilibrium,
    solve_alpha,
)
from src.errors import LPSolverError, OracleSizeError, ToolkitError
from src.revenue import certificate, eta_batch, phi_batch

logger = structlog.get_logger(__name__)

MAX_ENUMERATED_CORNERS = 12
SAMPLED_CORNERS = 4096


@dataclass
class VerificationReport:
    """Machine-readable outcome of the full saddle-point verification"""

    max_indifference_residual: float
    min_certificate_slack: float
    max_support_gap: float
    mean_constraint_residuals: List[float]
    mass_residuals: Dict[str, float]
    game_value_gap: Optional[float]
    passed: bool
    k: int = 0
    alpha: float = 0.0
    alpha_equation_residual: float = 0.0
    boundary_bidders: List[int] = field(default_factory=list)
    max_excess: float = 0.0
    projection: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, **extra: Any) -> str:
        payload = self.to_dict()
        payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True)


def _reference_alpha(eq: Equilibrium) -> float:
    """alpha_k(mbar_k) solved from the instance itself, independent of eq.alpha"""
    return solve_alpha(eq.k, eq.instance.top_mean(eq.k))


def verify_seller_best_response(eq: Equilibrium, grid_size: int) -> Dict[str, Any]:
    """
    Seller indifference: eta(p; F*) = alpha on supp G*, and never above it

    The grid covers [0, 1). With k >= 2 the residual is taken over the whole grid;
    with k = 1 G* has no atom at 0 and only [alpha, 1) is compared, while the
    maximal excess eta - alpha is reported over everything.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be at least 2, got {grid_size}")

    reference = _reference_alpha(eq)
    grid = np.linspace(0.0, 1.0, grid_size, endpoint=False)
    # The support starts exactly at alpha
    grid = np.union1d(grid, [eq.alpha])
    revenue = eta_batch(grid, WorstCaseDist(eq))

    on_support = grid >= eq.alpha if eq.k == 1 else np.ones_like(grid, dtype=bool)
    residual = float(np.max(np.abs(revenue[on_support] - reference)))
    excess = float(np.max(revenue - reference))

    logger.debug("seller_check_done", residual=residual, max_excess=excess, grid_size=grid.size)
    return {
        "max_indifference_residual": residual,
        "max_excess": excess,
        "reference_alpha": reference,
        "grid_points": int(grid.size),
    }


def _stratified_profiles(
    alpha: float, k: int, samples: int, rng: np.random.Generator
) -> Dict[str, np.ndarray]:
    """Random active-bidder profiles from each ordering region around alpha, `samples` or more"""
    num_cases = 3 if k >= 2 else 2
    per_case = max(1, -(-samples // num_cases))
    cases = {}

    if k >= 2:
        # Two or more values above alpha
        values = rng.uniform(0.0, 1.0, size=(per_case, k))
        values[:, :2] = alpha + (1.0 - alpha) * rng.uniform(0.0, 1.0, size=(per_case, 2))
        cases["two_above_alpha"] = values

    # Exactly one value at or above alpha
    values = alpha * rng.uniform(0.0, 1.0, size=(per_case, k))
    values[:, 0] = alpha + (1.0 - alpha) * rng.uniform(0.0, 1.0, size=per_case)
    cases["one_above_alpha"] = values

    cases["none_above_alpha"] = alpha * rng.uniform(0.0, 1.0, size=(per_case, k))
    return cases


def _corner_profiles(alpha: float, k: int, rng: np.random.Generator) -> np.ndarray:
    """All of {alpha, 1}^k, or a random subset when k is large"""
    if k <= MAX_ENUMERATED_CORNERS:
        return np.array(list(itertools.product((alpha, 1.0), repeat=k)), dtype=float)
    ones = rng.integers(0, 2, size=(SAMPLED_CORNERS, k)).astype(bool)
    return np.where(ones, 1.0, alpha)


def verify_nature_best_response(
    eq: Equilibrium, samples: int, seed: int, support_samples: int = 1000
) -> Dict[str, Any]:
    """
    Certificate check: phi(v; G*) >= L(v) everywhere, with equality on supp F*

    Profiles are over the active bidders only; the inactive ones are handled
    by verify_k_projection.

    Args:
        eq: Equilibrium to certify
        samples: Number of stratified random profiles
        seed: Seed of the profile generator
        support_samples: Number of draws from F* for the tightness check

    Returns:
        Fragment with min_certificate_slack, max_support_gap and per-case slacks
    """
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")

    rng = np.random.default_rng(seed)
    _, reserve, worst_case = equilibrium_laws(eq)
    cert = certificate(eq)
    k = eq.k

    case_slacks = {}
    stratified = 0
    for name, profiles in _stratified_profiles(eq.alpha, k, samples, rng).items():
        stratified += profiles.shape[0]
        case_slacks[name] = float(np.min(phi_batch(profiles, reserve) - cert.evaluate(profiles)))

    corners = _corner_profiles(eq.alpha, k, rng)
    extremes = np.vstack([np.zeros((1, k)), np.ones((1, k))])
    case_slacks["corners"] = float(np.min(phi_batch(corners, reserve) - cert.evaluate(corners)))
    case_slacks["extremes"] = float(np.min(phi_batch(extremes, reserve) - cert.evaluate(extremes)))

    draws = worst_case.sample_batch(
        rng.uniform(0.0, 1.0, size=support_samples), rng.uniform(0.0, 1.0, size=support_samples)
    )
    support = draws[:, list(eq.active_bidders)]
    support_gap = float(np.max(np.abs(phi_batch(support, reserve) - cert.evaluate(support))))

    min_slack = min(case_slacks.values())
    logger.debug("certificate_check_done", min_slack=min_slack, support_gap=support_gap, k=k)
    return {
        "min_certificate_slack": min_slack,
        "max_support_gap": support_gap,
        "case_slacks": case_slacks,
        "stratified_profiles": int(stratified),
        "corner_profiles": int(corners.shape[0]),
    }


def verify_k_projection(
    eq: Equilibrium, samples: int, seed: int = 0, tolerance: float = 1e-12
) -> Dict[str, Any]:
    """
    Inactive bidders never change revenue on supp F* and can only raise it elsewhere

    Returns:
        Fragment with status "passed", "failed" or "skipped" (when k == n)
    """
    if eq.k == eq.instance.n:
        return {"status": "skipped"}

    rng = np.random.default_rng(seed)
    _, reserve, worst_case = equilibrium_laws(eq)
    active = list(eq.active_bidders)

    full = worst_case.sample_batch(
        rng.uniform(0.0, 1.0, size=samples), rng.uniform(0.0, 1.0, size=samples)
    )
    projected = phi_batch(full[:, active], reserve)
    support_gap = float(np.max(np.abs(phi_batch(full, reserve) - projected)))

    random_full = rng.uniform(0.0, 1.0, size=(samples, eq.instance.n))
    excess = phi_batch(random_full, reserve) - phi_batch(random_full[:, active], reserve)
    min_excess = float(np.min(excess))

    passed = support_gap <= tolerance and min_excess >= -tolerance
    return {
        "status": "passed" if passed else "failed",
        "max_support_projection_gap": support_gap,
        "min_projection_excess": min_excess,
        "strict_fraction": float(np.mean(excess > tolerance)),
    }


def verify_distribution_invariants(eq: Equilibrium) -> Dict[str, Any]:
    """
    Total masses of H, G*, F* and the marginal means of F*, integrated numerically
    """
    highest, reserve, worst_case = equilibrium_laws(eq)
    a = eq.alpha

    h_continuous, _ = integrate.quad(highest.density, a, 1.0)
    g_continuous, _ = integrate.quad(reserve.density, a, 1.0)
    mass_residuals = {
        "H": abs(highest.atom + h_continuous - 1.0),
        "G": abs(reserve.atom + g_continuous - 1.0),
        "F": worst_case.mass_residual(),
    }

    h_first_moment, _ = integrate.quad(lambda v: v * highest.density(v), a, 1.0)
    h_mean = h_first_moment + highest.atom * 1.0

    inactive = eq.inactive_means
    mean_residuals = []
    for bidder, mean in enumerate(eq.instance.means_in_original_order()):
        if bidder in inactive:
            mean_residuals.append(abs(inactive[bidder] - mean))
            continue
        theta = eq.theta_for(bidder)
        mean_residuals.append(abs((1.0 - theta) * a + theta * h_mean - mean))

    return {"mass_residuals": mass_residuals, "mean_constraint_residuals": mean_residuals}


def verify_game_value(eq: Equilibrium, run_config: RunConfig) -> Dict[str, Any]:
    """
    |discretized LP value - alpha| from the game oracle

    Returns:
        Fragment with game_value_gap and lp_value, or status "skipped" when the
        instance is beyond the oracle's size limits
    """
    from src.game_oracle import build_game, solve_minimax

    try:
        game = build_game(
            eq.instance,
            run_config.value_grid_size,
            run_config.reserve_grid_size,
            workers=run_config.workers,
            solver_options=run_config.solver_options(),
            **run_config.oracle_limits(),
        )
    except OracleSizeError as e:
        logger.warning("oracle_check_skipped", n=eq.instance.n, reason=str(e))
        return {"status": "skipped", "reason": str(e)}

    solution = solve_minimax(game)
    gap = abs(solution.game_value - eq.alpha)
    return {
        "status": "passed" if gap <= run_config.oracle_tolerance else "failed",
        "game_value_gap": gap,
        "lp_value": solution.game_value,
    }


def _guarded(
    name: str, check: Callable[[], Dict[str, Any]]
) -> Tuple[Dict[str, Any], Optional[str]]:
    try:
        return check(), None
    except (ToolkitError, LPSolverError, ArithmeticError, ValueError) as e:
        logger.error("verification_check_failed", check=name, error=str(e))
        return {}, f"{name}: {e}"


def run_full_verification(instance: AuctionInstance, run_config: RunConfig) -> VerificationReport:
    """
    Run every saddle-point check and aggregate the residuals into one report

    Sub-checks run concurrently; a failing sub-check is recorded and turns
    `passed` false instead of raising.

    Args:
        instance: Auction instance to verify
        run_config: Tolerances, sample sizes, seed and oracle switch;
            perturb_alpha shifts alpha before checking

    Returns:
        VerificationReport

    Raises:
        DomainError: perturb_alpha moves alpha out of (0, 1)
    """
    eq = compute_equilibrium(instance)
    if run_config.perturb_alpha:
        eq = eq.with_alpha(eq.alpha + run_config.perturb_alpha)
        logger.warning("alpha_perturbed", alpha=eq.alpha, delta=run_config.perturb_alpha)

    nature_seed, projection_seed = (
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(run_config.seed).spawn(2)
    )

    checks: Dict[str, Callable[[], Dict[str, Any]]] = {
        "seller": lambda: verify_seller_best_response(eq, run_config.grid_size),
        "nature": lambda: verify_nature_best_response(
            eq, run_config.samples, nature_seed, run_config.support_samples
        ),
        "projection": lambda: verify_k_projection(
            eq, run_config.support_samples, projection_seed, run_config.projection_tolerance
        ),
        "distributions": lambda: verify_distribution_invariants(eq),
    }
    if run_config.with_oracle:
        checks["oracle"] = lambda: verify_game_value(eq, run_config)

    with ThreadPoolExecutor(max_workers=run_config.workers) as pool:
        futures = {name: pool.submit(_guarded, name, check) for name, check in checks.items()}
        outcomes = {name: future.result() for name, future in futures.items()}

    fragments = {name: fragment for name, (fragment, _) in outcomes.items()}
    errors = [error for _, error in outcomes.values() if error]

    seller = fragments["seller"]
    nature = fragments["nature"]
    projection = fragments["projection"]
    invariants = fragments["distributions"]
    oracle = fragments.get("oracle", {})

    tol = run_config.analytic_tolerance
    alpha_eq_residual = abs(alpha_residual(eq.k, eq.instance.top_mean(eq.k), eq.alpha))
    report = VerificationReport(
        max_indifference_residual=seller.get("max_indifference_residual", math.inf),
        min_certificate_slack=nature.get("min_certificate_slack", -math.inf),
        max_support_gap=nature.get("max_support_gap", math.inf),
        mean_constraint_residuals=invariants.get("mean_constraint_residuals", []),
        mass_residuals=invariants.get("mass_residuals", {}),
        game_value_gap=oracle.get("game_value_gap"),
        passed=False,
        k=eq.k,
        alpha=eq.alpha,
        alpha_equation_residual=alpha_eq_residual,
        boundary_bidders=list(eq.active.boundary_bidders),
        max_excess=seller.get("max_excess", math.inf),
        projection=projection,
        details={name: fragment for name, fragment in fragments.items() if name != "projection"},
        errors=errors,
    )

    report.passed = bool(
        not errors
        and report.max_indifference_residual <= tol
        and report.max_excess <= tol
        and report.alpha_equation_residual <= tol
        and report.min_certificate_slack >= -run_config.slack_tolerance
        and report.max_support_gap <= tol
        and report.mean_constraint_residuals
        and max(report.mean_constraint_residuals) <= tol
        and report.mass_residuals
        and max(report.mass_residuals.values()) <= tol
        and projection.get("status") != "failed"
        and (report.game_value_gap is None or report.game_value_gap <= run_config.oracle_tolerance)
    )

    logger.info(
        "verification_finished",
        passed=report.passed,
        k=report.k,
        alpha=report.alpha,
        indifference=report.max_indifference_residual,
        min_slack=report.min_certificate_slack,
        errors=len(errors),
    )
    return report
