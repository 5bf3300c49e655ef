import numpy as np
import pytest

from src.distributions import ReserveDist
from src.equilibrium import AuctionInstance, compute_equilibrium, solve_alpha
from src.errors import DomainError, IterationLimitError, OracleSizeError
from src.game_oracle import (
    build_game,
    complementary_slackness_gap,
    convergence_table,
    discretize_reserve_law,
    duality_sandwich,
    nature_best_response,
    pure_reserve_guarantees,
    solve_minimax,
)

FLAGSHIP = AuctionInstance.symmetric(0.5, 2)


@pytest.fixture(scope="module")
def flagship_game():
    return build_game(FLAGSHIP, 51, 51)


@pytest.fixture(scope="module")
def flagship_solution(flagship_game):
    return solve_minimax(flagship_game)


def test_game_size_without_alpha():
    game = build_game(FLAGSHIP, 51, 51, inject_alpha=False)
    assert game.payoff.shape == (2601, 51)
    assert game.alpha is None


def test_game_injects_alpha(flagship_game):
    alpha = compute_equilibrium(FLAGSHIP).alpha
    assert flagship_game.payoff.shape == (52 * 52, 52)
    assert alpha in flagship_game.value_grid
    assert alpha in flagship_game.reserve_grid
    assert flagship_game.value_grid[0] == 0.0 and flagship_game.value_grid[-1] == 1.0


def test_payoff_uses_strict_sale_rule(flagship_game):
    payoff = flagship_game.payoff
    assert payoff.min() >= 0.0 and payoff.max() <= 1.0
    profiles = flagship_game.profiles
    reserves = flagship_game.reserve_grid
    ones = np.flatnonzero((profiles == 1.0).all(axis=1))[0]
    # Reserve 1 never sells, even at value 1
    assert payoff[ones, -1] == 0.0
    assert payoff[ones, 0] == 1.0
    mixed = np.flatnonzero((profiles[:, 0] == 1.0) & (profiles[:, 1] == 0.0))[0]
    middle = np.flatnonzero(np.isclose(reserves, 0.5))[0]
    assert payoff[mixed, middle] == pytest.approx(0.5)


def test_game_size_guards():
    with pytest.raises(OracleSizeError):
        build_game(AuctionInstance.symmetric(0.5, 4), 5, 5)
    with pytest.raises(DomainError):
        build_game(FLAGSHIP, 1, 5)


def test_corner_grid_value_is_zero():
    game = build_game(FLAGSHIP, 2, 2, inject_alpha=False)
    assert game.num_profiles == 4
    solution = solve_minimax(game)
    # Nature splits mass between (1, 0) and (0, 1): no second bid, no sale at reserve 1
    assert solution.game_value == pytest.approx(0.0, abs=1e-12)
    assert solution.seller_mixture.sum() == pytest.approx(1.0)


def test_nature_response_to_zero_reserve(flagship_game):
    pure = np.zeros(flagship_game.reserve_grid.size)
    pure[0] = 1.0
    distribution, value = nature_best_response(flagship_game, pure)
    assert value == pytest.approx(0.0, abs=1e-12)
    assert distribution.sum() == pytest.approx(1.0)
    assert flagship_game.profiles.T @ distribution == pytest.approx([0.5, 0.5])


def test_nature_response_rejects_bad_mixture(flagship_game):
    with pytest.raises(DomainError):
        nature_best_response(flagship_game, np.ones(3))


def test_flagship_value_near_alpha(flagship_solution):
    alpha = compute_equilibrium(FLAGSHIP).alpha
    assert flagship_solution.game_value == pytest.approx(alpha, abs=0.02)
    assert np.all(flagship_solution.seller_mixture >= 0.0)
    assert flagship_solution.seller_mixture.sum() == pytest.approx(1.0)
    assert flagship_solution.primal_residual <= 1e-9


def test_dual_certificate_is_feasible(flagship_game, flagship_solution):
    expected = flagship_game.payoff @ flagship_solution.seller_mixture
    affine = flagship_game.profiles @ flagship_solution.dual_gamma + flagship_solution.dual_eta
    assert np.all(affine <= expected + 1e-7)


def test_complementary_slackness(flagship_game, flagship_solution):
    assert complementary_slackness_gap(flagship_game, flagship_solution) <= 1e-6


def test_duality_sandwich(flagship_game, flagship_solution):
    reserve = ReserveDist(flagship_game.alpha, 2)
    discretized = discretize_reserve_law(flagship_game, reserve)
    assert discretized.sum() == pytest.approx(1.0)
    lower, value, upper = duality_sandwich(flagship_game, flagship_solution, discretized)
    assert lower <= value + 1e-9
    assert value <= upper + 1e-9


def test_pure_reserves_guarantee_less_than_value():
    game = build_game(FLAGSHIP, 11, 11)
    solution = solve_minimax(game)
    guarantees = pure_reserve_guarantees(game)
    assert guarantees.shape == game.reserve_grid.shape
    assert guarantees.max() <= solution.game_value + 1e-9


def test_single_buyer_value():
    game = build_game(AuctionInstance.symmetric(0.5, 1), 51, 51)
    assert solve_minimax(game).game_value == pytest.approx(solve_alpha(1, 0.5), abs=0.02)


def test_solution_record(flagship_game, flagship_solution):
    record = flagship_solution.to_dict(flagship_game)
    assert record["nature_support"]
    assert len(record["dual_gamma"]) == 2
    assert sum(entry["mass"] for entry in record["nature_support"]) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.slow
def test_fine_grid_matches_alpha_and_certificate():
    eq = compute_equilibrium(FLAGSHIP)
    solution = solve_minimax(build_game(FLAGSHIP, 101, 101))
    assert solution.game_value == pytest.approx(eq.alpha, abs=0.01)
    assert solution.dual_gamma == pytest.approx([1.0 / eq.log_scale] * 2, abs=0.05)
    # eta = value - gamma.m, so its error is bounded by the value and gamma errors
    assert solution.dual_eta == pytest.approx(-eq.alpha / eq.log_scale, abs=0.06)


@pytest.mark.slow
def test_single_buyer_fine_grid():
    game = build_game(AuctionInstance.symmetric(0.5, 1), 101, 101)
    assert solve_minimax(game).game_value == pytest.approx(solve_alpha(1, 0.5), abs=0.01)


@pytest.mark.slow
def test_convergence_table():
    rows = convergence_table(FLAGSHIP, [26, 51, 101])
    errors = [row["error"] for row in rows]
    assert [row["grid_size"] for row in rows] == [26, 51, 101]
    assert errors[-1] <= 0.01
    assert all(finer <= coarser + 1e-9 for coarser, finer in zip(errors, errors[1:]))


def test_value_equals_dual_objective(flagship_game, flagship_solution):
    means = np.asarray(flagship_game.means)
    dual_objective = flagship_solution.dual_gamma @ means + flagship_solution.dual_eta
    assert flagship_solution.game_value == pytest.approx(dual_objective, abs=1e-7)


def test_size_guards_can_be_raised():
    game = build_game(AuctionInstance.symmetric(0.5, 4), 3, 3, max_bidders=4, max_profiles=300)
    assert game.num_profiles == 4 ** 4
    with pytest.raises(OracleSizeError):
        build_game(FLAGSHIP, 51, 51, max_profiles=100)


def test_solver_options_stay_with_the_game():
    game = build_game(FLAGSHIP, 5, 5, solver_options={"max_iterations": 0, "pivot_rule": "bland"})
    with pytest.raises(IterationLimitError):
        solve_minimax(game)
    pure = np.zeros(game.reserve_grid.size)
    pure[0] = 1.0
    with pytest.raises(IterationLimitError):
        nature_best_response(game, pure)
