import json

import pytest

from src.equilibrium import AuctionInstance, compute_equilibrium
from src.verify import (
    run_full_verification,
    verify_distribution_invariants,
    verify_k_projection,
    verify_nature_best_response,
    verify_seller_best_response,
)


def test_seller_indifference_flagship(flagship_eq):
    result = verify_seller_best_response(flagship_eq, grid_size=10_000)
    assert result["max_indifference_residual"] <= 1e-10
    assert result["max_excess"] <= 1e-10
    assert result["grid_points"] == 10_001


def test_seller_indifference_single_buyer(single_buyer_eq):
    result = verify_seller_best_response(single_buyer_eq, grid_size=1_000)
    assert result["max_indifference_residual"] <= 1e-10
    # Below alpha a lone buyer only pays the reserve itself
    assert result["max_excess"] <= 1e-10


def test_seller_check_rejects_tiny_grid(flagship_eq):
    with pytest.raises(ValueError):
        verify_seller_best_response(flagship_eq, grid_size=1)


@pytest.mark.parametrize("fixture", ["flagship_eq", "ten_bidder_eq", "asymmetric_eq"])
def test_certificate_holds(fixture, request):
    eq = request.getfixturevalue(fixture)
    result = verify_nature_best_response(eq, samples=20_000, seed=1)
    assert result["min_certificate_slack"] >= -1e-9
    assert result["max_support_gap"] <= 1e-9
    assert result["case_slacks"]["extremes"] >= 0.0


def test_certificate_cases_for_single_bidder(single_buyer_eq):
    result = verify_nature_best_response(single_buyer_eq, samples=3_000, seed=2)
    assert "two_above_alpha" not in result["case_slacks"]
    assert result["min_certificate_slack"] >= -1e-9


def test_projection_skipped_when_everyone_active(flagship_eq):
    assert verify_k_projection(flagship_eq, samples=100)["status"] == "skipped"


def test_projection_passes_with_cut_bidder(asymmetric_eq):
    result = verify_k_projection(asymmetric_eq, samples=5_000, seed=3)
    assert result["status"] == "passed"
    assert result["max_support_projection_gap"] == 0.0
    assert result["min_projection_excess"] >= -1e-12
    assert result["strict_fraction"] > 0.0


def test_distribution_invariants(asymmetric_eq):
    result = verify_distribution_invariants(asymmetric_eq)
    assert max(result["mass_residuals"].values()) <= 1e-9
    assert len(result["mean_constraint_residuals"]) == 3
    assert max(result["mean_constraint_residuals"]) <= 1e-9


@pytest.mark.parametrize("means", [[0.5, 0.5], [0.5] * 10, [0.6, 0.5, 0.1], [0.9, 0.01]])
def test_full_verification_passes(means, make_run_config):
    report = run_full_verification(AuctionInstance.from_means(means), make_run_config(means=means))
    assert report.passed, report.errors
    assert report.max_indifference_residual <= 1e-10
    assert report.alpha_equation_residual <= 1e-12
    assert not report.errors


def test_full_verification_reports_cutoff(make_run_config):
    means = [0.6, 0.5, 0.1]
    report = run_full_verification(AuctionInstance.from_means(means), make_run_config(means=means))
    assert report.k == 2
    assert report.alpha == pytest.approx(0.366, abs=1e-3)
    assert report.projection["status"] == "passed"


def test_perturbed_alpha_fails(make_run_config):
    run_config = make_run_config(perturb_alpha=0.01)
    report = run_full_verification(AuctionInstance.symmetric(0.5, 2), run_config)
    assert not report.passed
    assert report.max_indifference_residual == pytest.approx(0.01, abs=1e-6)
    assert report.mass_residuals["F"] > 1e-3


def test_report_json_is_stamped(make_run_config):
    report = run_full_verification(AuctionInstance.symmetric(0.5, 2), make_run_config())
    payload = json.loads(report.to_json(config_hash="abc"))
    assert payload["config_hash"] == "abc"
    assert payload["passed"] is True
    assert payload["game_value_gap"] is None
    assert set(payload["mass_residuals"]) == {"H", "G", "F"}


@pytest.mark.slow
def test_full_verification_with_oracle(make_run_config):
    run_config = make_run_config(with_oracle=True, value_grid_size=51, reserve_grid_size=51)
    report = run_full_verification(AuctionInstance.symmetric(0.5, 2), run_config)
    assert report.game_value_gap is not None
    assert report.game_value_gap <= 0.02


def test_equilibrium_of_verified_instance_is_unchanged():
    eq = compute_equilibrium(AuctionInstance.symmetric(0.5, 2))
    assert verify_seller_best_response(eq, 100)["reference_alpha"] == eq.alpha


def test_stratified_sample_is_never_rounded_down(flagship_eq, single_buyer_eq):
    assert verify_nature_best_response(flagship_eq, 1_000, seed=4)["stratified_profiles"] >= 1_000
    result = verify_nature_best_response(single_buyer_eq, 1_001, seed=4)
    assert result["stratified_profiles"] >= 1_001


def test_oracle_check_skipped_beyond_size_limit(make_run_config):
    means = [0.5] * 4
    run_config = make_run_config(
        means=means, samples=3_000, with_oracle=True, value_grid_size=5, reserve_grid_size=5
    )
    report = run_full_verification(AuctionInstance.from_means(means), run_config)
    assert report.passed, report.errors
    assert report.details["oracle"]["status"] == "skipped"
    assert report.game_value_gap is None


def test_oracle_check_uses_run_limits(make_run_config):
    run_config = make_run_config(
        with_oracle=True, value_grid_size=11, reserve_grid_size=11, max_profiles=10
    )
    report = run_full_verification(AuctionInstance.symmetric(0.5, 2), run_config)
    assert report.details["oracle"]["status"] == "skipped"


@pytest.mark.slow
@pytest.mark.parametrize("means", [[0.5, 0.5], [0.6, 0.5, 0.1]])
def test_certificate_over_full_stratified_sample(means):
    eq = compute_equilibrium(AuctionInstance.from_means(means))
    result = verify_nature_best_response(eq, samples=100_000, seed=5, support_samples=1_000)
    assert result["stratified_profiles"] >= 100_000
    assert result["min_certificate_slack"] >= -1e-10
    assert result["max_support_gap"] <= 1e-10
