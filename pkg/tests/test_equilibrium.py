import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import lambertw

from src.equilibrium import (
    AuctionInstance,
    alpha_residual,
    compute_equilibrium,
    cutoff_k,
    lambert_w_minus1,
    selection_weights,
    solve_alpha,
    solve_alpha_closed_form,
)
from src.errors import DomainError


@pytest.mark.parametrize(
    "k, mbar, expected",
    [(2, 0.5, 0.317), (10, 0.5, 0.464), (2, 0.55, 0.366)],
)
def test_solve_alpha_known_values(k, mbar, expected):
    assert solve_alpha(k, mbar) == pytest.approx(expected, abs=1e-3)


def test_solve_alpha_tends_to_mbar_near_one():
    assert solve_alpha(3, 1.0 - 1e-9) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("k, mbar", [(0, 0.5), (2, 0.0), (2, 1.0), (2, -0.3)])
def test_solve_alpha_rejects_out_of_domain(k, mbar):
    with pytest.raises(DomainError):
        solve_alpha(k, mbar)


@given(k=st.integers(1, 50), mbar=st.floats(0.01, 0.99))
def test_alpha_below_mbar_and_solves_equation(k, mbar):
    alpha = solve_alpha(k, mbar)
    assert 0.0 < alpha < mbar
    assert abs(alpha_residual(k, mbar, alpha)) <= 1e-12


@given(k=st.integers(1, 50), mbar=st.floats(0.01, 0.99))
def test_closed_form_agrees_with_bisection(k, mbar):
    assert solve_alpha_closed_form(k, mbar) == pytest.approx(solve_alpha(k, mbar), abs=1e-9)


def test_alpha_increases_in_k_and_approaches_mbar():
    alphas = [solve_alpha(k, 0.5) for k in range(1, 201)]
    assert all(b > a for a, b in zip(alphas, alphas[1:]))
    assert 0.5 - alphas[-1] < 0.05


def test_lambert_branch_point():
    assert lambert_w_minus1(-math.exp(-1.0)) == pytest.approx(-1.0, abs=1e-6)


def test_lambert_known_value():
    assert lambert_w_minus1(-2.0 * math.exp(-2.0)) == pytest.approx(-2.0, abs=1e-12)


def test_lambert_back_substitution():
    w = lambert_w_minus1(-0.1)
    assert w <= -1.0
    assert w * math.exp(w) == pytest.approx(-0.1, abs=1e-12)


@settings(max_examples=200)
@given(x=st.floats(-0.36, -1e-12))
def test_lambert_matches_scipy(x):
    assert lambert_w_minus1(x) == pytest.approx(lambertw(x, -1).real, rel=1e-9)


@pytest.mark.parametrize("x", [0.0, 0.1, -0.5, float("nan")])
def test_lambert_rejects_outside_branch(x):
    with pytest.raises(DomainError):
        lambert_w_minus1(x)


def test_cutoff_drops_weak_bidder():
    active = cutoff_k(AuctionInstance.from_means([0.6, 0.5, 0.1]))
    assert active.k == 2
    assert active.alpha == pytest.approx(0.366, abs=1e-3)
    assert active.mbar_k == pytest.approx(0.55)


def test_cutoff_symmetric_keeps_everyone():
    for n in (1, 2, 5, 20):
        assert cutoff_k(AuctionInstance.symmetric(0.4, n)).k == n


def test_cutoff_single_active_bidder():
    active = cutoff_k(AuctionInstance.from_means([0.9, 0.01]))
    assert active.k == 1
    assert 0.01 <= active.alpha


def test_active_set_invariants(asymmetric_eq):
    means = asymmetric_eq.instance.means
    k = asymmetric_eq.k
    assert all(m > asymmetric_eq.alpha for m in means[:k])
    assert all(m <= asymmetric_eq.alpha for m in means[k:])


def test_flagship_equilibrium(flagship_eq):
    assert flagship_eq.k == 2
    assert flagship_eq.alpha == pytest.approx(0.317, abs=1e-3)
    assert flagship_eq.thetas == pytest.approx((0.5, 0.5))
    assert flagship_eq.revenue == flagship_eq.alpha


def test_asymmetric_thetas(asymmetric_eq):
    assert asymmetric_eq.thetas[0] == pytest.approx(0.636, abs=1e-3)
    assert asymmetric_eq.thetas[1] == pytest.approx(0.364, abs=1e-3)
    assert math.fsum(asymmetric_eq.thetas) == pytest.approx(1.0, abs=1e-9)


def test_single_buyer(single_buyer_eq):
    assert single_buyer_eq.k == 1
    assert single_buyer_eq.thetas == pytest.approx((1.0,))
    alpha = single_buyer_eq.alpha
    assert alpha * (1.0 - math.log(alpha)) == pytest.approx(0.5, abs=1e-12)


def test_theta_for_uses_original_indices():
    eq = compute_equilibrium(AuctionInstance.from_means([0.1, 0.5, 0.6]))
    assert eq.k == 2
    assert eq.theta_for(2) == pytest.approx(0.636, abs=1e-3)
    assert eq.theta_for(1) == pytest.approx(0.364, abs=1e-3)
    assert eq.theta_for(0) == 0.0
    with pytest.raises(DomainError):
        eq.theta_for(3)


@given(means=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8), seed=st.integers(0, 1000))
def test_equilibrium_ignores_bidder_order(means, seed):
    shuffled = list(np.random.default_rng(seed).permutation(means))
    first = compute_equilibrium(AuctionInstance.from_means(means))
    second = compute_equilibrium(AuctionInstance.from_means(shuffled))
    assert first.k == second.k
    assert first.alpha == second.alpha
    assert sorted(first.thetas) == pytest.approx(sorted(second.thetas), abs=1e-12)
    assert sorted(first.instance.means_in_original_order()) == sorted(shuffled)


@given(means=st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8))
def test_thetas_sum_to_one(means):
    eq = compute_equilibrium(AuctionInstance.from_means(means))
    assert all(t > 0.0 or eq.active.boundary_bidders for t in eq.thetas)
    assert math.fsum(eq.thetas) == pytest.approx(1.0, abs=1e-9)


def test_with_alpha_recomputes_weights(flagship_eq):
    shifted = flagship_eq.with_alpha(flagship_eq.alpha + 0.01)
    assert shifted.k == flagship_eq.k
    assert shifted.thetas == pytest.approx(
        selection_weights(flagship_eq.instance.means[:2], flagship_eq.alpha + 0.01)
    )
    assert abs(math.fsum(shifted.thetas) - 1.0) > 1e-3


@pytest.mark.parametrize("delta", [-0.4, -0.32, 0.7, float("nan")])
def test_with_alpha_rejects_shift_outside_unit_interval(flagship_eq, delta):
    with pytest.raises(DomainError):
        flagship_eq.with_alpha(flagship_eq.alpha + delta)


def test_with_alpha_rejects_one(flagship_eq):
    with pytest.raises(DomainError):
        flagship_eq.with_alpha(1.0)


@pytest.mark.parametrize("means", [[], [0.5, 1.2], [0.0], [0.5, float("nan")]])
def test_instance_rejects_bad_means(means):
    with pytest.raises(DomainError):
        AuctionInstance.from_means(means)


def test_instance_keeps_original_order():
    instance = AuctionInstance.from_means([0.2, 0.7, 0.4])
    assert instance.means == (0.7, 0.4, 0.2)
    assert instance.means_in_original_order() == [0.2, 0.7, 0.4]
