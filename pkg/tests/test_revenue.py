import numpy as np
import pytest

from src.distributions import ReserveDist, ValueProfile, WorstCaseDist
from src.errors import DomainError
from src.revenue import (
    AffineCertificate,
    InterimAllocation,
    certificate,
    competitive_mechanism_revenue,
    counterexample_allocation,
    counterexample_revenue,
    eta,
    eta_batch,
    phi,
    phi_batch,
    psi_closed_form,
    top_two,
    virtual_value,
)
from src.simulate import SimConfig, estimate_psi, reserve_sampler


def test_phi_with_equal_top_values(flagship_eq):
    g = ReserveDist(flagship_eq.alpha, 2)
    a = flagship_eq.alpha
    assert phi(ValueProfile.of(a, a), g) == pytest.approx(a * g.atom)


def test_phi_equals_certificate_on_support(flagship_eq):
    g = ReserveDist(flagship_eq.alpha, 2)
    cert = certificate(flagship_eq)
    a = flagship_eq.alpha
    for x in np.linspace(a, 1.0, 50):
        profile = ValueProfile.of(float(x), a)
        assert phi(profile, g) == pytest.approx(cert.evaluate(profile), abs=1e-12)


def test_phi_single_bidder_pays_reserve_only(single_buyer_eq):
    g = ReserveDist(single_buyer_eq.alpha, 1)
    a = single_buyer_eq.alpha
    assert phi(ValueProfile.of(1.0), g) == pytest.approx((1.0 - a) / g.scale)
    assert phi(ValueProfile.of(a / 2), g) == 0.0


def test_phi_batch_matches_monte_carlo(flagship_eq):
    g = ReserveDist(flagship_eq.alpha, 2)
    rng = np.random.default_rng(7)
    profiles = rng.random((5, 2))
    closed = phi_batch(profiles, g)
    for row, expected in zip(profiles, closed):
        fixed = np.tile(row, (1, 1))
        mean, stderr = estimate_psi(
            lambda r, size, fixed=fixed: np.repeat(fixed, size, axis=0),
            reserve_sampler(flagship_eq),
            SimConfig(trials=200_000, seed=1, parallel_streams=2),
        )
        assert abs(mean - expected) <= 4 * stderr + 1e-12


def test_top_two():
    v1, v2 = top_two(np.array([[0.1, 0.9, 0.5], [0.3, 0.3, 0.2]]))
    assert v1.tolist() == [0.9, 0.3]
    assert v2.tolist() == [0.5, 0.3]
    single_v1, single_v2 = top_two(np.array([[0.4]]))
    assert single_v1.tolist() == [0.4]
    assert single_v2.tolist() == [0.0]


def test_eta_examples(flagship_eq):
    d = WorstCaseDist(flagship_eq)
    a = flagship_eq.alpha
    assert eta(0.0, d) == pytest.approx(a)
    assert eta(0.7, d) == pytest.approx(a, abs=1e-12)
    assert eta(1.0, d) == 0.0
    assert eta(a, d) == pytest.approx(a)


def test_eta_constant_on_reserve_grid(ten_bidder_eq):
    d = WorstCaseDist(ten_bidder_eq)
    grid = np.linspace(0.0, 1.0, 10_000, endpoint=False)
    assert np.max(np.abs(eta_batch(grid, d) - ten_bidder_eq.alpha)) <= 1e-10


def test_eta_rejects_reserves_outside_unit_interval(flagship_eq):
    with pytest.raises(DomainError):
        eta(1.5, WorstCaseDist(flagship_eq))


def test_psi_is_alpha(flagship_eq):
    assert psi_closed_form(flagship_eq) == pytest.approx(0.317, abs=1e-3)


def test_certificate_coefficients(flagship_eq):
    cert = certificate(flagship_eq)
    assert cert.coeffs == pytest.approx((0.4654, 0.4654), abs=1e-3)
    assert cert.intercept == pytest.approx(-flagship_eq.alpha * cert.coeffs[0])
    with pytest.raises(DomainError):
        AffineCertificate(coeffs=(0.5, 0.0), intercept=0.0)


def test_certificate_below_phi_at_zero_and_one(flagship_eq):
    g = ReserveDist(flagship_eq.alpha, 2)
    cert = certificate(flagship_eq)
    zeros = ValueProfile.of(0.0, 0.0)
    ones = ValueProfile.of(1.0, 1.0)
    assert cert.evaluate(zeros) < 0.0 == phi(zeros, g)
    assert phi(ones, g) >= cert.evaluate(ones)


def test_virtual_value_is_square():
    for alpha in (0.2, 0.317, 0.45):
        for v in np.linspace(alpha + 1e-3, 0.999, 200):
            assert virtual_value(float(v), alpha) == pytest.approx(v * v, abs=1e-12)
    assert virtual_value(0.5, 0.317) == pytest.approx(0.25, abs=1e-12)


def test_competitive_mechanism_revenue(flagship_eq):
    second_price = InterimAllocation.uniform(2, 1.0, 0.0)
    nothing = InterimAllocation.uniform(2, 0.0, 0.0)
    assert competitive_mechanism_revenue(flagship_eq, second_price) == pytest.approx(
        flagship_eq.alpha, abs=1e-12
    )
    assert competitive_mechanism_revenue(flagship_eq, nothing) == 0.0


def test_counterexample_beats_auction(flagship_eq):
    a = flagship_eq.alpha
    revenue = competitive_mechanism_revenue(flagship_eq, counterexample_allocation(flagship_eq))
    assert revenue == pytest.approx(counterexample_revenue(a), abs=1e-12)
    assert revenue > a
    assert counterexample_revenue(a) == pytest.approx(0.534, abs=2e-3)
    assert counterexample_revenue(0.5) == pytest.approx(0.75)


def test_counterexample_needs_two_active_bidders(ten_bidder_eq):
    with pytest.raises(DomainError):
        counterexample_allocation(ten_bidder_eq)


def test_interim_allocation_validation():
    with pytest.raises(DomainError):
        InterimAllocation(x_at_one=(1.2,), x_at_alpha=(0.0,))
    with pytest.raises(DomainError):
        InterimAllocation(x_at_one=(1.0, 1.0), x_at_alpha=(0.0,))
