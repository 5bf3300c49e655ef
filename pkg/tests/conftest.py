import numpy as np
import pytest

from src.config import RunConfig
from src.equilibrium import AuctionInstance, compute_equilibrium


@pytest.fixture
def flagship_eq():
    """Two symmetric bidders with mean 1/2"""
    return compute_equilibrium(AuctionInstance.symmetric(0.5, 2))


@pytest.fixture
def ten_bidder_eq():
    return compute_equilibrium(AuctionInstance.symmetric(0.5, 10))


@pytest.fixture
def asymmetric_eq():
    """Three bidders where the weakest one is cut off"""
    return compute_equilibrium(AuctionInstance.from_means([0.6, 0.5, 0.1]))


@pytest.fixture
def single_buyer_eq():
    return compute_equilibrium(AuctionInstance.symmetric(0.5, 1))


@pytest.fixture
def make_run_config():
    def make(command="verify", **overrides):
        values = {"means": [0.5, 0.5], "samples": 30_000, "workers": 2}
        values.update(overrides)
        return RunConfig(command=command, **values)

    return make


def ks_distance(samples, cdf, cdf_left):
    """
    Kolmogorov-Smirnov distance between a sample and a law that may have atoms

    The supremum is taken over both one-sided limits at every distinct sample point.
    """
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    ecdf = np.cumsum(counts) / counts.sum()
    ecdf_left = np.concatenate([[0.0], ecdf[:-1]])
    right = np.abs(ecdf - np.asarray(cdf(values), dtype=float))
    left = np.abs(ecdf_left - np.asarray(cdf_left(values), dtype=float))
    return float(max(right.max(), left.max()))
