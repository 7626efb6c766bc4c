import math

import numpy as np
import pytest

from zdq.beliefs import GridBelief
from zdq.sources import (
    DensityBounds,
    FiniteChain,
    LinearGaussianSource,
    density_bounds,
    invariant_distribution,
    sample_next,
    transition_density,
)

PHI0 = 1.0 / math.sqrt(2.0 * math.pi)  # standard normal peak


def test_gaussian_validation():
    LinearGaussianSource(0.5, 1.0)
    LinearGaussianSource(-1.5, 0.0)  # deterministic maps are representable
    with pytest.raises(ValueError):
        LinearGaussianSource(0.5, -1.0)
    with pytest.raises(ValueError):
        LinearGaussianSource(math.nan, 1.0)


def test_stationary_std():
    assert LinearGaussianSource(0.0, 1.0).stationary_std == 1.0
    src = LinearGaussianSource(0.5, 1.0)
    assert abs(src.stationary_std - 1.0 / math.sqrt(0.75)) < 1e-15
    with pytest.raises(ValueError):
        _ = LinearGaussianSource(1.0, 1.0).stationary_std


def test_transition_density_values(ar_source):
    # peak: z exactly at a*x
    assert abs(transition_density(ar_source, 0.25, 0.5) - PHI0) < 1e-12
    wide = LinearGaussianSource(0.5, 2.0)
    assert abs(transition_density(wide, 0.25, 0.5) - PHI0 / 2.0) < 1e-12
    # symmetric about the conditional mean a*x
    assert abs(
        transition_density(ar_source, 0.25 - 0.7, 0.5)
        - transition_density(ar_source, 0.25 + 0.7, 0.5)
    ) < 1e-15


def test_transition_density_requires_noise():
    src = LinearGaussianSource(0.5, 0.0)
    with pytest.raises(ValueError):
        transition_density(src, 0.0, 0.0)


def test_chain_validation():
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.5, 0.6], [0.2, 0.8]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        FiniteChain(np.array([[1.1, -0.1], [0.2, 0.8]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.9, 0.1], [0.2, 0.8]]), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        FiniteChain(
            np.array([[0.9, 0.1], [0.2, 0.8]]),
            np.array([0.5, 0.5]),
            np.array([1.0, 2.0, 3.0]),
        )


def test_chain_defaults(two_state_chain):
    assert two_state_chain.n_states == 2
    assert np.array_equal(two_state_chain.state_values, [0.0, 1.0])


def test_sample_next_gaussian_deterministic():
    src = LinearGaussianSource(-0.8, 0.0)
    rng = np.random.default_rng(0)
    assert sample_next(src, 2.0, rng) == -1.6


def test_sample_next_gaussian_moments(ar_source):
    rng = np.random.default_rng(1)
    draws = np.array([sample_next(ar_source, 1.0, rng) for _ in range(4000)])
    assert abs(draws.mean() - 0.5) < 0.05
    assert abs(draws.std() - 1.0) < 0.05


def test_sample_next_finite_respects_support():
    chain = FiniteChain(np.eye(2), np.array([0.5, 0.5]))
    rng = np.random.default_rng(2)
    assert all(sample_next(chain, 1, rng) == 1 for _ in range(20))


def test_sample_next_finite_frequencies(two_state_chain):
    rng = np.random.default_rng(3)
    draws = np.array([sample_next(two_state_chain, 0, rng) for _ in range(5000)])
    assert abs(draws.mean() - 0.1) < 0.02


def test_invariant_two_state(two_state_chain):
    pi = invariant_distribution(two_state_chain)
    assert np.max(np.abs(pi.probabilities - [2 / 3, 1 / 3])) < 1e-12
    # fixed point of the transition
    pushed = pi.probabilities @ two_state_chain.transition
    assert np.max(np.abs(pushed - pi.probabilities)) < 1e-12


def test_invariant_rejects_degenerate_chains():
    with pytest.raises(ValueError):
        invariant_distribution(FiniteChain(np.eye(2), np.array([0.5, 0.5])))
    flip = FiniteChain(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        invariant_distribution(flip)


def test_invariant_gaussian(ar_source):
    pi = invariant_distribution(ar_source)
    assert isinstance(pi, GridBelief)
    assert abs(pi.std - ar_source.stationary_std) < 1e-3
    assert abs(pi.mean) < 1e-12
    with pytest.raises(ValueError):
        invariant_distribution(LinearGaussianSource(1.01, 1.0))


def test_density_bounds_std_normal(iid_source):
    b = density_bounds(iid_source)
    assert isinstance(b, DensityBounds)
    assert abs(b.sup_density - PHI0) < 1e-12
    # max |d/dz phi| is attained at z = 1: phi(1)
    phi1 = PHI0 * math.exp(-0.5)
    assert abs(b.slope_bound - phi1) < 1e-9


def test_density_bounds_scaling():
    b = density_bounds(LinearGaussianSource(0.3, 2.0))
    assert abs(b.sup_density - PHI0 / 2.0) < 1e-12
    phi1 = PHI0 * math.exp(-0.5)
    assert abs(b.slope_bound - phi1 / 4.0) < 1e-9
