import math

import numpy as np
import pytest

from zdq.beliefs import (
    Grid,
    GridBelief,
    SimplexBelief,
    ZeroMassSymbolError,
    check_S_membership,
    default_grid,
    filter_update,
    moment,
    predict,
    tv_distance,
    window_weights,
)
from zdq.quantizers import FinitePartition, IntervalQuantizer, cell_mass
from zdq.sources import FiniteChain, LinearGaussianSource, density_bounds


def std_normal_belief(n_points=801, span=8.0):
    grid = Grid(-span, span, n_points)
    return GridBelief.normal(grid, 0.0, 1.0)


# ---------------------------------------------------------------------------
# grids and window weights


def test_grid_basics():
    g = Grid(-2.0, 2.0, 17)
    assert g.spacing == 0.25
    assert g.nodes[0] == -2.0 and g.nodes[-1] == 2.0
    assert abs(g.trapezoid_weights.sum() - 4.0) < 1e-12
    with pytest.raises(ValueError):
        Grid(1.0, -1.0, 17)
    with pytest.raises(ValueError):
        Grid(-1.0, 1.0, 2)


def test_default_grid_span(ar_source):
    g = default_grid(ar_source)
    assert abs(g.hi - 8.0 * ar_source.stationary_std) < 1e-12
    assert g.lo == -g.hi


def test_window_weights_full_range_is_trapezoid():
    g = Grid(-1.0, 3.0, 33)
    w = window_weights(g, -np.inf, np.inf, degree=0)
    assert np.max(np.abs(w - g.trapezoid_weights)) < 1e-15


def test_window_weights_exact_on_piecewise_linear():
    # reference: dense trapezoid on the interpolant, which converges to
    # the exact piecewise-linear integral
    rng = np.random.default_rng(4)
    g = Grid(-2.0, 2.0, 21)
    vals = rng.uniform(0.2, 1.0, g.n_points)
    lo, hi = -1.37, 0.83  # cuts interior segments
    fine = np.linspace(lo, hi, 400001)
    interp = np.interp(fine, g.nodes, vals)
    for degree in (0, 1, 2):
        w = window_weights(g, lo, hi, degree)
        got = float(w @ vals)
        ref = float(np.trapezoid(interp * fine**degree, fine))
        assert abs(got - ref) < 5e-9, (degree, got, ref)


def test_window_weights_splits_boundary_segment():
    # integrating half a segment must not round to whole nodes
    g = Grid(0.0, 1.0, 17)
    vals = np.ones(g.n_points)
    w = window_weights(g, 0.0, g.spacing / 2, degree=0)
    assert abs(w @ vals - g.spacing / 2) < 1e-15


def test_window_weights_empty_window():
    g = Grid(0.0, 1.0, 17)
    w = window_weights(g, 0.7, 0.7, degree=0)
    assert np.all(w == 0.0)


# ---------------------------------------------------------------------------
# belief containers


def test_grid_belief_normalization_and_validation():
    g = Grid(-8.0, 8.0, 101)
    b = GridBelief.from_unnormalized(g, np.exp(-0.5 * g.nodes**2))
    assert abs(float(np.trapezoid(b.values, g.nodes)) - 1.0) < 1e-9
    with pytest.raises(ValueError):
        GridBelief(g, -np.ones(g.n_points))
    with pytest.raises(ValueError):
        GridBelief(g, np.ones(g.n_points))  # integrates to 16, not 1


def test_grid_belief_moments():
    b = std_normal_belief()
    assert abs(b.mean) < 1e-12
    assert abs(b.std - 1.0) < 1e-3
    assert abs(moment(b, 1)) < 1e-12
    assert abs(moment(b, 2) - 1.0) < 1e-3


def test_grid_belief_point_mass():
    g = Grid(-4.0, 4.0, 161)
    b = GridBelief.point_mass(g, 1.0)
    assert abs(b.mean - 1.0) < 1e-9
    assert b.std < g.spacing


def test_grid_belief_keys_differ():
    b1 = std_normal_belief()
    b2 = std_normal_belief()
    assert b1.key() == b2.key()
    g = b1.grid
    b3 = GridBelief.normal(g, 0.1, 1.0)
    assert b1.key() != b3.key()


def test_grid_belief_sampling():
    b = std_normal_belief()
    rng = np.random.default_rng(5)
    draws = np.array([b.sample(rng) for _ in range(4000)])
    assert abs(draws.mean()) < 0.06
    assert abs(draws.std() - 1.0) < 0.06


def test_simplex_belief_validation_and_stats():
    b = SimplexBelief(np.array([0.25, 0.75]), states=np.array([-1.0, 1.0]))
    assert abs(b.mean - 0.5) < 1e-15
    assert abs(b.std - math.sqrt(1.0 - 0.25)) < 1e-15
    with pytest.raises(ValueError):
        SimplexBelief(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        SimplexBelief(np.array([-0.1, 1.1]))


def test_simplex_belief_sampling():
    b = SimplexBelief(np.array([0.3, 0.7]))
    rng = np.random.default_rng(6)
    draws = np.array([b.sample(rng) for _ in range(5000)])
    assert abs(draws.mean() - 0.7) < 0.02


# ---------------------------------------------------------------------------
# filtering


def test_filter_update_no_information_is_prediction(two_state_chain):
    # one-cell quantizer conveys nothing: posterior = prior pushed by P
    b = SimplexBelief(np.array([0.5, 0.5]))
    blind = FinitePartition((1, 1), 1)
    out = filter_update(b, two_state_chain, blind, 1)
    assert np.max(np.abs(out.probabilities - [0.55, 0.45])) < 1e-12


def test_filter_update_identity_conditioning():
    chain = FiniteChain(np.eye(2), np.array([0.5, 0.5]))
    b = SimplexBelief(np.array([0.5, 0.5]))
    sep = FinitePartition((1, 2), 2)
    out = filter_update(b, chain, sep, 1)
    assert np.max(np.abs(out.probabilities - [1.0, 0.0])) < 1e-15


def test_filter_update_matches_hand_bayes(three_state_chain):
    b = SimplexBelief(np.array([0.2, 0.5, 0.3]), states=three_state_chain.state_values)
    part = FinitePartition((1, 2, 1), 2)
    out = filter_update(b, three_state_chain, part, 1)
    mass = 0.2 + 0.3
    post = np.array([0.2, 0.0, 0.3]) / mass
    expected = post @ three_state_chain.transition
    assert np.max(np.abs(out.probabilities - expected)) < 1e-15


def test_filter_update_iid_forgets_everything(iid_source):
    b = GridBelief.normal(default_grid(iid_source), 1.5, 0.7)
    q = IntervalQuantizer((0.0,))
    out = filter_update(b, iid_source, q, 2)
    target = GridBelief.normal(b.grid, 0.0, 1.0)
    assert tv_distance(out, target) < 1e-12


def test_filter_update_zero_mass_symbol_raises(two_state_chain):
    b = SimplexBelief(np.array([1.0, 0.0]))
    sep = FinitePartition((1, 2), 2)
    with pytest.raises(ZeroMassSymbolError):
        filter_update(b, two_state_chain, sep, 2)


def test_filter_law_of_total_probability(ar_source):
    b = GridBelief.normal(default_grid(ar_source), 0.3, 1.1)
    q = IntervalQuantizer((-0.5, 0.8))
    pred = predict(b, ar_source)
    mix = np.zeros_like(pred.values)
    for m in (1, 2, 3):
        mass = cell_mass(b, q, m)
        mix += mass * filter_update(b, ar_source, q, m).values
    assert float(np.trapezoid(np.abs(mix - pred.values), b.grid.nodes)) < 1e-12


def test_predict_point_mass(ar_source):
    # the spike snaps to the nearest node, so compare against the law
    # pushed through from the snapped belief, not from x0 itself
    g = default_grid(ar_source)
    b = GridBelief.point_mass(g, 2.0)
    out = predict(b, ar_source)
    a, s = ar_source.a, ar_source.noise_std
    want_mean = a * b.mean
    want_std = math.sqrt(s * s + (a * b.std) ** 2)
    assert abs(out.mean - want_mean) < 2e-4
    assert abs(out.std - want_std) < 2e-4


def test_predict_identity_chain():
    chain = FiniteChain(np.eye(3), np.array([0.2, 0.3, 0.5]))
    b = SimplexBelief(np.array([0.2, 0.3, 0.5]))
    out = predict(b, chain)
    assert np.max(np.abs(out.probabilities - b.probabilities)) < 1e-15


# ---------------------------------------------------------------------------
# distances and diagnostics


def test_tv_distance_simplex():
    b1 = SimplexBelief(np.array([1.0, 0.0]))
    b2 = SimplexBelief(np.array([0.0, 1.0]))
    assert tv_distance(b1, b1) == 0.0
    assert abs(tv_distance(b1, b2) - 2.0) < 1e-15
    b3 = SimplexBelief(np.array([0.75, 0.25]))
    b4 = SimplexBelief(np.array([0.25, 0.75]))
    assert abs(tv_distance(b3, b4) - 1.0) < 1e-15


def test_tv_distance_grid():
    g = Grid(-10.0, 10.0, 801)
    near = GridBelief.normal(g, 4.0, 0.5)
    far = GridBelief.normal(g, -4.0, 0.5)
    assert tv_distance(near, far) > 2.0 - 1e-6
    assert tv_distance(near, near) == 0.0
    other = GridBelief.normal(Grid(-10.0, 10.0, 401), 4.0, 0.5)
    with pytest.raises(ValueError):
        tv_distance(near, other)


def test_check_s_membership_uniform_passes():
    g = Grid(-5.0, 5.0, 101)
    b = GridBelief.uniform(g, -5.0, 5.0)

    class Bounds:
        sup_density = 0.4
        slope_bound = 0.25

    rep = check_S_membership(b, Bounds(), tol=0.0)
    assert rep.passed
    assert abs(rep.max_density - 0.1) < 1e-12
    assert rep.max_slope == 0.0


def test_check_s_membership_spike_fails(iid_source):
    g = Grid(-5.0, 5.0, 101)
    b = GridBelief.point_mass(g, 0.0)
    rep = check_S_membership(b, density_bounds(iid_source), tol=0.01)
    assert not rep.passed


def test_filter_outputs_stay_in_class(ar_source):
    bounds = density_bounds(ar_source)
    b = GridBelief.normal(default_grid(ar_source), 0.0, ar_source.stationary_std)
    q = IntervalQuantizer((0.0,))
    tol = 2.0 * b.grid.spacing * bounds.slope_bound
    for m in (1, 2):
        out = filter_update(b, ar_source, q, m)
        rep = check_S_membership(out, bounds, tol=tol)
        assert rep.passed, (m, rep)
