import math

import numpy as np
import pytest

from zdq.beliefs import Grid, GridBelief, SimplexBelief
from zdq.quantizers import (
    FinitePartition,
    HyperplaneQuantizer,
    IntervalQuantizer,
    cell_mass,
    enumerate_finite_partitions,
    enumerate_interval_candidates,
    quantizer_from_json,
)


def test_interval_quantizer_classify():
    q = IntervalQuantizer((-1.0, 1.0))
    assert q.classify(-2.0) == 1
    assert q.classify(0.0) == 2
    assert q.classify(2.0) == 3
    # boundary goes to the lower cell
    assert q.classify(-1.0) == 1
    assert q.classify(1.0) == 2


def test_interval_quantizer_validation():
    with pytest.raises(ValueError):
        IntervalQuantizer((1.0, -1.0))
    with pytest.raises(ValueError):
        IntervalQuantizer((0.0, 0.0))
    with pytest.raises(ValueError):
        IntervalQuantizer((0.0, math.inf))
    assert IntervalQuantizer(()).levels == 1


def test_interval_quantizer_cells():
    q = IntervalQuantizer((-1.0, 1.0))
    assert q.cell_interval(1) == (-math.inf, -1.0)
    assert q.cell_interval(2) == (-1.0, 1.0)
    assert q.cell_interval(3) == (1.0, math.inf)
    with pytest.raises(ValueError):
        q.cell_interval(4)


def test_hyperplane_tie_goes_to_lowest_cell():
    # one hyperplane splitting R^2; a point on it is admissible for both
    q = HyperplaneQuantizer(
        dim=2,
        levels=2,
        hyperplanes={(1, 2): (np.array([1.0, 0.0]), 0.0)},
    )
    assert q.classify(np.array([-0.5, 0.3])) == 1
    assert q.classify(np.array([0.5, -0.2])) == 2
    assert q.classify(np.array([0.0, 9.9])) == 1


def test_finite_partition_basics():
    p = FinitePartition((1, 2, 1), 2)
    assert p.classify(0) == 1
    assert p.classify(1) == 2
    assert p.classify(2) == 1
    assert np.array_equal(p.member_mask(1), [1.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        FinitePartition((1, 3), 2)  # cell index above levels
    with pytest.raises(ValueError):
        FinitePartition((0, 1), 2)  # cells are 1-based


def test_cell_mass_grid_halves():
    b = GridBelief.normal(Grid(-8.0, 8.0, 801), 0.0, 1.0)
    q = IntervalQuantizer((0.0,))
    m1 = cell_mass(b, q, 1)
    # threshold exactly on a node: the halves are exact, not O(spacing)
    assert abs(m1 - 0.5) < 1e-6
    assert abs(cell_mass(b, q, 2) - 0.5) < 1e-6
    assert abs(m1 + cell_mass(b, q, 2) - 1.0) < 1e-9


def test_cell_mass_grid_tail():
    b = GridBelief.normal(Grid(-8.0, 8.0, 801), 0.0, 1.0)
    q = IntervalQuantizer((1.0,))
    tail = 1.0 - 0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0)))
    assert abs(cell_mass(b, q, 2) - tail) < 1e-4


def test_cell_mass_simplex():
    b = SimplexBelief(np.array([0.2, 0.5, 0.3]))
    p = FinitePartition((1, 2, 1), 2)
    assert abs(cell_mass(b, p, 1) - 0.5) < 1e-15
    assert abs(cell_mass(b, p, 2) - 0.5) < 1e-15


def test_enumerate_interval_candidates_counts():
    assert len(enumerate_interval_candidates(2, -1.0, 1.0, 5)) == 5
    assert len(enumerate_interval_candidates(3, -1.0, 1.0, 5)) == 10
    only = enumerate_interval_candidates(1, -1.0, 1.0, 5)
    assert len(only) == 1 and only[0].levels == 1
    assert only[0].classify(3.3) == 1


def test_enumerate_interval_candidates_order():
    cands = enumerate_interval_candidates(2, -1.0, 1.0, 3)
    assert [q.thresholds for q in cands] == [(-1.0,), (0.0,), (1.0,)]


def test_enumerate_finite_partitions_counts():
    assert len(enumerate_finite_partitions(2, 2)) == 2
    assert len(enumerate_finite_partitions(3, 2)) == 4
    assert len(enumerate_finite_partitions(3, 3)) == 5


def test_enumerate_finite_partitions_canonical():
    for p in enumerate_finite_partitions(3, 3):
        seen = []
        for cell in p.assignment:
            if cell not in seen:
                seen.append(cell)
        # cells numbered in order of first use
        assert seen == sorted(seen)
    # no duplicate assignments
    all_assignments = [p.assignment for p in enumerate_finite_partitions(3, 3)]
    assert len(set(all_assignments)) == len(all_assignments)


def test_json_roundtrip():
    for q in (
        IntervalQuantizer((-0.5, 1.5)),
        FinitePartition((1, 2, 2), 2),
        HyperplaneQuantizer(
            dim=2, levels=2, hyperplanes={(1, 2): (np.array([0.6, 0.8]), 0.1)}
        ),
    ):
        q2 = quantizer_from_json(q.to_json())
        assert type(q2) is type(q)
        assert q2.levels == q.levels
