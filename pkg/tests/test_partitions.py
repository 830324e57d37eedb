from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxcond.errors import CapacityError, TieDetected
from maxcond.partitions import (Partition, bell_number, enumerate_partitions,
                                partition_from_assignment, scenario_from_realization)
from maxcond.samplers import AtomFunction, PointMeasureRealization


def test_bell_counts():
    assert [len(enumerate_partitions(k)) for k in range(1, 9)] == [1, 2, 5, 15, 52, 203, 877, 4140]
    assert [bell_number(k) for k in range(1, 9)] == [1, 2, 5, 15, 52, 203, 877, 4140]


def test_lexicographic_order_k3():
    got = [p.to_string() for p in enumerate_partitions(3)]
    assert got == ["0 0 0", "0 0 1", "0 1 0", "0 1 1", "0 1 2"]
    assert enumerate_partitions(3)[0].blocks == ((0, 1, 2),)


def test_enumeration_unique_and_valid():
    parts = enumerate_partitions(6)
    assert len({p.rgs for p in parts}) == len(parts)


def test_capacity():
    with pytest.raises(CapacityError):
        enumerate_partitions(13)
    with pytest.raises(ValueError):
        enumerate_partitions(0)


def test_invalid_rgs():
    with pytest.raises(ValueError):
        Partition((1, 0))
    with pytest.raises(ValueError):
        Partition((0, 2))


def test_string_roundtrip():
    p = Partition((0, 1, 0, 2))
    assert Partition.from_string(p.to_string()) == p
    assert str(p) == "{0,2}{1}{3}"
    assert Partition.from_blocks([(1,), (0, 2), (3,)]) == p


@settings(deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=7))
def test_assignment_gives_standard_form(labels):
    p = partition_from_assignment(labels)
    # same sites grouped together iff same label
    for i in range(len(labels)):
        for j in range(len(labels)):
            assert (labels[i] == labels[j]) == (p.rgs[i] == p.rgs[j])
    assert p in enumerate_partitions(len(labels))


def _real(rows):
    return PointMeasureRealization([AtomFunction(np.array(r, float), 1.0) for r in rows])


def test_scenario_from_realization():
    real = _real([[3.0, 0.1, 2.0], [1.0, 4.0, 0.5], [0.5, 0.5, 0.5]])
    sc = scenario_from_realization(real, [0, 1, 2])
    assert sc.partition.to_string() == "0 1 0"
    assert sc.extremal_atoms[0] is real.atoms[0]
    assert sc.extremal_atoms[1] is real.atoms[1]


def test_tie_detected():
    real = _real([[1.0, 2.0], [1.0, 0.5]])
    with pytest.raises(TieDetected):
        scenario_from_realization(real, [0, 1])
