import itertools
import math

import numpy as np
import pytest
from scipy import stats

from pmmtwin import demux
from pmmtwin.core import Broadcast, InvalidCount, OutOfMargin, ParameterError


def test_address_word_selects_leaf():
    for leaf in range(64):
        op = demux.PulseOp.for_leaf(0, leaf)
        assert op.leaf == leaf
        assert demux.PulseOp.for_leaf(0, leaf, polarity=-1).leaf == leaf


def test_bias_polarity_must_follow_quantum():
    with pytest.raises(ParameterError):
        demux.PulseOp(0, demux.address_word(3), polarity=-1, bias_polarity=1)


def test_error_free_routing_is_deterministic():
    for seed in (None, 1, 2):
        tree = demux.AddressTree(seed=seed)
        for leaf in range(tree.leaf_count):
            outcome = tree.route(demux.PulseOp.for_leaf(0, leaf))
            assert outcome.kind == demux.DELIVERED
            assert outcome.leaf == leaf


def test_negative_pulses_reach_the_same_leaf():
    tree = demux.AddressTree(seed=0)
    positive = tree.route(demux.PulseOp.for_leaf(0, 37))
    negative = tree.route(demux.PulseOp.for_leaf(0, 37, polarity=-1))
    assert positive.leaf == negative.leaf == 37
    assert (positive.quantum, negative.quantum) == (1, -1)
    assert tree.reversals == 1


def test_exclusive_delivery_over_every_leaf_pair():
    tree = demux.AddressTree(seed=0)
    for a, b in itertools.permutations(range(tree.leaf_count), 2):
        stats_a = tree.route_many(a, 3)
        assert stats_a.arrivals[b] == 0
        assert stats_a.arrivals[a] == 3


def test_aggregate_error_rate_matches_gate_rate():
    p = 1e-3
    pulses = 1000000
    tree = demux.AddressTree(gate=demux.DemuxGate(error_probability=p), seed=11)
    result = tree.route_many(5, pulses)
    expected = 1.0 - (1.0 - p) ** demux.REFERENCE_DEPTH
    sigma = math.sqrt(pulses * expected * (1.0 - expected))
    failed = result.dropped + result.misrouted
    assert abs(failed - pulses * expected) < 3.0 * sigma
    assert result.delivered + failed == pulses
    assert result.arrivals.sum() == pulses - result.dropped
    assert tree.failure_probability(5) == pytest.approx(expected)


def test_route_many_matches_single_routes():
    gate = demux.DemuxGate(error_probability=0.05)
    tree = demux.AddressTree(gate=gate, seed=4)
    failures = sum(tree.route(demux.PulseOp.for_leaf(0, 9)).is_error
                   for _ in range(4000))
    expected = 4000 * tree.failure_probability(9)
    assert abs(failures - expected) < 4.0 * math.sqrt(expected)


def test_same_seed_same_errors():
    gate = demux.DemuxGate(error_probability=0.01)
    first = demux.AddressTree(gate=gate, tree_id=3, seed=99).route_many(0, 10000)
    second = demux.AddressTree(gate=gate, tree_id=3, seed=99).route_many(0, 10000)
    other = demux.AddressTree(gate=gate, tree_id=4, seed=99).route_many(0, 10000)
    assert np.array_equal(first.arrivals, second.arrivals)
    assert not np.array_equal(first.arrivals, other.arrivals)


def test_overbias_broadcasts():
    tree = demux.AddressTree()
    tree.set_operating_point(bias=140.0)
    with pytest.raises(Broadcast) as error:
        tree.route(demux.PulseOp.for_leaf(0, 0))
    assert error.value.leaves == frozenset(range(64))


def test_bias_outside_margins():
    tree = demux.AddressTree()
    tree.set_operating_point(bias=80.0)
    with pytest.raises(OutOfMargin):
        tree.route_many(0, 10)


def test_address_outside_window_always_fails():
    gate = demux.DemuxGate()
    assert gate.failure_probability(address=100.0) == 1.0
    assert gate.failure_probability() == 0.0


def test_error_curve_has_walls():
    tree = demux.AddressTree(gate=demux.DemuxGate(error_probability=1e-7))
    curve = dict(demux.error_curve(tree, [84.0, 86.0, 100.0, 114.0, 116.0, 130.0]))
    assert curve[100.0] == pytest.approx(6e-7, rel=1e-3)
    assert curve[86.0] > 0.1
    assert curve[84.0] == curve[116.0] == curve[130.0] == 1.0
    assert curve[114.0] > curve[100.0]


def test_margin_scan_interior_passes():
    tree = demux.AddressTree(seed=0)
    points = demux.margin_scan(tree, [80.0, 100.0, 120.0, 135.0],
                               [100.0, 300.0, 500.0], trials=50, rng_seed=0)
    passed = set((p.bias, p.address) for p in points if p.passed)
    assert passed == {(100.0, 300.0)}


def test_margin_scan_zero_width_window():
    gate = demux.DemuxGate(bias_margin_low=100.0, bias_margin_high=100.0,
                           address_low=300.0, address_high=300.0)
    tree = demux.AddressTree(gate=gate, seed=0)
    points = demux.margin_scan(tree, [99.0, 100.0, 101.0], [299.0, 300.0, 301.0],
                               trials=20, rng_seed=0)
    assert [(p.bias, p.address) for p in points if p.passed] == [(100.0, 300.0)]


def test_margin_scan_needs_trials():
    with pytest.raises(InvalidCount):
        demux.margin_scan(demux.AddressTree(), [100.0], [300.0], trials=5)


def test_error_free_operations_bound():
    bound = demux.error_upper_bound(15000000, 0, 0.95)
    assert 1.9e-7 <= bound <= 3.0e-7
    assert bound == pytest.approx(-math.log(0.05) / 15e6, rel=1e-3)
    two_sided = demux.error_upper_bound(15000000, 0, 0.95, two_sided=True)
    assert two_sided == pytest.approx(2.46e-7, rel=0.01)


def test_bound_trivial_cases():
    assert demux.error_upper_bound(1, 0, 0.95) == pytest.approx(0.95)
    assert demux.error_upper_bound(100, 100, 0.95) == 1.0
    with pytest.raises(InvalidCount):
        demux.error_upper_bound(0, 0)
    with pytest.raises(InvalidCount):
        demux.error_upper_bound(10, 11)


def test_bound_is_monotone():
    bounds = [demux.error_upper_bound(n, 2) for n in (10, 100, 1000, 10000)]
    assert bounds == sorted(bounds, reverse=True)
    bounds = [demux.error_upper_bound(1000, k) for k in range(5)]
    assert bounds == sorted(bounds)


def test_error_budget_orders_of_magnitude():
    assert demux.pulses_per_programming(16136, 20) == 322720
    large = demux.per_pulse_error_budget(16136, 20, 100, 100)
    small = demux.per_pulse_error_budget(968, 20, 100, 100)
    assert 1e-9 / 3 <= large <= 3e-9
    assert 1e-8 / 3 <= small <= 3e-8


def test_error_budget_meets_its_goal():
    pulses = 968 * 20
    p = demux.per_pulse_error_budget(968, 20, 100, 99, 0.95)
    q = (1.0 - p) ** pulses
    assert stats.binom.sf(98, 100, q) == pytest.approx(0.95, abs=1e-6)
    assert p > demux.per_pulse_error_budget(968, 20, 100, 100, 0.95)


def test_error_budget_allowing_one_failed_programming():
    # 99 of 100 programmings: one failure in 100 lets p rise about sevenfold.
    p = demux.per_pulse_error_budget(16136, 20, 100, 99, 0.95)
    assert p == pytest.approx(1.107e-8, rel=0.01)
    assert p / demux.per_pulse_error_budget(16136, 20, 100, 100, 0.95) == \
        pytest.approx(6.96, rel=0.01)


def test_error_budget_rejects_bad_counts():
    with pytest.raises(InvalidCount):
        demux.per_pulse_error_budget(968, 20, 10, 11)
