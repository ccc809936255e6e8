"""Demultiplexer module of the PMM digital twin.

Behavioral model of the binary tree of 1:2 SFQ demultiplexer gates that
steers signed flux quanta to DAC stages, with operating margins, stochastic
gate errors, the broadcast failure mode and the statistics used to bound
error rates.

- 'DemuxGate' record:
    Operating point, margins and error model of one 1:2 gate.
- 'PulseOp' record:
    One addressed SFQ pulse.
- 'RoutingOutcome' and 'RouteStats' records.
- 'AddressTree' class:
    A depth-N tree sharing one bias line, with its own error stream.
- Operations: 'route', 'margin_scan', 'error_curve', 'error_upper_bound',
  'per_pulse_error_budget'.

Leaf numbering: leaf = 2 * slot + stage bit, the first address bit is the
most significant one and a positive address sign selects the upper output.
The last bit selects COARSE (0) or FINE (1).

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import math

import numpy as np
from scipy import optimize, stats

from pmmtwin.core import Broadcast, InvalidCount, OutOfMargin, ParameterError
from pmmtwin.utilities import make_rng, notice

REFERENCE_DEPTH = 6
PASS_THRESHOLD = 0.1
DEFAULT_DROP_FRACTION = 0.5
MIN_TRIALS = 10
ROUTE_CHUNK = 1 << 18

# Schematic values of the fabricated gate, kept for reference only.
GATE_JUNCTIONS = {
    'J1': 10.6, 'J2': 8.0, 'J3': 8.0, 'J4': 10.6, 'J5': 10.6, 'J6': 10.6,
    'J7': 10.6,                                         # critical currents, uA
    'L1': 26.0, 'L2': 41.6, 'L3': 12.2, 'L4': 12.2, 'L5': 42.5, 'L6': 42.5,
    'M': 2.3,                                           # pH
    'I1': 4.4, 'I2': 6.6, 'I3': 6.6, 'I4': 7.8, 'I5': 7.8,  # bias, uA
}


@dataclasses.dataclass(frozen=True)
class DemuxGate(object):
    """Operating point and error model of a 1:2 demultiplexer gate.

    The per-pulse failure probability is flat at 'error_probability' around
    the nominal point and rises as exponential walls towards each margin:

        p(b, a) = p0 + W(b, a) - W(nominal), clipped to [0, 1]
        W(b, a) = exp(-(b - b_low)/w) + exp(-(b_high - b)/w)
                + exp(-(a - a_low)/w_a) + exp(-(a_high - a)/w_a)

    Outside the address window routing always fails.

    Attributes:
        nominal_bias (float): Tree bias, in uA.
        bias_margin_low (float): Lower bias margin, in uA.
        bias_margin_high (float): Upper bias margin, in uA.
        broadcast_threshold (float): Bias at and above which every gate
            duplicates pulses, in uA.
        nominal_address (float): Address flux magnitude, in mPhi0.
        address_low (float): Smallest address magnitude that steers, in mPhi0.
        address_high (float): Largest address magnitude that steers, in mPhi0.
        error_probability (float): Failure probability per pulse at the
            nominal point.
        bias_width (float): Steepness of the bias walls, in uA.
        address_width (float): Steepness of the address walls, in mPhi0.
    """
    nominal_bias: float = 100.0
    bias_margin_low: float = 85.0
    bias_margin_high: float = 115.0
    broadcast_threshold: float = 130.0
    nominal_address: float = 300.0
    address_low: float = 150.0
    address_high: float = 450.0
    error_probability: float = 0.0
    bias_width: float = 1.0
    address_width: float = 10.0

    def __post_init__(self):
        if not self.bias_margin_low <= self.nominal_bias <= self.bias_margin_high:
            raise ParameterError("nominal bias outside its margins")
        if not self.address_low <= self.nominal_address <= self.address_high:
            raise ParameterError("nominal address outside its window")
        if self.broadcast_threshold <= self.bias_margin_high:
            raise ParameterError("broadcast threshold must exceed the upper margin")
        if not 0.0 <= self.error_probability <= 1.0:
            raise ParameterError("error probability outside [0, 1]")
        if self.bias_width <= 0 or self.address_width <= 0:
            raise ParameterError("wall widths must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def _walls(self, bias, address):
        return (math.exp(-(bias - self.bias_margin_low) / self.bias_width) +
                math.exp(-(self.bias_margin_high - bias) / self.bias_width) +
                math.exp(-(address - self.address_low) / self.address_width) +
                math.exp(-(self.address_high - address) / self.address_width))

    def failure_probability(self, bias=None, address=None):
        """Per-pulse failure probability at an operating point.

        Args:
            bias (float): Bias current, in uA. Nominal when omitted.
            address (float): Address magnitude, in mPhi0. Nominal when omitted.
        """
        bias = self.nominal_bias if bias is None else bias
        address = self.nominal_address if address is None else address
        if not self.address_low <= address <= self.address_high:
            return 1.0
        if not self.bias_margin_low <= bias <= self.bias_margin_high:
            return 1.0
        excess = (self._walls(bias, address) -
                  self._walls(self.nominal_bias, self.nominal_address))
        return float(min(1.0, max(0.0, self.error_probability + excess)))


def address_word(leaf, depth=REFERENCE_DEPTH, polarity=1):
    """Address signs steering a quantum of the given polarity to a leaf.

    Returns:
        A tuple of depth signs, most significant level first.
    """
    if not 0 <= leaf < (1 << depth):
        raise ValueError("leaf %d outside a depth-%d tree" % (leaf, depth))
    return tuple(polarity * (1 if (leaf >> (depth - 1 - level)) & 1 else -1)
                 for level in range(depth))


@dataclasses.dataclass(frozen=True)
class PulseOp(object):
    """One addressed SFQ pulse.

    Attributes:
        tree_id (int): Address tree, which also selects the bias line.
        address_word (tuple): One sign per tree level, first level first.
        polarity (int): Sign of the routed quantum.
        bias_polarity (int): Direction of the tree bias current. Must equal
            polarity; the address signs are reversed with it.
    """
    tree_id: int
    address_word: tuple
    polarity: int = 1
    bias_polarity: int = 1

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ParameterError("polarity must be +1 or -1")
        if self.bias_polarity != self.polarity:
            raise ParameterError("routing a quantum of polarity %d needs bias "
                                 "polarity %d" % (self.polarity, self.polarity))
        if any(sign not in (1, -1) for sign in self.address_word):
            raise ParameterError("address signs must be +1 or -1")
        object.__setattr__(self, 'address_word', tuple(self.address_word))

    @classmethod
    def for_leaf(cls, tree_id, leaf, depth=REFERENCE_DEPTH, polarity=1):
        return cls(tree_id, address_word(leaf, depth, polarity), polarity,
                   polarity)

    @property
    def leaf(self):
        """Leaf the pulse is addressed to."""
        leaf = 0
        for sign in self.address_word:
            leaf = (leaf << 1) | (1 if sign * self.polarity > 0 else 0)
        return leaf


DELIVERED = 'delivered'
DROPPED = 'dropped'
MISROUTED = 'misrouted'


@dataclasses.dataclass(frozen=True)
class RoutingOutcome(object):
    """Result of routing one pulse.

    Attributes:
        kind (str): 'delivered', 'dropped' or 'misrouted'.
        intended (int): Addressed leaf.
        leaf (int): Leaf that received the quantum, None when dropped.
        quantum (int): Sign of the delivered quantum.
    """
    kind: str
    intended: int
    leaf: int = None
    quantum: int = 1

    @property
    def is_error(self):
        return self.kind != DELIVERED


RouteStats = collections.namedtuple('RouteStats',
                                    'pulses delivered dropped misrouted arrivals')


class AddressTree(object):
    """A binary tree of 1:2 gates fed from one SFQ source.

    All gates of a tree share one bias line and all gates at a given depth
    share one address line, so a single (bias, address) operating point
    applies to the whole tree.

    Args:
        depth (int): Number of address lines N; the tree has 2**N leaves.
        gate (DemuxGate): Gate model, copied to every node.
        tree_id (int): Tree identifier, also names its random stream.
        seed (int): Master seed of the error stream.
        drop_fraction (float): Share of gate errors that lose the pulse; the
            rest send it to the sibling subtree.
        gates (list): Optional per-node gate records, heap ordered.

    Attributes:
        bias (float): Bias current magnitude, in uA.
        address (float): Address flux magnitude, in mPhi0.
        bias_polarity (int): Current bias direction.
        reversals (int): Number of bias polarity reversals so far.
    """

    def __init__(self, depth=REFERENCE_DEPTH, gate=None, tree_id=0, seed=None,
                 drop_fraction=DEFAULT_DROP_FRACTION, gates=None):
        if depth < 1:
            raise ParameterError("tree depth must be at least 1")
        self.depth = int(depth)
        self.tree_id = tree_id
        self.name = "tree %d" % tree_id
        gate = gate or DemuxGate()
        if gates is None:
            gates = [gate] * ((1 << self.depth) - 1)
        if len(gates) != (1 << self.depth) - 1:
            raise ParameterError("a depth-%d tree has %d gates"
                                 % (self.depth, (1 << self.depth) - 1))
        self.gates = list(gates)
        self.drop_fraction = float(drop_fraction)
        self.bias = self.gates[0].nominal_bias
        self.address = self.gates[0].nominal_address
        self.bias_polarity = 1
        self.reversals = 0
        self.rng = make_rng(seed, 'tree', tree_id)

    @property
    def leaf_count(self):
        return 1 << self.depth

    @property
    def gate(self):
        return self.gates[0]

    def reseed(self, seed):
        self.rng = make_rng(seed, 'tree', self.tree_id)

    def set_operating_point(self, bias=None, address=None):
        if bias is not None:
            self.bias = float(bias)
        if address is not None:
            self.address = float(address)
        notice(self, "Operating point %.3f uA, %.3f mPhi0." % (self.bias, self.address))

    def check_bias(self, bias=None):
        """Raise when the tree cannot route at this bias."""
        bias = self.bias if bias is None else bias
        gate = self.gate
        if bias >= gate.broadcast_threshold:
            raise Broadcast(bias, range(self.leaf_count))
        if not gate.bias_margin_low <= bias <= gate.bias_margin_high:
            raise OutOfMargin(bias, gate.bias_margin_low, gate.bias_margin_high)

    def path_nodes(self, leaf):
        """Heap indices of the gates crossed on the way to a leaf."""
        nodes = []
        node = 0
        for level in range(self.depth):
            nodes.append(node)
            bit = (leaf >> (self.depth - 1 - level)) & 1
            node = 2 * node + 1 + bit
        return nodes

    def level_probabilities(self, leaf, bias=None, address=None):
        bias = self.bias if bias is None else bias
        address = self.address if address is None else address
        return np.array([self.gates[node].failure_probability(bias, address)
                         for node in self.path_nodes(leaf)])

    def failure_probability(self, leaf=0, bias=None, address=None):
        """Probability that a pulse addressed to 'leaf' fails to arrive."""
        return float(1.0 - np.prod(1.0 - self.level_probabilities(leaf, bias, address)))

    def _track_polarity(self, bias_polarity):
        if bias_polarity != self.bias_polarity:
            self.reversals += 1
            self.bias_polarity = bias_polarity

    def route(self, op, rng_seed=None):
        """Steer one pulse through the tree.

        Args:
            op (PulseOp): Pulse to route. Its address word must match the
                tree depth.
            rng_seed: When given, errors are drawn from a fresh stream with
                this seed instead of the tree's own stream.

        Returns:
            A RoutingOutcome.
        """
        if len(op.address_word) != self.depth:
            raise ParameterError("address word has %d signs, tree depth is %d"
                                 % (len(op.address_word), self.depth))
        self.check_bias()
        self._track_polarity(op.bias_polarity)
        rng = self.rng if rng_seed is None else make_rng(rng_seed, 'tree', self.tree_id)
        intended = op.leaf
        node = 0
        leaf = 0
        misrouted = False
        for level in range(self.depth):
            bit = (intended >> (self.depth - 1 - level)) & 1
            p = self.gates[node].failure_probability(self.bias, self.address)
            if p > 0.0 and rng.random() < p:
                if rng.random() < self.drop_fraction:
                    return RoutingOutcome(DROPPED, intended, None, op.polarity)
                bit ^= 1
                misrouted = True
            node = 2 * node + 1 + bit
            leaf = (leaf << 1) | bit
        kind = MISROUTED if misrouted else DELIVERED
        return RoutingOutcome(kind, intended, leaf, op.polarity)

    def route_many(self, leaf, count, polarity=1):
        """Route 'count' identical pulses, vectorised over pulses.

        Draws from the tree's own stream. Statistically identical to calling
        'route()' count times.

        Returns:
            RouteStats with per-leaf arrival counts.
        """
        self.check_bias()
        self._track_polarity(polarity)
        p = self.level_probabilities(leaf)
        bits = np.array([(leaf >> (self.depth - 1 - level)) & 1
                         for level in range(self.depth)], dtype=np.int64)
        weights = 1 << np.arange(self.depth - 1, -1, -1, dtype=np.int64)
        arrivals = np.zeros(self.leaf_count, dtype=np.int64)
        delivered = dropped = misrouted = 0
        remaining = int(count)
        while remaining > 0:
            n = min(remaining, ROUTE_CHUNK)
            remaining -= n
            if not p.any():
                arrivals[leaf] += n
                delivered += n
                continue
            errors = self.rng.random((n, self.depth)) < p
            drops = errors & (self.rng.random((n, self.depth)) < self.drop_fraction)
            lost = drops.any(axis=1)
            failed = errors.any(axis=1)
            wrong = failed & ~lost
            reached = (bits ^ errors.astype(np.int64)) @ weights
            arrivals += np.bincount(reached[~lost], minlength=self.leaf_count)
            dropped += int(lost.sum())
            misrouted += int(wrong.sum())
            delivered += int((~failed).sum())
        return RouteStats(int(count), delivered, dropped, misrouted, arrivals)


def route(tree, op, rng_seed=None):
    """Steer one pulse through a tree; see 'AddressTree.route()'."""
    return tree.route(op, rng_seed)


MarginPoint = collections.namedtuple('MarginPoint',
                                     'bias address pass_fraction passed')


def margin_scan(tree, bias_grid, address_grid, trials, leaves=None,
                rng_seed=None, threshold=PASS_THRESHOLD):
    """Probe routing over a grid of operating points.

    At every point each tested leaf receives 'trials' pulses. The point
    passes when every leaf fails less often than 'threshold'. Points where
    the tree is out of margin or broadcasting fail outright.

    Args:
        tree (AddressTree): Tree to test; its operating point is restored.
        bias_grid (iterable): Bias currents, in uA.
        address_grid (iterable): Address magnitudes, in mPhi0.
        trials (int): Pulses per leaf and point, at least 10.
        leaves (iterable): Leaves to test, all by default.
        rng_seed: Seed of the scan stream.

    Returns:
        List of MarginPoint, bias major.
    """
    if trials < MIN_TRIALS:
        raise InvalidCount("margin scans need at least %d trials" % MIN_TRIALS)
    leaves = list(range(tree.leaf_count)) if leaves is None else list(leaves)
    rng = make_rng(rng_seed, 'margins', tree.tree_id)
    points = []
    for bias in bias_grid:
        for address in address_grid:
            try:
                tree.check_bias(bias)
            except (Broadcast, OutOfMargin):
                points.append(MarginPoint(bias, address, 0.0, False))
                continue
            probabilities = [tree.failure_probability(leaf, bias, address)
                             for leaf in leaves]
            failures = rng.binomial(trials, probabilities)
            pass_fraction = 1.0 - failures.sum() / float(trials * len(leaves))
            passed = bool((failures / float(trials)).max() < threshold)
            points.append(MarginPoint(bias, address, pass_fraction, passed))
    return points


def error_curve(tree, bias_grid, leaf=0, address=None):
    """Failure probability of one leaf versus tree bias.

    Broadcasting and out-of-margin biases report probability 1.

    Returns:
        List of (bias, probability) pairs.
    """
    curve = []
    for bias in bias_grid:
        if bias >= tree.gate.broadcast_threshold:
            curve.append((bias, 1.0))
        else:
            curve.append((bias, tree.failure_probability(leaf, bias, address)))
    return curve


def error_upper_bound(operations, observed_errors, confidence=0.95,
                      two_sided=False):
    """Clopper-Pearson upper bound on a per-operation error probability.

    Args:
        operations (int): Number of operations observed.
        observed_errors (int): Errors among them.
        confidence (float): Confidence level, in (0, 1).
        two_sided (bool): Return the upper end of the central interval
            instead of the one-sided bound.

    Returns:
        Upper bound on the error probability.
    """
    if operations <= 0:
        raise InvalidCount("the bound needs at least one operation")
    if not 0 <= observed_errors <= operations:
        raise InvalidCount("observed errors must lie in [0, operations]")
    if not 0.0 < confidence < 1.0:
        raise ParameterError("confidence must lie in (0, 1)")
    if observed_errors == operations:
        return 1.0
    level = 1.0 - (1.0 - confidence) / 2.0 if two_sided else confidence
    return float(stats.beta.ppf(level, observed_errors + 1,
                                operations - observed_errors))


def pulses_per_programming(dac_count, mean_quanta_per_dac):
    return int(round(dac_count * mean_quanta_per_dac))


def per_pulse_error_budget(dac_count, mean_quanta_per_dac, programs,
                           min_successes, confidence=0.95):
    """Largest per-pulse error probability meeting a programming goal.

    A programming routes dac_count * mean_quanta_per_dac pulses and succeeds
    when none of them fails. The returned p is the largest value for which
    at least 'min_successes' of 'programs' programmings succeed with
    probability 'confidence'.
    """
    if min(dac_count, mean_quanta_per_dac, programs, min_successes) <= 0:
        raise InvalidCount("all counts must be positive")
    if min_successes > programs:
        raise InvalidCount("min_successes cannot exceed programs")
    pulses = dac_count * mean_quanta_per_dac

    def shortfall(q):
        return stats.binom.sf(min_successes - 1, programs, q) - confidence

    if min_successes == programs:
        log_q = math.log(confidence) / programs
    else:
        log_q = math.log(optimize.brentq(shortfall, 0.0, 1.0, xtol=1e-16,
                                         rtol=4 * np.finfo(float).eps))
    return float(-math.expm1(log_q / pulses))
