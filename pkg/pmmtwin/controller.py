"""Controller module of the PMM digital twin.

Loads a problem into the chip: compiles DAC targets into pulse programs,
drives them through the demultiplexer, resets stages, accounts for
programming cost and calibrates DACs with device feedback.

- 'ResetOp', 'PulseBatch' and 'PulseProgram' records.
- 'ExecutionReport', 'Discrepancy' and 'ProgramCost' records.
- 'CalibrationRecord' record, with 'save_calibration' and
  'load_calibration'.
- Operations: 'compile_program', 'execute_program', 'program_cost',
  'calibrate_dac', 'calibrate_all'.
- 'Controller' class:
    Runs those operations on a VirtualProcessor.

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import logging

import numpy as np

from pmmtwin.core import COARSE, PHI0, STAGES, CapacityExceeded, \
    ParameterError, Unmeasurable
from pmmtwin.device import wrap_flux
from pmmtwin.flux_dac import apply_quantum, reset_stage
from pmmtwin.utilities import PersistenceManager, make_rng, notice

log = logging.getLogger("pmmtwin")

INCREMENTAL = 'incremental'
RESET_FIRST = 'reset_first'
MODES = (INCREMENTAL, RESET_FIRST)

COOLDOWN_S = 1e-3
MAX_RESET_PULSES = 10
CALIBRATION_COARSE_POINTS = 6
CALIBRATION_TOLERANCE = 1e-9
NOISE_FINE_STEPS = 0.1
CALIBRATION_NAMESPACE = 'dac'
CALIBRATED_ROLES = ('qubit-flux', 'breakout')


@dataclasses.dataclass(frozen=True)
class ResetOp(object):
    """Reset a stage with up to max_pulses pulses, reading it back after each."""
    dac_id: int
    stage: str
    max_pulses: int = MAX_RESET_PULSES


@dataclasses.dataclass(frozen=True)
class PulseBatch(object):
    """'count' identical pulses, each routing one quantum into a stage."""
    dac_id: int
    stage: str
    op: object
    count: int

    @property
    def polarity(self):
        return self.op.polarity


@dataclasses.dataclass
class PulseProgram(object):
    """Ordered operations loading a set of DAC targets.

    Attributes:
        ops (list): ResetOp then PulseBatch records.
        expected_final (dict): DAC identifier to (N_C, N_F) after an
            error-free run.
        pulse_count (int): Quanta routed by the program.
        mode (str): 'incremental' or 'reset_first'.
        start (dict): Declared starting state.
    """
    ops: list
    expected_final: dict
    pulse_count: int
    mode: str = INCREMENTAL
    start: dict = dataclasses.field(default_factory=dict)

    def batches(self):
        return [op for op in self.ops if isinstance(op, PulseBatch)]

    def resets(self):
        return [op for op in self.ops if isinstance(op, ResetOp)]


def half_capacity_targets(nodes):
    """Targets at half of every stage capacity, rounded up."""
    return dict((dac_id, ((node.capacity_coarse + 1) // 2,
                          (node.capacity_fine + 1) // 2))
                for dac_id, node in nodes.items())


def compile_program(current, targets, mode, nodes):
    """Turn DAC targets into a pulse program.

    Pulses are grouped per address tree. Within a tree the positive batch
    comes first, in ascending leaf order (COARSE before FINE for each DAC),
    followed by the negative batch, so each tree reverses its bias at most
    once.

    Args:
        current (dict): DAC identifier to stored (N_C, N_F); missing DACs
            are empty.
        targets (dict): DAC identifier to wanted (N_C, N_F).
        mode (str): 'incremental' sends the per-stage deltas; 'reset_first'
            resets every targeted stage and programs it from zero.
        nodes (dict): DAC identifier to DacNodeShell (or DacNode).

    Returns:
        A PulseProgram.
    """
    if mode not in MODES:
        raise ParameterError("unknown programming mode %r" % (mode,))
    for dac_id, wanted in targets.items():
        node = nodes[dac_id]
        for stage, count, capacity in zip(STAGES, wanted, (node.capacity_coarse,
                                                           node.capacity_fine)):
            if abs(count) > capacity:
                raise CapacityExceeded(dac_id, stage, count, capacity)
    resets = []
    batches = []
    for dac_id in sorted(targets):
        node = nodes[dac_id]
        if mode == RESET_FIRST:
            start = (0, 0)
            resets.extend(ResetOp(dac_id, stage) for stage in STAGES)
        else:
            start = tuple(current.get(dac_id, (0, 0)))
        for stage, have, want in zip(STAGES, start, targets[dac_id]):
            delta = int(want) - int(have)
            if delta:
                polarity = 1 if delta > 0 else -1
                batches.append(PulseBatch(dac_id, stage,
                                          node.pulse_op(stage, polarity), abs(delta)))
    batches.sort(key=lambda b: (b.op.tree_id, b.polarity < 0, b.op.leaf))
    expected = dict(current)
    expected.update((dac_id, tuple(counts)) for dac_id, counts in targets.items())
    return PulseProgram(resets + batches, expected,
                        sum(batch.count for batch in batches), mode, dict(current))


Discrepancy = collections.namedtuple('Discrepancy', 'dac_id expected achieved causes')
ProgramCost = collections.namedtuple('ProgramCost', 'pulse_count cooldown bias_reversals')


@dataclasses.dataclass
class ExecutionReport(object):
    """Outcome of running a pulse program.

    Attributes:
        achieved (dict): DAC identifier to (N_C, N_F) after the run, for
            every DAC the program or a stray quantum touched.
        expected (dict): Same DACs, state an error-free run would leave.
        discrepancies (list): Discrepancy records, causes among 'dropped',
            'misrouted', 'saturated' and 'residual'.
        pulses (int): Quanta sent.
        dropped (int): Quanta lost inside a tree.
        misrouted (int): Quanta that reached a wrong leaf.
        stray (int): Misrouted quanta that reached an unused leaf.
        saturations (int): Quanta refused by a full stage.
        residuals (dict): (dac_id, stage) to quanta left after resetting.
        bias_reversals (int): Bias polarity reversals during the run.
    """
    achieved: dict
    expected: dict
    discrepancies: list
    pulses: int = 0
    dropped: int = 0
    misrouted: int = 0
    stray: int = 0
    saturations: int = 0
    residuals: dict = dataclasses.field(default_factory=dict)
    bias_reversals: int = 0

    @property
    def routing_errors(self):
        return self.dropped + self.misrouted

    @property
    def ok(self):
        return not self.discrepancies


def read_stage(dac, stage, other_count=0, device=None):
    """Count held by one stage, inferred from the DAC output flux.

    The flux is read as the compensation of the device the DAC biases when
    that device has an observable, otherwise through an ideal stage
    observable. The other stage is taken at the count the controller
    believes it holds; the flux quantum ambiguity of a periodic observable
    is resolved around that belief.

    Args:
        dac (TwoStageDac): DAC to read.
        stage (str): COARSE or FINE.
        other_count (int): Believed count of the other stage.
        device: QubitDevice, DcSquidDevice or None.

    Returns:
        Inferred stored count of 'stage'.
    """
    if stage == COARSE:
        believed = dac.flux_of(0, other_count)
        step = dac.k
    else:
        believed = dac.flux_of(other_count, 0)
        step = dac.fine_step
    if device is not None and hasattr(device, 'compensation_flux'):
        measured = -device.compensation_flux(dac.output_flux())
        flux = believed + wrap_flux(measured - believed)
    else:
        flux = dac.output_flux()
    return int(round((flux - believed) / step))


def _reset(dac, op, rng, causes, residuals, believed, device=None):
    stage = dac.stage(op.stage)
    counts = believed.setdefault(op.dac_id, [0, 0])
    index = STAGES.index(op.stage)
    other = counts[1 - index]
    pulses = 0
    while True:
        reset_stage(stage, 1, rng)
        pulses += 1
        residual = read_stage(dac, op.stage, other, device)
        if residual == 0 or pulses >= op.max_pulses:
            break
    counts[index] = residual
    if residual:
        residuals[(op.dac_id, op.stage)] = residual
        causes[op.dac_id].add('residual')
        log.warning("DAC %d %s kept %d quanta after %d reset pulses",
                    op.dac_id, op.stage, residual, pulses)


def execute_program(program, interface, dacs, rng_seed=None, devices=None):
    """Run a pulse program.

    Args:
        program (PulseProgram): Program to run.
        interface (DemuxInterface or its shell): Trees delivering the pulses.
        dacs (dict): DAC identifier to TwoStageDac, updated in place.
        rng_seed: Reseeds the tree and reset streams when given.
        devices (dict): DAC identifier to the feedback device that reads
            it back after a reset pulse. DACs left out are read through an
            ideal stage observable.

    Returns:
        An ExecutionReport. Routing failures that stop the tree altogether
        ('Broadcast', 'OutOfMargin') propagate.
    """
    if rng_seed is not None:
        interface.reseed(rng_seed)
    reset_rng = make_rng(interface.seed if rng_seed is None else rng_seed, 'reset')
    before = dict((dac_id, dac.counts()) for dac_id, dac in dacs.items())
    reversals = interface.bias_reversals()
    causes = collections.defaultdict(set)
    residuals = {}
    believed = dict((dac_id, list(counts)) for dac_id, counts in program.start.items())
    devices = devices or {}
    touched = set(program.expected_final)
    pulses = dropped = misrouted = stray = saturations = 0
    for op in program.ops:
        if isinstance(op, ResetOp):
            _reset(dacs[op.dac_id], op, reset_rng, causes, residuals, believed,
                   devices.get(op.dac_id))
            continue
        stats = interface.transmit_many(op.op, op.count)
        pulses += stats.pulses
        dropped += stats.dropped
        misrouted += stats.misrouted
        if stats.dropped:
            causes[op.dac_id].add('dropped')
        for leaf in np.flatnonzero(stats.arrivals):
            arrived = int(stats.arrivals[leaf])
            target = interface.dac_at(op.op.tree_id, int(leaf))
            if target is None or target[0] not in dacs:
                stray += arrived
                continue
            dac_id, stage = target
            if target != (op.dac_id, op.stage):
                causes[dac_id].add('misrouted')
                causes[op.dac_id].add('misrouted')
                touched.add(dac_id)
            for _ in range(arrived):
                _, stored = apply_quantum(dacs[dac_id], stage, op.polarity)
                if not stored:
                    saturations += 1
                    causes[dac_id].add('saturated')
    expected = dict((dac_id, program.expected_final.get(dac_id, before[dac_id]))
                    for dac_id in touched)
    achieved = dict((dac_id, dacs[dac_id].counts()) for dac_id in touched)
    discrepancies = [Discrepancy(dac_id, expected[dac_id], achieved[dac_id],
                                 tuple(sorted(causes[dac_id])))
                     for dac_id in sorted(touched)
                     if tuple(expected[dac_id]) != achieved[dac_id]]
    report = ExecutionReport(achieved, expected, discrepancies, pulses, dropped,
                             misrouted, stray, saturations, residuals,
                             interface.bias_reversals() - reversals)
    notice(interface, "%d pulses, %d routing errors, %d discrepancies."
           % (pulses, report.routing_errors, len(discrepancies)))
    return report


def program_cost(program):
    """Pulse count, cooldown (s) and bias reversals of a program.

    Every tree starts with positive bias; each change of polarity on a tree
    counts as one reversal.
    """
    polarity = {}
    reversals = 0
    for batch in program.batches():
        tree_id = batch.op.tree_id
        if polarity.get(tree_id, 1) != batch.polarity:
            reversals += 1
        polarity[tree_id] = batch.polarity
    return ProgramCost(program.pulse_count, COOLDOWN_S, reversals)


@dataclasses.dataclass(frozen=True)
class CalibrationRecord(object):
    """Measured parameters of one DAC.

    Attributes:
        dac_id (int): DAC identifier.
        k (float): COARSE step, in Phi0.
        gamma (float): COARSE/FINE ratio.
        analog_mutual (float): Analog line to device mutual, in pH.
        uncertainty (float): Standard error of k, in Phi0.
    """
    dac_id: int
    k: float
    gamma: float
    analog_mutual: float
    uncertainty: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ParameterError("DAC %s: calibrated k %.4g is not positive"
                                 % (self.dac_id, self.k))
        if not self.gamma > 1:
            raise ParameterError("DAC %s: calibrated gamma %.4g is not above 1"
                                 % (self.dac_id, self.gamma))


def _slope(x, y):
    coefficients, covariance = np.polyfit(x, y, 1, cov='unscaled')
    residual = np.asarray(y) - np.polyval(coefficients, x)
    dof = max(1, len(x) - 2)
    variance = float(residual @ residual) / dof
    return float(coefficients[0]), float(np.sqrt(covariance[0, 0] * variance))


def calibrate_dac(dac, device, analog_line_mutual=None, rng_seed=None,
                  noise_steps=NOISE_FINE_STEPS, tolerance=CALIBRATION_TOLERANCE):
    """Measure k and gamma of a DAC through device feedback.

    The analog line mutual comes from the flux-quantum period of the
    device response. Then COARSE counts 0..5 and FINE counts spanning the
    whole FINE stage are programmed in turn; at each one the analog current
    restoring the device's reference point is measured. The slopes of
    compensation flux versus count give k and k/gamma. The DAC state is
    restored afterwards.

    Args:
        dac (TwoStageDac): DAC to measure; its true k and gamma are hidden
            in the simulation.
        device: QubitDevice or DcSquidDevice read by the DAC.
        analog_line_mutual (float): When given, sets the device's true
            analog mutual, in pH.
        rng_seed: Seed of the measurement noise stream.
        noise_steps (float): Standard deviation of the Gaussian noise on
            each compensation, in FINE steps of this DAC.
        tolerance (float): Root finding tolerance, in Phi0.

    Returns:
        A CalibrationRecord.
    """
    if device is None or not hasattr(device, 'compensation_current'):
        raise Unmeasurable("%s has no feedback observable" % dac.name)
    if analog_line_mutual is not None:
        device.analog_mutual = float(analog_line_mutual)
    sigma = noise_steps * dac.fine_step
    rng = make_rng(rng_seed, 'calibration', -1 if dac.dac_id is None else dac.dac_id)
    period = device.measure_period(0.0, tolerance)
    mutual = PHI0 / period * 1e12

    def compensation(n_coarse, n_fine):
        dac.load(n_coarse, n_fine)
        current = device.compensation_current(dac.output_flux(), tolerance)
        if sigma:
            current += sigma * period * rng.standard_normal()
        return current / period

    saved = dac.counts()
    coarse_counts = np.arange(min(CALIBRATION_COARSE_POINTS, dac.capacity_coarse + 1))
    fine_counts = np.arange(-dac.capacity_fine, dac.capacity_fine + 1)
    try:
        coarse = [compensation(int(n), 0) for n in coarse_counts]
        fine = [compensation(0, int(n)) for n in fine_counts]
    finally:
        dac.load(*saved)
    coarse_slope, coarse_error = _slope(coarse_counts, coarse)
    fine_slope, _ = _slope(fine_counts, fine)
    record = CalibrationRecord(dac.dac_id, -coarse_slope, coarse_slope / fine_slope,
                               mutual, coarse_error)
    notice(dac, "k = %.4f mPhi0, gamma = %.3f." % (record.k * 1e3, record.gamma))
    return record


def calibrate_all(processor, roles=CALIBRATED_ROLES, rng_seed=None,
                  noise_steps=NOISE_FINE_STEPS, dac_ids=None):
    """Calibrate every measurable DAC of a processor.

    Args:
        processor (VirtualProcessor): Chip to calibrate.
        roles (tuple): DAC roles to include.
        rng_seed: Seed of the measurement noise.
        noise_steps (float): See 'calibrate_dac()'.
        dac_ids (iterable): Restrict to these DACs.

    Returns:
        OrderedDict of DAC identifier to CalibrationRecord.
    """
    records = collections.OrderedDict()
    selected = sorted(processor.nodes) if dac_ids is None else list(dac_ids)
    for dac_id in selected:
        node = processor.nodes[dac_id]
        if node.role not in roles:
            continue
        if not node.is_measurable():
            notice(processor, "DAC %d (%s) has no observable, skipped."
                   % (dac_id, node.role))
            continue
        records[dac_id] = calibrate_dac(node.dac, node.device, rng_seed=rng_seed,
                                        noise_steps=noise_steps)
    return records


def save_calibration(filename, records):
    """Write records to a key=value file, one '[dac.<id>]' section each."""
    manager = PersistenceManager(filename, CALIBRATION_NAMESPACE)
    persistence_dict = manager.read_persistence_dictionary()
    for record in records.values():
        persistence_dict[manager.section_name(record.dac_id)] = {
            'k': record.k, 'gamma': record.gamma,
            'analog_mutual': record.analog_mutual,
            'uncertainty': record.uncertainty}
    manager.write_persistence_dictionary(persistence_dict)


def load_calibration(filename):
    """Read a calibration file.

    Returns:
        OrderedDict of DAC identifier to CalibrationRecord.
    """
    manager = PersistenceManager(filename, CALIBRATION_NAMESPACE)
    records = collections.OrderedDict()
    for name in manager.sections():
        section = manager.get(name)
        try:
            dac_id = int(name)
            records[dac_id] = CalibrationRecord(
                dac_id, float(section['k']), float(section['gamma']),
                float(section.get('analog_mutual', 'nan')),
                float(section.get('uncertainty', 0.0)))
        except (KeyError, ValueError) as error:
            raise ParameterError("%s: bad calibration section %r (%s)"
                                 % (filename, name, error))
    return records


def k_histogram(records, bins=10):
    """Histogram of calibrated k, in Phi0: (left edge, right edge, count) rows."""
    values = np.array([record.k for record in records.values()])
    counts, edges = np.histogram(values, bins=bins)
    return list(zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()))


class Controller(object):
    """Programming controller of a virtual processor.

    A single controller owns every tree and DAC of its processor, so pulse
    programs run strictly one after another.

    Args:
        processor (VirtualProcessor): Chip to drive.

    Attributes:
        processor (VirtualProcessor): Chip being driven.
        owner (VirtualProcessor): Same, used by notices.
    """
    def __init__(self, processor):
        self.processor = processor
        self.owner = processor

    def compile(self, current, targets, mode=INCREMENTAL):
        return compile_program(current, targets, mode, self.processor.nodes)

    def execute(self, program, rng_seed=None):
        devices = dict((dac_id, shell.node.device)
                       for dac_id, shell in self.processor.nodes.items())
        return execute_program(program, self.processor.interface,
                               self.processor.dacs(), rng_seed, devices)

    def program(self, targets, mode=INCREMENTAL, rng_seed=None):
        """Compile from the present chip state, run, and persist the result.

        Returns:
            (PulseProgram, ExecutionReport).
        """
        program = self.compile(self.processor.states(), targets, mode)
        report = self.execute(program, rng_seed)
        if self.processor.persistence():
            self.processor.persist_states()
        return program, report

    @staticmethod
    def program_cost(program):
        return program_cost(program)

    def calibrate_dac(self, dac_id, rng_seed=None, noise_steps=NOISE_FINE_STEPS):
        node = self.processor.node(dac_id)
        return calibrate_dac(node.dac, node.device, rng_seed=rng_seed,
                             noise_steps=noise_steps)

    def calibrate_all(self, roles=CALIBRATED_ROLES, rng_seed=None,
                      noise_steps=NOISE_FINE_STEPS, dac_ids=None):
        return calibrate_all(self.processor, roles, rng_seed, noise_steps, dac_ids)
