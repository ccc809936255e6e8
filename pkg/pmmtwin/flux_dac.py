"""Flux DAC module of the PMM digital twin.

Models the two-stage multiple flux quantum DAC: signed storage of flux
quanta in a COARSE and a FINE stage with saturation, the coupling constants
derived from the flux transformer, the output flux into the target device
and the reset procedure.

- 'DacTypeParams' record:
    Coupling constant, division ratio and stage capacities of a DAC type.
- 'DacStage' class:
    One storage loop with its reset SQUID.
- 'TwoStageDac' class:
    A COARSE/FINE pair coupled into a target through a flux transformer.
- 'InductanceMatrix3' record:
    Three-port inductance matrix of the transformer.
- Operations: 'apply_quantum', 'output_flux', 'k_gamma_from_inductances',
  'reset_stage', 'coverage_check', 'staircase', 'level_count', 'dac_table'.

Output flux of a DAC holding N_C COARSE and N_F FINE quanta is
k * (N_C + N_F / gamma), in units of the flux quantum.

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import logging
import math

import numpy as np

from pmmtwin.core import COARSE, FINE, TWO_PI, ParameterError, \
    SingularInductance
from pmmtwin.utilities import PersistenceManager, as_rng, notice

log = logging.getLogger("pmmtwin")

DESIGNED = 'designed'
ACHIEVED = 'achieved'
PARAMETER_SETS = (DESIGNED, ACHIEVED)

DAC_TYPE_NAMES = ('QubitFlux', 'CcjjMinor', 'LTuner', 'Coupler')

BETA_MIN = 75.0
BETA_MAX = 300.0
RESET_MISMATCH_LIMIT = 0.05
FABRICATION_SIGMA = 0.012

# Residual left by one reset pulse when the reset junctions are mismatched.
DEFAULT_RESIDUAL_DISTRIBUTION = {0: 0.5, 1: 0.2, -1: 0.2, 2: 0.05, -2: 0.05}


def beta_for_capacity(capacity):
    """Screening parameter of a stage that holds 'capacity' quanta."""
    return min(BETA_MAX, max(BETA_MIN, TWO_PI * (capacity + 0.5)))


def capacity_from_beta(beta):
    return int(math.floor(beta / TWO_PI))


@dataclasses.dataclass(frozen=True)
class DacTypeParams(object):
    """Parameters shared by every DAC of one type.

    Attributes:
        name (str): 'QubitFlux', 'CcjjMinor', 'LTuner' or 'Coupler'.
        k (float): Flux into the target per stored COARSE quantum, in Phi0.
        gamma (float): COARSE/FINE division ratio.
        capacity_coarse (int): Largest |N_C|.
        capacity_fine (int): Largest |N_F|.
        beta_coarse (float): COARSE stage screening parameter.
        beta_fine (float): FINE stage screening parameter.
    """
    name: str
    k: float
    gamma: float
    capacity_coarse: int
    capacity_fine: int
    beta_coarse: float = None
    beta_fine: float = None

    def __post_init__(self):
        if self.k <= 0:
            raise ParameterError("%s: k must be positive" % self.name)
        if self.gamma <= 1:
            raise ParameterError("%s: gamma must exceed 1" % self.name)
        if self.capacity_coarse < 0 or self.capacity_fine < 0:
            raise ParameterError("%s: negative capacity" % self.name)
        if self.beta_coarse is None:
            object.__setattr__(self, 'beta_coarse',
                               beta_for_capacity(self.capacity_coarse))
        if self.beta_fine is None:
            object.__setattr__(self, 'beta_fine',
                               beta_for_capacity(self.capacity_fine))

    @property
    def coarse_step(self):
        return self.k

    @property
    def fine_step(self):
        return self.k / self.gamma

    @property
    def max_coupled_flux(self):
        """COARSE contribution at saturation, in Phi0."""
        return self.k * self.capacity_coarse

    @property
    def span(self):
        """Largest |output flux|, both stages saturated, in Phi0."""
        return self.k * (self.capacity_coarse + self.capacity_fine / self.gamma)


def _from_steps(name, coarse_mphi0, fine_mphi0, capacity_coarse, capacity_fine):
    return DacTypeParams(name, coarse_mphi0 * 1e-3, coarse_mphi0 / fine_mphi0,
                         capacity_coarse, capacity_fine)


# Design targets: COARSE step, division ratio and capacities per type.
DESIGNED_TYPES = collections.OrderedDict([
    ('QubitFlux', DacTypeParams('QubitFlux', 3.0e-3, 14.1, 17, 17)),
    ('CcjjMinor', DacTypeParams('CcjjMinor', 5.6e-3, 14.1, 17, 17)),
    ('LTuner', DacTypeParams('LTuner', 11.3e-3, 10.7, 40, 10)),
    ('Coupler', DacTypeParams('Coupler', 23.6e-3, 10.6, 40, 10)),
])

# Measured on the fabricated chip: step sizes in mPhi0 and COARSE capacities.
ACHIEVED_TYPES = collections.OrderedDict([
    ('QubitFlux', _from_steps('QubitFlux', 3.506, 0.268, 22, 17)),
    ('CcjjMinor', _from_steps('CcjjMinor', 3.899, 0.296, 22, 17)),
    ('LTuner', _from_steps('LTuner', 8.481, 1.061, 40, 10)),
    ('Coupler', _from_steps('Coupler', 19.0221, 1.788, 35, 10)),
])

DAC_TYPES = {DESIGNED: DESIGNED_TYPES, ACHIEVED: ACHIEVED_TYPES}


def dac_type_params(dac_type, parameter_set=DESIGNED):
    """Look up the built-in parameters of a DAC type."""
    try:
        return DAC_TYPES[parameter_set][dac_type]
    except KeyError:
        raise ParameterError("unknown DAC type %r in parameter set %r"
                             % (dac_type, parameter_set))


class DacStage(object):
    """One storage loop of a flux DAC.

    Args:
        capacity (int): Largest number of quanta of either polarity.
        beta (float): Screening parameter 2*pi*L*Ic/Phi0. Derived from the
            capacity when omitted.
        reset_junction_mismatch (float): Relative critical current difference
            of the two reset SQUID junctions.
        stored (int): Initial stored count.

    Attributes:
        stored (int): Signed number of stored quanta. |stored| never exceeds
            capacity.
    """

    def __init__(self, capacity, beta=None, reset_junction_mismatch=0.0,
                 stored=0):
        if capacity < 0:
            raise ParameterError("stage capacity must not be negative")
        if abs(stored) > capacity:
            raise ParameterError("stored count %d exceeds capacity %d"
                                 % (stored, capacity))
        self.capacity = int(capacity)
        self.beta = beta_for_capacity(capacity) if beta is None else float(beta)
        self.reset_junction_mismatch = float(reset_junction_mismatch)
        self.stored = int(stored)

    def apply(self, sign):
        """Add one quantum of the given sign.

        Returns:
            True if the quantum was stored, False if the stage is saturated.
        """
        if abs(self.stored + sign) > self.capacity:
            return False
        self.stored += sign
        return True

    def reset_floor_quanta(self):
        """Quanta the suppressed reset SQUID can still hold."""
        return int(math.floor(self.beta * abs(self.reset_junction_mismatch)
                              / TWO_PI))

    def copy(self):
        return DacStage(self.capacity, self.beta, self.reset_junction_mismatch,
                        self.stored)

    def __repr__(self):
        return "DacStage(stored=%d, capacity=%d)" % (self.stored, self.capacity)


class TwoStageDac(object):
    """A COARSE/FINE flux DAC.

    Args:
        dac_type (str): DAC type name.
        k (float): Coupling constant, in Phi0 per COARSE quantum.
        gamma (float): COARSE/FINE division ratio, larger than 1.
        coarse (DacStage): COARSE stage.
        fine (DacStage): FINE stage.
        dac_id (int): Chip-wide DAC identifier, if any.
        parameter_set (str): 'designed' or 'achieved'.
    """

    def __init__(self, dac_type, k, gamma, coarse, fine, dac_id=None,
                 parameter_set=DESIGNED):
        if gamma <= 1:
            raise ParameterError("gamma must exceed 1")
        self.dac_type = dac_type
        self.k = float(k)
        self.gamma = float(gamma)
        self.coarse = coarse
        self.fine = fine
        self.dac_id = dac_id
        self.parameter_set = parameter_set

    @classmethod
    def from_params(cls, params, dac_id=None, parameter_set=DESIGNED,
                    reset_junction_mismatch=0.0):
        """Build an empty DAC from a DacTypeParams record."""
        return cls(params.name, params.k, params.gamma,
                   DacStage(params.capacity_coarse, params.beta_coarse,
                            reset_junction_mismatch),
                   DacStage(params.capacity_fine, params.beta_fine,
                            reset_junction_mismatch),
                   dac_id=dac_id, parameter_set=parameter_set)

    @classmethod
    def from_type(cls, dac_type, parameter_set=DESIGNED, dac_id=None,
                  reset_junction_mismatch=0.0):
        return cls.from_params(dac_type_params(dac_type, parameter_set),
                               dac_id, parameter_set, reset_junction_mismatch)

    @property
    def name(self):
        if self.dac_id is None:
            return "%s DAC" % self.dac_type
        return "DAC %d (%s)" % (self.dac_id, self.dac_type)

    def stage(self, stage):
        if stage == COARSE:
            return self.coarse
        if stage == FINE:
            return self.fine
        raise ValueError("unknown stage %r" % (stage,))

    @property
    def capacity_coarse(self):
        return self.coarse.capacity

    @property
    def capacity_fine(self):
        return self.fine.capacity

    @property
    def fine_step(self):
        return self.k / self.gamma

    @property
    def span(self):
        return self.k * (self.coarse.capacity + self.fine.capacity / self.gamma)

    def counts(self):
        """Stored (N_C, N_F)."""
        return self.coarse.stored, self.fine.stored

    def load(self, n_coarse, n_fine):
        """Overwrite both counters, for fixtures and calibration sweeps."""
        if abs(n_coarse) > self.coarse.capacity or abs(n_fine) > self.fine.capacity:
            raise ParameterError("%s cannot hold (%d, %d)"
                                 % (self.name, n_coarse, n_fine))
        self.coarse.stored = int(n_coarse)
        self.fine.stored = int(n_fine)

    def flux_of(self, n_coarse, n_fine):
        return self.k * (n_coarse + n_fine / self.gamma)

    def output_flux(self):
        return self.flux_of(self.coarse.stored, self.fine.stored)

    def with_spread(self, rng, sigma=FABRICATION_SIGMA):
        """Copy of this DAC whose k is perturbed by a relative Gaussian spread.

        Args:
            rng: numpy Generator or seed.
            sigma (float): Relative standard deviation of k.
        """
        rng = as_rng(rng, 'spread', -1 if self.dac_id is None else self.dac_id)
        factor = 1.0 + sigma * rng.standard_normal()
        return TwoStageDac(self.dac_type, self.k * factor, self.gamma,
                           self.coarse.copy(), self.fine.copy(),
                           dac_id=self.dac_id, parameter_set=self.parameter_set)

    def __repr__(self):
        return "TwoStageDac(%s, N_C=%d, N_F=%d)" % (self.name, self.coarse.stored,
                                                    self.fine.stored)


def apply_quantum(dac, stage, sign):
    """Route one signed quantum into a DAC stage.

    Saturation is a reported outcome: the state is left unchanged.

    Args:
        dac (TwoStageDac): DAC to update in place.
        stage (str): 'COARSE' or 'FINE'.
        sign (int): +1 or -1.

    Returns:
        (dac, stored) where stored is False when the stage was saturated.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    stored = dac.stage(stage).apply(sign)
    if not stored:
        notice(dac, "%s saturated at %d." % (stage, dac.stage(stage).stored))
    return dac, stored


def output_flux(dac):
    """Output flux k * (N_C + N_F / gamma), in Phi0."""
    return dac.output_flux()


@dataclasses.dataclass(frozen=True)
class InductanceMatrix3(object):
    """Three-port inductance matrix over (FINE, COARSE, TARGET), in pH."""
    L_fine: float
    L_coarse: float
    L_target: float
    M_fine_coarse: float
    M_fine_target: float
    M_coarse_target: float

    def matrix(self):
        return np.array([
            [self.L_fine, self.M_fine_coarse, self.M_fine_target],
            [self.M_fine_coarse, self.L_coarse, self.M_coarse_target],
            [self.M_fine_target, self.M_coarse_target, self.L_target],
        ])

    @property
    def relative_sign(self):
        """Sign of the FINE coupling relative to the COARSE coupling."""
        return int(np.sign(self.M_fine_target) * np.sign(self.M_coarse_target))


# Extracted transformer of the qubit flux DAC.
TRANSFORMER_MATRIX = InductanceMatrix3(L_fine=3500.0, L_coarse=3900.0,
                                       L_target=7.8, M_fine_coarse=9.9,
                                       M_fine_target=0.7,
                                       M_coarse_target=-10.2)

KGamma = collections.namedtuple('KGamma', 'k gamma')


def k_gamma_from_inductances(m):
    """Coupling constant and division ratio of a transformer.

    Each storage loop holding N quanta circulates I = N*Phi0/L, which couples
    M*I into the target. Only magnitudes of the mutuals are used.

    Args:
        m (InductanceMatrix3): Transformer inductances.

    Returns:
        KGamma(k, gamma).
    """
    if min(m.L_fine, m.L_coarse, m.L_target) <= 0:
        raise SingularInductance("self inductances must be positive")
    k_coarse = abs(m.M_coarse_target) / m.L_coarse
    k_fine = abs(m.M_fine_target) / m.L_fine
    if k_fine == 0:
        raise SingularInductance("FINE stage does not couple to the target")
    return KGamma(k_coarse, k_coarse / k_fine)


def reset_stage(stage, pulse_count, rng_seed=None,
                residual_distribution=None):
    """Empty a stage with reset pulses.

    Each pulse half-biases the reset SQUID. With reset junctions matched
    within 5 % one pulse releases everything. Otherwise a pulse may leave a
    residual drawn from 'residual_distribution'; a pulse applied to a stage
    that already holds only a residual always releases at least one more
    quantum, so residuals shrink until the stage is empty.

    Args:
        stage (DacStage): Stage to reset in place.
        pulse_count (int): Number of reset pulses, at least 1.
        rng_seed: Seed or numpy Generator.
        residual_distribution (dict): Signed residual to probability.

    Returns:
        Stored count left in the stage.
    """
    if pulse_count < 1:
        raise ValueError("pulse_count must be at least 1")
    if abs(stage.reset_junction_mismatch) <= RESET_MISMATCH_LIMIT:
        stage.stored = 0
        return 0
    distribution = residual_distribution or DEFAULT_RESIDUAL_DISTRIBUTION
    values = np.array(sorted(distribution), dtype=int)
    weights = np.array([distribution[v] for v in values], dtype=float)
    rng = as_rng(rng_seed, 'reset')
    floor = stage.reset_floor_quanta()
    if floor:
        log.debug("reset SQUID with mismatch %.3f can hold %d quanta",
                  stage.reset_junction_mismatch, floor)
    for _ in range(pulse_count):
        if stage.stored == 0:
            break
        allowed = np.abs(values) < abs(stage.stored)
        p = weights * allowed
        stage.stored = int(rng.choice(values, p=p / p.sum()))
    return stage.stored


CoverageCheck = collections.namedtuple('CoverageCheck', 'overlap_ratio covered')


def coverage_check(dac):
    """Check that the FINE span bridges a COARSE step.

    Args:
        dac: TwoStageDac or DacTypeParams.

    Returns:
        CoverageCheck(overlap_ratio, covered), ratio = 2 * capacity_fine / gamma.
    """
    ratio = 2.0 * dac.capacity_fine / dac.gamma
    return CoverageCheck(ratio, ratio >= 1.0)


StairStep = collections.namedtuple('StairStep',
                                   'coarse fine n_coarse n_fine flux saturated')


def staircase(dac, coarse_values, fine_values=(0,)):
    """Output flux versus programmed counts, saturation included.

    Every point is programmed from an empty DAC by sending |value| quanta
    per stage, so requests beyond capacity show the saturated plateau.

    Args:
        dac (TwoStageDac): DAC model; its own counters are not touched.
        coarse_values (iterable): Requested COARSE counts.
        fine_values (iterable): Requested FINE counts for each COARSE count.

    Returns:
        List of StairStep records.
    """
    steps = []
    for coarse in coarse_values:
        for fine in fine_values:
            n_coarse = int(np.clip(coarse, -dac.capacity_coarse, dac.capacity_coarse))
            n_fine = int(np.clip(fine, -dac.capacity_fine, dac.capacity_fine))
            steps.append(StairStep(coarse, fine, n_coarse, n_fine,
                                   dac.flux_of(n_coarse, n_fine),
                                   (n_coarse, n_fine) != (coarse, fine)))
    return steps


def fine_sweeps_overlap(dac, coarse_values):
    """True when FINE sweeps at consecutive COARSE settings leave no gap."""
    cap = dac.capacity_fine
    for low, high in zip(coarse_values[:-1], coarse_values[1:]):
        if dac.flux_of(low, cap) < dac.flux_of(high, -cap):
            return False
    return True


def level_count(dac):
    """Distinct outputs on the FINE grid between the two saturated extremes."""
    return int(math.floor(2.0 * dac.span / (dac.k / dac.gamma) + 1e-9)) + 1


def effective_bits(dac):
    return math.log2(level_count(dac))


DacTableRow = collections.namedtuple(
    'DacTableRow', 'dac_type parameter_set coarse_step_mphi0 fine_step_mphi0 '
                   'gamma capacity_coarse capacity_fine max_coupled_flux '
                   'overlap_ratio levels')


def dac_table(parameter_set=None):
    """Summary rows of the built-in DAC types, one per (set, type)."""
    sets = PARAMETER_SETS if parameter_set is None else (parameter_set,)
    rows = []
    for name in sets:
        for params in DAC_TYPES[name].values():
            rows.append(DacTableRow(params.name, name, params.k * 1e3,
                                    params.fine_step * 1e3, params.gamma,
                                    params.capacity_coarse, params.capacity_fine,
                                    params.max_coupled_flux,
                                    coverage_check(params).overlap_ratio,
                                    level_count(params)))
    return rows


PARAMETER_KEYS = ('k', 'gamma', 'capacity_coarse', 'capacity_fine',
                  'beta_coarse', 'beta_fine')


def load_parameter_table(filename, base=DESIGNED):
    """Read DAC type parameters from a key=value file.

    Types or keys missing from the file keep the values of the 'base'
    built-in set.

    Returns:
        OrderedDict of type name to DacTypeParams.
    """
    manager = PersistenceManager(filename)
    table = collections.OrderedDict(DAC_TYPES[base])
    for name in manager.sections():
        if name not in DAC_TYPE_NAMES:
            raise ParameterError("%s: unknown DAC type section %r"
                                 % (filename, name))
        values = dataclasses.asdict(table[name])
        section = manager.get(name)
        for key in PARAMETER_KEYS:
            if key in section:
                values[key] = float(section[key])
        for key in ('capacity_coarse', 'capacity_fine'):
            values[key] = int(values[key])
        if 'capacity_coarse' in section and 'beta_coarse' not in section:
            values['beta_coarse'] = None
        if 'capacity_fine' in section and 'beta_fine' not in section:
            values['beta_fine'] = None
        table[name] = DacTypeParams(**values)
    return table


def save_parameter_table(filename, table):
    manager = PersistenceManager(filename)
    for name, params in table.items():
        manager.store(name, dict((key, getattr(params, key))
                                 for key in PARAMETER_KEYS))
