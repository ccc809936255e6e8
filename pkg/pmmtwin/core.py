"""Core module of the PMM digital twin.

Physical constants shared by every model and the exception hierarchy used
across the package.

- 'PmmError' class:
    Root of all domain errors. Every other exception in this module inherits
    from it, so callers (mainly the command line) can catch a single class.
- Routing errors: 'OutOfMargin', 'Broadcast'.
- Statistics errors: 'InvalidCount'.
- Circuit and device errors: 'SingularInductance', 'NonPositiveFrequency',
  'SingleWell', 'OutOfSpan'.
- Annealer errors: 'SpinDomain', 'TooLarge', 'BadSchedule', 'OutOfRange'.
- Controller errors: 'CapacityExceeded', 'Unmeasurable'.
- Input errors: 'ParameterError', 'ProblemFormatError'.

Copyright (c) 2018 Daniel Marquina
"""

import math

# Magnetic flux quantum h/2e, in Wb.
PHI0 = 2.067833848e-15
# Boltzmann constant, in J/K.
K_B = 1.380649e-23

TWO_PI = 2.0 * math.pi

COARSE = 'COARSE'
FINE = 'FINE'
STAGES = (COARSE, FINE)


class PmmError(Exception):
    """Base class of every error raised by the twin."""
    pass


class OutOfMargin(PmmError):
    """Tree bias current outside the gate operating margins.

    Args:
        bias (float): Offending bias current, in uA.
        low (float): Lower margin, in uA.
        high (float): Upper margin, in uA.
    """
    def __init__(self, bias, low, high):
        self.bias = bias
        self.low = low
        self.high = high
        super(OutOfMargin, self).__init__(
            "bias %.3f uA outside margins [%.3f, %.3f] uA" % (bias, low, high))


class Broadcast(PmmError):
    """Tree overbiased: every gate duplicates instead of steering.

    Args:
        bias (float): Offending bias current, in uA.
        leaves (frozenset): Every leaf that received a copy of the pulse.
    """
    def __init__(self, bias, leaves):
        self.bias = bias
        self.leaves = frozenset(leaves)
        super(Broadcast, self).__init__(
            "bias %.3f uA broadcasts to %d leaves" % (bias, len(self.leaves)))


class InvalidCount(PmmError):
    pass


class SingularInductance(PmmError):
    pass


class NonPositiveFrequency(PmmError):
    pass


class SingleWell(PmmError):
    """Potential is monostable, so no degeneracy point exists."""
    pass


class OutOfSpan(PmmError):
    pass


class SpinDomain(PmmError):
    pass


class TooLarge(PmmError):
    pass


class BadSchedule(PmmError):
    pass


class OutOfRange(PmmError):
    """Requested flux beyond what a DAC can represent.

    Args:
        what (str): Parameter being mapped, e.g. 'h[3]' or 'K[0,4]'.
        flux (float): Requested flux, in Phi0.
        span (float): Largest representable magnitude, in Phi0.
    """
    def __init__(self, what, flux, span):
        self.what = what
        self.flux = flux
        self.span = span
        super(OutOfRange, self).__init__(
            "%s needs %.6g Phi0, DAC span is %.6g Phi0" % (what, flux, span))


class CapacityExceeded(PmmError):
    """A programming target does not fit in a DAC stage.

    Args:
        dac_id (int): DAC identifier.
        stage (str): 'COARSE' or 'FINE'.
        target (int): Requested stored count.
        capacity (int): Stage capacity.
    """
    def __init__(self, dac_id, stage, target, capacity):
        self.dac_id = dac_id
        self.stage = stage
        self.target = target
        self.capacity = capacity
        super(CapacityExceeded, self).__init__(
            "DAC %d %s target %d exceeds capacity %d"
            % (dac_id, stage, target, capacity))


class Unmeasurable(PmmError):
    pass


class ParameterError(PmmError):
    pass


class ProblemFormatError(PmmError):
    """Malformed problem, schedule or configuration file.

    Args:
        filename (str): File being parsed.
        line_number (int): 1-based line of the offending record.
        reason (str): What is wrong with it.
    """
    def __init__(self, filename, line_number, reason):
        self.filename = filename
        self.line_number = line_number
        super(ProblemFormatError, self).__init__(
            "%s:%d: %s" % (filename, line_number, reason))
