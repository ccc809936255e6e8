"""Device module of the PMM digital twin.

Models of the devices the flux DACs program: the compound Josephson
junction rf-SQUID qubit, the tunable coupler and the programmable gain
elements that scale a shared analog waveform per device, plus the
feedback observables used to calibrate DACs.

- 'QubitParams' record and 'potential', 'well_minima', 'degeneracy_point'.
- 'GainElement' and 'Waveform' records and 'scaled_signal'.
- 'CouplerCurve' record with 'coupler_mutual' and its inverse.
- 'QubitDevice', 'DcSquidDevice':
    Targets exposing a measurable compensation flux.

Energies are in units of Phi0*Ic/2pi and fluxes in units of Phi0 unless
stated otherwise.

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import math

import numpy as np
from scipy import optimize

from pmmtwin.core import PHI0, TWO_PI, OutOfSpan, ParameterError, SingleWell
from pmmtwin.utilities import notice

DEGENERACY_TOLERANCE = 1e-6
# CJJ bias at which cos(pi phi_cjj) = -1: a symmetric double well about
# phi_q_ext = 0, with barrier height set by beta_q.
CJJ_OPERATING_BIAS = 1.0
GRID_POINTS = 4001
IMBALANCE_LIMIT = 0.05


@dataclasses.dataclass(frozen=True)
class QubitParams(object):
    """rf-SQUID qubit parameters.

    Attributes:
        I_c_total (float): Sum of the CJJ critical currents, in uA.
        L_q (float): Qubit body inductance, in pH.
        L_cjj (float): CJJ loop inductance, in pH.
        ccjj_imbalance (float): Relative junction mismatch, corrected by the
            two CCJJ minor-lobe DACs.
    """
    I_c_total: float = 3.0
    L_q: float = 320.0
    L_cjj: float = 20.0
    ccjj_imbalance: float = 0.0

    def __post_init__(self):
        if self.I_c_total <= 0 or self.L_q <= 0 or self.L_cjj <= 0:
            raise ParameterError("qubit currents and inductances must be positive")
        if abs(self.ccjj_imbalance) > IMBALANCE_LIMIT:
            raise ParameterError("CCJJ imbalance %.3f beyond the correctable %.2f"
                                 % (self.ccjj_imbalance, IMBALANCE_LIMIT))

    @property
    def beta_q(self):
        return TWO_PI * self.L_q * 1e-12 * self.I_c_total * 1e-6 / PHI0

    @property
    def beta_cjj(self):
        return TWO_PI * self.L_cjj * 1e-12 * self.I_c_total * 1e-6 / PHI0


def potential(params, phi_q, phi_q_ext, phi_cjj, phi_cjj_ext):
    """Potential energy of the compound junction rf-SQUID.

    U = -cos(2 pi phi_q) cos(pi phi_cjj)
        + 2 pi^2 (phi_q - phi_q_ext)^2 / beta_q
        + 2 pi^2 (phi_cjj - phi_cjj_ext)^2 / beta_cjj

    Accepts numpy arrays for any flux argument.
    """
    two_pi_sq = 2.0 * math.pi ** 2
    return (-np.cos(TWO_PI * np.asarray(phi_q)) * np.cos(math.pi * np.asarray(phi_cjj)) +
            two_pi_sq * (np.asarray(phi_q) - phi_q_ext) ** 2 / params.beta_q +
            two_pi_sq * (np.asarray(phi_cjj) - phi_cjj_ext) ** 2 / params.beta_cjj)


def _qubit_potential(params, phi_q_ext, phi_cjj_ext):
    # CJJ loop held at its external bias.
    return lambda phi: potential(params, phi, phi_q_ext, phi_cjj_ext, phi_cjj_ext)


Well = collections.namedtuple('Well', 'phi energy')


def well_minima(params, phi_q_ext=0.0, phi_cjj_ext=CJJ_OPERATING_BIAS):
    """Local minima of U along phi_q, sorted by flux.

    A dense grid locates candidate wells, which are then refined with a
    bounded scalar minimisation.

    Returns:
        List of Well(phi, energy).
    """
    energy = _qubit_potential(params, phi_q_ext, phi_cjj_ext)
    grid = np.linspace(phi_q_ext - 1.0, phi_q_ext + 1.0, GRID_POINTS)
    values = energy(grid)
    step = grid[1] - grid[0]
    inner = np.flatnonzero((values[1:-1] < values[:-2]) &
                           (values[1:-1] <= values[2:])) + 1
    wells = []
    for index in inner:
        result = optimize.minimize_scalar(
            lambda x: float(energy(x)), method='bounded',
            bounds=(grid[index] - step, grid[index] + step),
            options={'xatol': 1e-12})
        wells.append(Well(float(result.x), float(result.fun)))
    return wells


def _depth_difference(params, phi_cjj_ext, total_flux):
    energy = _qubit_potential(params, total_flux, phi_cjj_ext)
    right = optimize.minimize_scalar(lambda x: float(energy(x)), method='bounded',
                                     bounds=(0.0, 0.5), options={'xatol': 1e-12})
    left = optimize.minimize_scalar(lambda x: float(energy(x)), method='bounded',
                                    bounds=(-0.5, 0.0), options={'xatol': 1e-12})
    return right.fun - left.fun


def wrap_flux(phi):
    """Map a flux onto (-1/2, 1/2]."""
    wrapped = phi - math.floor(phi + 0.5)
    return 0.5 if wrapped == -0.5 else wrapped


def degeneracy_point(params, phi_cjj_ext=CJJ_OPERATING_BIAS,
                     applied_offset=0.0, tolerance=DEGENERACY_TOLERANCE):
    """External qubit flux at which the two wells are equally deep.

    The qubit sees phi_q_ext + applied_offset, where the offset collects
    any DAC or analog flux already applied. Degeneracy is reached when that
    total is an integer number of flux quanta; the branch returned is the
    one within half a flux quantum of zero.

    Args:
        params (QubitParams): Qubit parameters.
        phi_cjj_ext (float): CJJ bias, in Phi0.
        applied_offset (float): Flux already applied to the body, in Phi0.
        tolerance (float): Bisection tolerance, in Phi0.

    Returns:
        phi_q_ext at degeneracy, in Phi0.
    """
    if len(well_minima(params, 0.0, phi_cjj_ext)) < 2:
        raise SingleWell("monostable at CJJ bias %.4f Phi0" % phi_cjj_ext)
    total = optimize.brentq(
        lambda t: _depth_difference(params, phi_cjj_ext, t), -0.2, 0.2,
        xtol=tolerance)
    return wrap_flux(total - applied_offset)


@dataclasses.dataclass(frozen=True)
class GainElement(object):
    """Programmable gain element feeding one device.

    Attributes:
        gain (float): Signed gain g, zero included.
        offset (float): Static offset a, in Phi0.
        controlling_dac (int): DAC that sets the gain.
    """
    gain: float = 0.0
    offset: float = 0.0
    controlling_dac: int = None


@dataclasses.dataclass(frozen=True)
class Waveform(object):
    """Sampled flux waveform: times (ns) and fluxes (Phi0)."""
    times: np.ndarray
    flux: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        flux = np.asarray(self.flux, dtype=float)
        if times.shape != flux.shape:
            raise ParameterError("waveform times and fluxes differ in length")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'flux', flux)

    @classmethod
    def ramp(cls, start, stop, points=101, duration=1.0):
        return cls(np.linspace(0.0, duration, points),
                   np.linspace(start, stop, points))

    def pairs(self):
        return list(zip(self.times.tolist(), self.flux.tolist()))


def scaled_signal(elem, phi_global):
    """Per-device copy of the master waveform, a + g * phi_global.

    Args:
        elem (GainElement): Gain and offset of the device.
        phi_global (Waveform or array): Master waveform.

    Returns:
        Same type as phi_global.
    """
    if isinstance(phi_global, Waveform):
        return Waveform(phi_global.times, elem.offset + elem.gain * phi_global.flux)
    return elem.offset + elem.gain * np.asarray(phi_global, dtype=float)


@dataclasses.dataclass(frozen=True)
class CouplerCurve(object):
    """Tunable coupler mutual inductance versus DAC flux.

    M(phi) = M_afm * c / (1 + chi * c), c = cos(pi * (phi + null_flux))

    A static bias of null_flux puts zero coupling at zero DAC flux. On
    |phi| <= 1/2 the curve is monotone, from M_afm/(1 + chi) (AFM) to
    -M_afm/(1 - chi) (FM).

    Attributes:
        m_afm (float): Mutual scale, in pH, negative for AFM coupling.
        chi (float): Susceptibility shape, 0 <= chi < 1.
        null_flux (float): Static bias, in Phi0.
        span (float): Largest |phi| the coupler DAC can apply, in Phi0.
        unit (float): Mutual equal to a normalised coupling of 1, in pH.
    """
    m_afm: float = -2.0
    chi: float = 0.25
    null_flux: float = 0.5
    span: float = 0.968
    unit: float = 1.6

    def __post_init__(self):
        if not 0.0 <= self.chi < 1.0:
            raise ParameterError("coupler chi must lie in [0, 1)")
        if self.m_afm >= 0:
            raise ParameterError("M_afm must be negative")

    @property
    def afm_limit(self):
        return self.m_afm / (1.0 + self.chi)

    @property
    def fm_limit(self):
        return -self.m_afm / (1.0 - self.chi)


DEFAULT_COUPLER = CouplerCurve()


def coupler_mutual(coupler_dac_flux, curve=DEFAULT_COUPLER):
    """Effective inter-qubit mutual inductance, in pH.

    Args:
        coupler_dac_flux (float): Flux applied by the coupler DAC, in Phi0.
        curve (CouplerCurve): Coupler shape.
    """
    if abs(coupler_dac_flux) > curve.span + 1e-12:
        raise OutOfSpan("coupler flux %.4f Phi0 beyond span %.3f"
                        % (coupler_dac_flux, curve.span))
    phase = coupler_dac_flux + curve.null_flux
    # math.cos leaves ~6e-17 at half-integer phase, where the mutual is exactly 0.
    c = 0.0 if phase % 1.0 == 0.5 else math.cos(math.pi * phase)
    return curve.m_afm * c / (1.0 + curve.chi * c)


def coupler_flux_for_mutual(mutual, curve=DEFAULT_COUPLER):
    """DAC flux giving a mutual, on the monotone branch |phi| <= 1/2."""
    if not curve.afm_limit - 1e-12 <= mutual <= curve.fm_limit + 1e-12:
        raise OutOfSpan("mutual %.4f pH outside [%.4f, %.4f] pH"
                        % (mutual, curve.afm_limit, curve.fm_limit))
    c = mutual / (curve.m_afm - curve.chi * mutual)
    c = min(1.0, max(-1.0, c))
    # c = cos(pi*(phi + 1/2)) = -sin(pi*phi) for the default null flux.
    return math.acos(c) / math.pi - curve.null_flux


def coupling_from_flux(flux, curve=DEFAULT_COUPLER):
    """Normalised coupling K, positive for AFM, programmed by a DAC flux."""
    return -coupler_mutual(flux, curve) / curve.unit


def flux_for_coupling(coupling, curve=DEFAULT_COUPLER):
    return coupler_flux_for_mutual(-coupling * curve.unit, curve)


def gain_from_flux(flux, curve=DEFAULT_COUPLER):
    """Signed gain of a coupler used as programmable gain element."""
    return coupler_mutual(flux, curve) / curve.unit


def flux_for_gain(gain, curve=DEFAULT_COUPLER):
    return coupler_flux_for_mutual(gain * curve.unit, curve)


class QubitDevice(object):
    """A qubit whose degeneracy point is the feedback observable.

    Args:
        params (QubitParams): Qubit parameters.
        analog_mutual (float): Analog bias line to qubit mutual, in pH.
        phi_cjj_ext (float): CJJ bias during the measurement, in Phi0.
        name (str): Name used in notices.
    """

    def __init__(self, params=None, analog_mutual=2.0,
                 phi_cjj_ext=CJJ_OPERATING_BIAS, name=None):
        self.params = params or QubitParams()
        self.analog_mutual = float(analog_mutual)
        self.phi_cjj_ext = phi_cjj_ext
        self.name = name
        self._degenerate_total = {}

    @property
    def analog_period(self):
        """Analog line current moving the qubit by one Phi0, in A."""
        return PHI0 / (self.analog_mutual * 1e-12)

    def compensation_flux(self, applied_flux, tolerance=DEGENERACY_TOLERANCE):
        """External flux restoring degeneracy, in Phi0.

        The degenerate total flux does not depend on what is applied, so it
        is solved once per tolerance and reused.
        """
        if tolerance not in self._degenerate_total:
            self._degenerate_total[tolerance] = degeneracy_point(
                self.params, self.phi_cjj_ext, 0.0, tolerance)
        return wrap_flux(self._degenerate_total[tolerance] - applied_flux)

    def compensation_current(self, applied_flux, tolerance=DEGENERACY_TOLERANCE):
        """Analog line current restoring degeneracy, in A."""
        current = self.compensation_flux(applied_flux, tolerance) * self.analog_period
        notice(self, "Degenerate at %.6g uA for %.6g mPhi0 applied."
               % (current * 1e6, applied_flux * 1e3))
        return current

    def measure_period(self, applied_flux=0.0, tolerance=DEGENERACY_TOLERANCE):
        """Current between two adjacent degeneracy points, in A.

        The analog line sweeps across two branches of the periodic response;
        the second branch sits one flux quantum further.
        """
        first = self.compensation_flux(applied_flux, tolerance)
        second = self.compensation_flux(applied_flux - 1.0, tolerance)
        # Both land on the same wrapped branch; the next one is a period on.
        separation = (second - first) % 1.0
        if separation < 0.5:
            separation += 1.0
        return separation * self.analog_period


class DcSquidDevice(object):
    """A break-out coupler wired as a dc-SQUID.

    Its switching threshold 2 Ic |cos(pi phi)| peaks when the analog line
    cancels the DAC flux, which serves as the feedback observable.

    Args:
        I_c (float): Junction critical current, in uA.
        analog_mutual (float): Analog line mutual, in pH.
    """

    def __init__(self, I_c=10.0, analog_mutual=2.0, name=None):
        self.I_c = float(I_c)
        self.analog_mutual = float(analog_mutual)
        self.name = name

    @property
    def analog_period(self):
        return PHI0 / (self.analog_mutual * 1e-12)

    def threshold(self, total_flux):
        """Switching current at a total applied flux, in uA."""
        return 2.0 * self.I_c * abs(math.cos(math.pi * total_flux))

    def compensation_flux(self, applied_flux, tolerance=DEGENERACY_TOLERANCE):
        center = wrap_flux(-applied_flux)
        result = optimize.minimize_scalar(
            lambda x: -self.threshold(applied_flux + x), method='bounded',
            bounds=(center - 0.25, center + 0.25),
            options={'xatol': min(tolerance, 1e-9)})
        return wrap_flux(float(result.x))

    def compensation_current(self, applied_flux, tolerance=DEGENERACY_TOLERANCE):
        return self.compensation_flux(applied_flux, tolerance) * self.analog_period

    def measure_period(self, applied_flux=0.0, tolerance=DEGENERACY_TOLERANCE):
        return self.analog_period
