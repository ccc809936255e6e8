"""Noise module of the PMM digital twin.

Equivalent shunt resistance seen by a qubit through the flux DAC that
biases it, and the flux noise that resistance produces.

The DAC input junction is a resistor R_sh in parallel with the junction
inductance L_dj and capacitance C_dj. That shunt is in series with the DAC
storage inductance L_dac, and that loop couples through M into the qubit
body L_q, which closes on the qubit junction (L_qj parallel to C_qj).
Seen from the qubit junction terminals:

    Y_Q = 1/(jw L_qj) + jw C_qj + 1/(jw L_q + (w M)^2 / (Z_sh + jw L_dac))

and R_eq = 1 / Re(Y_Q).

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import logging
import math

import numpy as np

from pmmtwin.core import K_B, PHI0, NonPositiveFrequency, ParameterError

log = logging.getLogger("pmmtwin")

LUMPED_CEILING_HZ = 100e9
EMPTY = 'empty'
FULL = 'full'

PICO = 1e-12
NANO = 1e-9
FEMTO = 1e-15


@dataclasses.dataclass(frozen=True)
class NoiseCircuitParams(object):
    """Lumped circuit between a DAC input junction and a qubit.

    Inductances in pH except L_dac in nH, capacitances in fF, resistance in
    Ohm, temperature in K.
    """
    R_sh: float = 0.9
    L_dj_empty: float = 26.0
    L_dj_full: float = 36.0
    C_dj: float = 160.0
    L_dac: float = 3.6
    M: float = 10.2
    L_q: float = 320.0
    C_qj: float = 200.0
    L_qj: float = 91.0
    temperature: float = 0.020

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if getattr(self, field.name) <= 0:
                raise ParameterError("%s must be positive" % field.name)
        if self.L_dj_empty > self.L_dj_full:
            raise ParameterError("an empty DAC cannot have a larger junction "
                                 "inductance than a full one")

    def junction_inductance(self, dac_state):
        if dac_state == EMPTY:
            return self.L_dj_empty
        if dac_state == FULL:
            return self.L_dj_full
        raise ValueError("dac_state must be 'empty' or 'full'")


def admittance(params, f, dac_state=EMPTY):
    """Complex admittance Y_Q across the qubit junction terminals.

    Args:
        params (NoiseCircuitParams): Circuit values.
        f (float or array): Frequency, in Hz.
        dac_state (str): 'empty' or 'full'.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise NonPositiveFrequency("frequencies must be positive")
    w = 2.0 * math.pi * f
    jw = 1j * w
    l_dj = params.junction_inductance(dac_state) * PICO
    z_shunt = 1.0 / (1.0 / params.R_sh + 1.0 / (jw * l_dj) + jw * params.C_dj * FEMTO)
    z_dac = z_shunt + jw * params.L_dac * NANO
    z_loop = jw * params.L_q * PICO + (w * params.M * PICO) ** 2 / z_dac
    return (1.0 / (jw * params.L_qj * PICO) + jw * params.C_qj * FEMTO +
            1.0 / z_loop)


def r_eq(params, f, dac_state=EMPTY):
    """Equivalent shunt resistance 1/Re(Y_Q), in Ohm.

    Accepts a scalar or an array of frequencies and returns the same shape.
    """
    f_max = np.max(f)
    if f_max > LUMPED_CEILING_HZ:
        log.warning("lumped model evaluated at %.3g Hz, beyond its %.0f GHz "
                    "validity", f_max, LUMPED_CEILING_HZ / 1e9)
    result = 1.0 / np.real(admittance(params, f, dac_state))
    return float(result) if np.ndim(result) == 0 else result


def divider_estimate(params, dac_state=EMPTY):
    """Low frequency R_eq from the two current dividers, in Ohm."""
    l_dj = params.junction_inductance(dac_state)
    return (params.R_sh * (params.L_dac * 1e3 / l_dj) ** 2 *
            ((params.L_q + params.L_qj) / params.M) ** 2)


def flux_noise_density(r_eq_value, L_q, temperature):
    """Johnson flux noise L_q * sqrt(4 k_B T / R), in Phi0/sqrt(Hz).

    Args:
        r_eq_value (float): Resistance, in Ohm.
        L_q (float): Qubit inductance, in pH.
        temperature (float): In K.
    """
    if r_eq_value <= 0 or L_q <= 0 or temperature <= 0:
        raise ParameterError("resistance, inductance and temperature must be positive")
    if math.isinf(r_eq_value):
        return 0.0
    return L_q * PICO * math.sqrt(4.0 * K_B * temperature / r_eq_value) / PHI0


def ltuner_transfer_fraction(flux_bias, mismatch):
    """Share of L-tuner flux that leaks into the qubit body.

    A compound junction with relative junction mismatch d, biased at flux
    phi, shifts the qubit phase by arctan(d * tan(pi * phi)); at a quarter
    flux quantum this equals arctan(d), about d. The share is capped at the
    whole applied flux, which it reaches near half a flux quantum.

    Args:
        flux_bias (float): L-tuner bias, in Phi0, |flux_bias| <= 1/2.
        mismatch (float): Relative junction critical current mismatch.
    """
    if abs(flux_bias) > 0.5:
        raise ParameterError("L-tuner bias must lie within half a flux quantum")
    shift = math.atan(mismatch * math.tan(math.pi * flux_bias))
    return max(-1.0, min(1.0, shift))


SweepRow = collections.namedtuple('SweepRow', 'f_hz r_eq_empty r_eq_full')


def log_frequencies(decade_low, decade_high, points_per_decade):
    """Logarithmic frequency grid from 10**decade_low to 10**decade_high Hz."""
    if decade_high < decade_low or points_per_decade < 1:
        raise ParameterError("empty frequency sweep")
    count = int(round((decade_high - decade_low) * points_per_decade)) + 1
    return np.logspace(decade_low, decade_high, count)


def sweep(params, frequencies):
    """R_eq of an empty and a full DAC over a frequency grid."""
    empty = np.atleast_1d(r_eq(params, frequencies, EMPTY))
    full = np.atleast_1d(r_eq(params, frequencies, FULL))
    return [SweepRow(float(f), float(a), float(b))
            for f, a, b in zip(np.atleast_1d(frequencies), empty, full)]
