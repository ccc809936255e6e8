"""Annealer module of the PMM digital twin.

Desk-scale annealing of Ising problems: objective evaluation, an exhaustive
oracle, state-vector evolution of H(s) = A(s) H_I + B(s) H_F with
H_I = +sum(sigma_x), outcome sampling, and the mapping of a normalised
problem onto integer DAC targets.

- 'IsingProblem' class, with 'read_problem' and 'write_problem'.
- 'AnnealSchedule' class:
    Tabulated envelopes A(s), B(s), run time and integrator settings.
- 'AnnealResult' record.
- Operations: 'objective', 'brute_force_minimize', 'anneal',
  'quantize_problem', 'dequantize'.

Basis convention: qubit j is bit (n-1-j) of the basis index and bit 0
means spin +1. Time is in ns, energies in rad/ns (hbar = 1).

Copyright (c) 2018 Daniel Marquina
"""

import collections
import dataclasses
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from pmmtwin import device, flux_dac, topology
from pmmtwin.core import BadSchedule, OutOfRange, OutOfSpan, ParameterError, \
    ProblemFormatError, SpinDomain, TooLarge
from pmmtwin.utilities import make_rng, notice

BRUTE_FORCE_LIMIT = 24
ANNEAL_LIMIT = 12
DENSE_GROUND_LIMIT = 256
ENUMERATION_CHUNK = 1 << 20
E0 = 2.0 * math.pi
SCHEDULE_POINTS = 1024
MIN_STEPS = 1000
START_RATIO = 100.0
END_RATIO = 0.01
EXPM = 'expm'
SPLIT = 'split'


class IsingProblem(object):
    """Ising objective sum(h_j s_j) + sum(K_ij s_i s_j).

    Args:
        n (int): Number of spins.
        h (array-like): Biases, length n.
        K (dict): (i, j) to coupling, i < j. Pairs given as (j, i) are
            reordered.
        edges (iterable): Allowed (i, j) pairs; when given, every coupling
            must lie on one of them.
    """

    def __init__(self, n, h=None, K=None, edges=None):
        self.n = int(n)
        self.h = np.zeros(self.n) if h is None else np.asarray(h, dtype=float)
        if self.h.shape != (self.n,):
            raise ParameterError("h must have length %d" % self.n)
        self.edges = None if edges is None else frozenset(
            (min(i, j), max(i, j)) for i, j in edges)
        self.K = collections.OrderedDict()
        for (i, j), value in sorted((K or {}).items()):
            key = (min(i, j), max(i, j))
            if i == j or not 0 <= key[0] < key[1] < self.n:
                raise ParameterError("invalid coupling index (%d, %d)" % (i, j))
            if self.edges is not None and key not in self.edges:
                raise ParameterError("coupling (%d, %d) is not an allowed edge" % key)
            self.K[key] = float(value)
        if not np.all(np.isfinite(self.h)) or not all(
                math.isfinite(v) for v in self.K.values()):
            raise ParameterError("h and K must be finite")

    def __repr__(self):
        return "IsingProblem(n=%d, couplings=%d)" % (self.n, len(self.K))


def read_problem(filename, edges=None, n=None):
    """Read a problem file.

    Records are 'h <j> <value>' or 'K <i> <j> <value>' with 0-based indices;
    lines starting with '#' are comments.

    Args:
        filename (str): Problem file.
        edges (iterable): Allowed edge set; couplings off it are rejected.
        n (int): Spin count, inferred from the largest index when omitted.
    """
    h = {}
    K = {}
    allowed = None if edges is None else frozenset(
        (min(i, j), max(i, j)) for i, j in edges)
    with open(filename, 'r', encoding='utf-8') as file_object:
        for number, line in enumerate(file_object, 1):
            fields = line.split()
            if not fields or fields[0].startswith('#'):
                continue
            try:
                if fields[0] == 'h' and len(fields) == 3:
                    key, value, store = int(fields[1]), float(fields[2]), h
                    if key < 0:
                        raise ValueError("negative index")
                elif fields[0] == 'K' and len(fields) == 4:
                    i, j = int(fields[1]), int(fields[2])
                    if i == j or min(i, j) < 0:
                        raise ValueError("invalid pair")
                    key, value, store = (min(i, j), max(i, j)), float(fields[3]), K
                    if allowed is not None and key not in allowed:
                        raise ProblemFormatError(filename, number,
                                                 "edge %d-%d not on the chip" % key)
                else:
                    raise ValueError("expected 'h j v' or 'K i j v'")
            except ValueError as error:
                raise ProblemFormatError(filename, number, str(error))
            if key in store:
                raise ProblemFormatError(filename, number, "duplicate record")
            store[key] = value
    largest = max([j for j in h] + [j for pair in K for j in pair] + [-1])
    if n is None:
        n = largest + 1
    elif largest >= n:
        raise ProblemFormatError(filename, 0, "index %d beyond %d spins"
                                 % (largest, n))
    vector = np.zeros(n)
    for j, value in h.items():
        vector[j] = value
    return IsingProblem(n, vector, K, allowed)


def write_problem(filename, problem):
    with open(filename, 'w', encoding='utf-8') as file_object:
        file_object.write("# %d spins, %d couplings\n" % (problem.n, len(problem.K)))
        for j, value in enumerate(problem.h):
            if value != 0.0:
                file_object.write("h %d %r\n" % (j, float(value)))
        for (i, j), value in problem.K.items():
            file_object.write("K %d %d %r\n" % (i, j, value))


def objective(p, s):
    """Energy of a spin vector.

    Args:
        p (IsingProblem): Problem.
        s (sequence): Spins in {-1, +1}.
    """
    spins = [int(x) if x in (-1, 1) else x for x in s]
    if len(spins) != p.n or any(x not in (-1, 1) for x in spins):
        raise SpinDomain("spins must be %d values in {-1, +1}" % p.n)
    energy = 0.0
    for j in range(p.n):
        energy += float(p.h[j]) * spins[j]
    for (i, j), value in p.K.items():
        energy += value * spins[i] * spins[j]
    return energy


def basis_spins(n, indices):
    """Spin rows of basis states, qubit j read from bit n-1-j."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (indices[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def diagonal_energies(p, start=0, stop=None):
    """Problem energies of basis states start..stop-1."""
    stop = (1 << p.n) if stop is None else stop
    spins = basis_spins(p.n, np.arange(start, stop)).astype(float)
    energies = spins @ p.h
    for (i, j), value in p.K.items():
        energies += value * spins[:, i] * spins[:, j]
    return energies


def brute_force_minimize(p):
    """Exact minimum by enumeration of all 2**n spin vectors.

    Returns:
        (optimal energy, list of minimising spin tuples).
    """
    if p.n > BRUTE_FORCE_LIMIT:
        raise TooLarge("brute force is limited to %d spins" % BRUTE_FORCE_LIMIT)
    best = math.inf
    winners = []
    total = 1 << p.n
    for start in range(0, total, ENUMERATION_CHUNK):
        stop = min(total, start + ENUMERATION_CHUNK)
        energies = diagonal_energies(p, start, stop)
        low = energies.min()
        scale = 1e-9 * max(1.0, abs(low))
        if low < best - scale:
            best = low
            winners = []
        if low <= best + scale:
            hits = np.flatnonzero(energies <= best + scale) + start
            winners.extend(int(k) for k in hits)
    minimizers = [tuple(int(x) for x in row) for row in basis_spins(p.n, winners)]
    exact = min(objective(p, s) for s in minimizers)
    return exact, minimizers


class AnnealSchedule(object):
    """Envelopes and run time of an anneal.

    Args:
        s (array-like): Strictly increasing grid from 0 to 1.
        A (array-like): Transverse envelope on the grid, in rad/ns.
        B (array-like): Problem envelope on the grid, in rad/ns.
        t_f (float): Run time, in ns. Zero means a sudden quench.
        steps (int): Integrator steps; chosen from the problem when None.
        method (str): 'expm' (per-step matrix exponential) or 'split'
            (second-order split operator).
    """

    def __init__(self, s, A, B, t_f, steps=None, method=EXPM):
        self.s = np.asarray(s, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.t_f = float(t_f)
        self.steps = steps
        self.method = method
        self.validate()

    @classmethod
    def default(cls, t_f, steps=None, method=EXPM, points=SCHEDULE_POINTS,
                e0=E0):
        """A(s) = e0 (1-s)^3, B(s) = e0 s on an even grid."""
        s = np.linspace(0.0, 1.0, points)
        return cls(s, e0 * (1.0 - s) ** 3, e0 * s, t_f, steps, method)

    @classmethod
    def from_file(cls, filename, t_f, steps=None, method=EXPM):
        """Read whitespace separated 's A B' rows, '#' comments allowed."""
        rows = []
        with open(filename, 'r', encoding='utf-8') as file_object:
            for number, line in enumerate(file_object, 1):
                fields = line.split()
                if not fields or fields[0].startswith('#'):
                    continue
                try:
                    rows.append([float(x) for x in fields])
                except ValueError as error:
                    raise ProblemFormatError(filename, number, str(error))
                if len(fields) != 3:
                    raise ProblemFormatError(filename, number, "expected 's A B'")
        if not rows:
            raise BadSchedule("%s holds no schedule rows" % filename)
        table = np.array(rows)
        return cls(table[:, 0], table[:, 1], table[:, 2], t_f, steps, method)

    def validate(self):
        s, A, B = self.s, self.A, self.B
        if s.ndim != 1 or len(s) < 2 or A.shape != s.shape or B.shape != s.shape:
            raise BadSchedule("s, A and B must be equally long, at least 2 points")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise BadSchedule("s must increase strictly from 0 to 1")
        if np.any(A < 0) or np.any(B < 0):
            raise BadSchedule("envelopes must not be negative")
        if A[0] < START_RATIO * B[0] or A[0] == 0.0:
            raise BadSchedule("A(0)/B(0) must be at least %g" % START_RATIO)
        if B[-1] == 0.0 or A[-1] > END_RATIO * B[-1]:
            raise BadSchedule("A(1)/B(1) must be at most %g" % END_RATIO)
        if self.t_f < 0:
            raise BadSchedule("run time must not be negative")
        if self.steps is not None and self.steps < 1:
            raise BadSchedule("at least one integrator step is needed")
        if self.method not in (EXPM, SPLIT):
            raise BadSchedule("unknown integrator %r" % self.method)

    def envelopes(self, s):
        return np.interp(s, self.s, self.A), np.interp(s, self.s, self.B)

    def step_count(self, energy_scale):
        """Steps keeping the phase advanced per step below one radian."""
        if self.steps is not None:
            return int(self.steps)
        return max(MIN_STEPS, int(math.ceil(self.t_f * energy_scale)))


@dataclasses.dataclass
class AnnealResult(object):
    """Samples of an anneal.

    Attributes:
        outcomes (ndarray): R x n spins.
        energies (ndarray): objective() of every outcome.
        ground_fraction (float): Share of outcomes that are minimisers.
        ground_probability (float): Exact weight of the minimisers in the
            final state.
        optimum (float): Oracle minimum.
        norm (float): Norm of the final state.
        probabilities (ndarray): Final basis probabilities.
    """
    outcomes: np.ndarray
    energies: np.ndarray
    ground_fraction: float
    ground_probability: float
    optimum: float
    norm: float
    probabilities: np.ndarray


def transverse_operator(n):
    """Sparse sum of sigma_x over n qubits."""
    size = 1 << n
    rows = []
    cols = []
    index = np.arange(size, dtype=np.int64)
    for j in range(n):
        rows.append(index)
        cols.append(index ^ (1 << (n - 1 - j)))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))


def initial_state(n, a0, b0, h_transverse, diagonal):
    """Ground state of A(0) H_I + B(0) H_F."""
    size = 1 << n
    if b0 == 0.0:
        # Product of (|0> - |1>)/sqrt(2), the ground state of +sigma_x.
        parity = np.array([bin(k).count('1') & 1 for k in range(size)])
        return ((1.0 - 2.0 * parity) / math.sqrt(size)).astype(complex)
    hamiltonian = a0 * h_transverse + b0 * sparse.diags(diagonal)
    if size <= DENSE_GROUND_LIMIT:
        _, vectors = np.linalg.eigh(hamiltonian.toarray())
        vector = vectors[:, 0]
    else:
        _, vectors = sparse_linalg.eigsh(hamiltonian, k=1, which='SA')
        vector = vectors[:, 0]
    return (vector / np.linalg.norm(vector)).astype(complex)


def _evolve_expm(psi, schedule, steps, h_transverse, diagonal):
    dt = schedule.t_f / steps
    for k in range(steps):
        a, b = schedule.envelopes((k + 0.5) / steps)
        hamiltonian = a * h_transverse + sparse.diags(b * diagonal)
        psi = sparse_linalg.expm_multiply(-1j * dt * hamiltonian, psi)
    return psi


def _evolve_split(psi, schedule, steps, n, diagonal):
    dt = schedule.t_f / steps
    shape = (2,) * n
    for k in range(steps):
        a, b = schedule.envelopes((k + 0.5) / steps)
        half = np.exp(-0.5j * dt * b * diagonal)
        psi = half * psi
        c, s = math.cos(a * dt), math.sin(a * dt)
        state = psi.reshape(shape)
        for axis in range(n):
            state = c * state - 1j * s * np.flip(state, axis=axis)
        psi = half * state.reshape(-1)
    return psi


def anneal(p, sched, R, rng_seed=None):
    """Simulate an anneal and sample R outcomes.

    The run starts in the exact ground state of H(0), integrates the
    Schroedinger equation over the schedule and samples the final state in
    the computational basis.

    Args:
        p (IsingProblem): Problem, at most 12 spins.
        sched (AnnealSchedule): Envelopes and run time.
        R (int): Number of samples.
        rng_seed: Seed of the sampling stream.

    Returns:
        An AnnealResult.
    """
    if p.n > ANNEAL_LIMIT:
        raise TooLarge("state-vector anneals are limited to %d spins" % ANNEAL_LIMIT)
    if R < 1:
        raise ParameterError("at least one repetition is needed")
    sched.validate()
    diagonal = diagonal_energies(p)
    h_transverse = transverse_operator(p.n)
    a0, b0 = sched.envelopes(0.0)
    psi = initial_state(p.n, a0, b0, h_transverse, diagonal)
    if sched.t_f > 0.0:
        scale = float(np.max(sched.A)) * p.n + float(np.max(sched.B)) * \
            float(np.max(np.abs(diagonal)))
        steps = sched.step_count(scale)
        notice(p, "Integrating %d steps of %.4g ns (%s)."
               % (steps, sched.t_f / steps, sched.method))
        if sched.method == SPLIT:
            psi = _evolve_split(psi, sched, steps, p.n, diagonal)
        else:
            psi = _evolve_expm(psi, sched, steps, h_transverse, diagonal)
    probabilities = np.abs(psi) ** 2
    norm = float(math.sqrt(probabilities.sum()))
    optimum, minimizers = brute_force_minimize(p)
    rng = make_rng(rng_seed, 'anneal')
    picks = rng.choice(len(probabilities), size=int(R),
                       p=probabilities / probabilities.sum())
    outcomes = basis_spins(p.n, picks).astype(int)
    energies = np.array([objective(p, row) for row in outcomes])
    winners = set(minimizers)
    ground = sum(1 for row in outcomes if tuple(int(x) for x in row) in winners)
    weights = 1 << np.arange(p.n - 1, -1, -1)
    ground_indices = [int(np.dot((1 - np.array(m)) // 2, weights)) for m in minimizers]
    return AnnealResult(outcomes=outcomes, energies=energies,
                        ground_fraction=ground / float(R),
                        ground_probability=float(probabilities[ground_indices].sum()),
                        optimum=optimum, norm=norm,
                        probabilities=probabilities)


@dataclasses.dataclass
class QuantizedProblem(object):
    """Integer DAC targets realising a problem.

    Attributes:
        targets (dict): DAC identifier to (N_C, N_F), every DAC of the grid.
        h (ndarray): Biases the targets actually realise.
        K (dict): Couplings the targets actually realise.
        max_error (float): Largest |achieved - requested| over all h and K,
            relative to the normalised full scale of 1.
        fine_steps (dict): Parameter name to its FINE step expressed in
            problem units, used to judge rounding.
    """
    targets: dict
    h: np.ndarray
    K: dict
    max_error: float
    fine_steps: dict


def resolve_table(table):
    if table is None:
        return flux_dac.DAC_TYPES[flux_dac.DESIGNED]
    if isinstance(table, str):
        return flux_dac.DAC_TYPES[table]
    return table


def dac_params(table, grid, dac_id, calibration=None):
    params = table[grid.dac_type(dac_id)]
    record = (calibration or {}).get(dac_id)
    if record is not None:
        params = dataclasses.replace(params, k=record.k, gamma=record.gamma)
    return params


def grid_for(n):
    """Smallest square grid with at least n qubits."""
    cells = max(1, int(math.ceil(n / float(topology.QUBITS_PER_CELL))))
    side = int(math.ceil(math.sqrt(cells)))
    return topology.build_grid(side, side)


def quantize_flux(flux, params, what='flux'):
    """Nearest (N_C, N_F) to a flux, in Phi0."""
    if abs(flux) > params.span + 1e-12:
        raise OutOfRange(what, flux, params.span)
    n_coarse = int(np.clip(round(flux / params.k), -params.capacity_coarse,
                           params.capacity_coarse))
    n_fine = int(np.clip(round((flux / params.k - n_coarse) * params.gamma),
                         -params.capacity_fine, params.capacity_fine))
    return n_coarse, n_fine


def _flux(params, counts):
    return params.k * (counts[0] + counts[1] / params.gamma)


def _target_flux(mapping, value, what, params):
    try:
        return mapping(value)
    except OutOfSpan:
        raise OutOfRange(what, value, params.span)


def quantize_problem(p, grid=None, table=None, curve=device.DEFAULT_COUPLER,
                     calibration=None):
    """Map a normalised problem onto DAC targets.

    h_j sets the gain of qubit j's Ip-compensator, K_ij the mutual of the
    coupler between qubits i and j. Both go through the coupler curve and
    are rounded to the nearest representable DAC output.

    Args:
        p (IsingProblem): Problem with |h|, |K| <= 1.
        grid (UnitCellGrid): Chip; a single cell when omitted.
        table: Parameter set name or dict of DacTypeParams by type.
        curve (CouplerCurve): Coupler and gain element shape.
        calibration (dict): DAC identifier to a record with measured k and
            gamma, used instead of the type parameters for that DAC.

    Returns:
        A QuantizedProblem.
    """
    grid = grid or topology.build_grid(1, 1)
    table = resolve_table(table)
    if p.n > len(grid.qubits):
        raise ParameterError("%d spins do not fit on %d qubits"
                             % (p.n, len(grid.qubits)))
    edges = grid.edge_set()
    targets = dict((dac.dac_id, (0, 0)) for dac in grid.dacs())
    h_achieved = np.zeros(p.n)
    K_achieved = collections.OrderedDict()
    fine_steps = {}
    error = 0.0
    for j in range(p.n):
        dac_id = grid.qubit_dac(j, 'ip-compensator')
        params = dac_params(table, grid, dac_id, calibration)
        what = 'h[%d]' % j
        flux = _target_flux(lambda v: device.flux_for_gain(v, curve), p.h[j],
                            what, params)
        counts = quantize_flux(flux, params, what)
        targets[dac_id] = counts
        h_achieved[j] = device.gain_from_flux(_flux(params, counts), curve)
        fine_steps[what] = _fine_in_units(device.gain_from_flux, flux, params, curve)
        error = max(error, abs(h_achieved[j] - p.h[j]))
    for (i, j), value in p.K.items():
        if (i, j) not in edges:
            raise ParameterError("coupling (%d, %d) has no coupler" % (i, j))
        dac_id = grid.coupler_dac(i, j)
        params = dac_params(table, grid, dac_id, calibration)
        what = 'K[%d,%d]' % (i, j)
        flux = _target_flux(lambda v: device.flux_for_coupling(v, curve), value,
                            what, params)
        counts = quantize_flux(flux, params, what)
        targets[dac_id] = counts
        K_achieved[(i, j)] = device.coupling_from_flux(_flux(params, counts), curve)
        fine_steps[what] = _fine_in_units(device.coupling_from_flux, flux, params,
                                          curve)
        error = max(error, abs(K_achieved[(i, j)] - value))
    return QuantizedProblem(targets, h_achieved, K_achieved, error, fine_steps)


def _fine_in_units(transfer, flux, params, curve):
    # Largest change one FINE step can make around the target flux.
    step = params.k / params.gamma
    low = max(-curve.span, flux - step)
    high = min(curve.span, flux + step)
    centre = transfer(flux, curve)
    return max(abs(transfer(low, curve) - centre), abs(transfer(high, curve) - centre))


def dequantize(targets, n, edges, grid=None, table=None,
               curve=device.DEFAULT_COUPLER, calibration=None):
    """Problem realised by a set of DAC targets.

    Args:
        targets (dict): DAC identifier to (N_C, N_F).
        n (int): Number of spins.
        edges (iterable): Couplings to read back.

    Returns:
        (h, K) as an array and an ordered dict.
    """
    grid = grid or topology.build_grid(1, 1)
    table = resolve_table(table)
    h = np.zeros(n)
    for j in range(n):
        dac_id = grid.qubit_dac(j, 'ip-compensator')
        params = dac_params(table, grid, dac_id, calibration)
        h[j] = device.gain_from_flux(_flux(params, targets.get(dac_id, (0, 0))), curve)
    K = collections.OrderedDict()
    for i, j in sorted((min(a, b), max(a, b)) for a, b in edges):
        dac_id = grid.coupler_dac(i, j)
        params = dac_params(table, grid, dac_id, calibration)
        K[(i, j)] = device.coupling_from_flux(
            _flux(params, targets.get(dac_id, (0, 0))), curve)
    return h, K
