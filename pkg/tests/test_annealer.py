import numpy as np
import pytest

from pmmtwin import annealer
from pmmtwin import flux_dac
from pmmtwin import topology
from pmmtwin.controller import CalibrationRecord
from pmmtwin.core import BadSchedule, OutOfRange, ParameterError, \
    ProblemFormatError, SpinDomain, TooLarge

UNIT_CELL_EDGES = topology.build_grid(1, 1).edge_list()


def random_cell_problem(rng, values=None):
    if values is None:
        h = rng.uniform(-1.0, 1.0, 8)
        K = dict((edge, rng.uniform(-1.0, 1.0)) for edge in UNIT_CELL_EDGES)
    else:
        h = rng.choice(values, 8)
        K = dict((edge, float(rng.choice(values))) for edge in UNIT_CELL_EDGES)
    return annealer.IsingProblem(8, h, K, UNIT_CELL_EDGES)


############ Objective and oracle
def test_objective_examples():
    empty = annealer.IsingProblem(3)
    assert annealer.objective(empty, (1, -1, 1)) == 0.0
    pair = annealer.IsingProblem(2, [0.0, 0.0], {(0, 1): -1.0})
    assert annealer.objective(pair, (1, 1)) == -1.0
    assert annealer.objective(pair, (1, -1)) == 1.0


def test_objective_spin_domain():
    pair = annealer.IsingProblem(2, [0.0, 0.0], {(0, 1): -1.0})
    with pytest.raises(SpinDomain):
        annealer.objective(pair, (1, 0))
    with pytest.raises(SpinDomain):
        annealer.objective(pair, (1, 1, 1))


def test_objective_matches_edge_sum():
    rng = np.random.default_rng(5)
    problem = random_cell_problem(rng)
    edges = np.array(UNIT_CELL_EDGES)
    weights = np.array([problem.K[tuple(edge)] for edge in UNIT_CELL_EDGES])
    for _ in range(1000):
        s = rng.choice([-1, 1], 8)
        expected = problem.h @ s + np.sum(weights * s[edges[:, 0]] * s[edges[:, 1]])
        assert annealer.objective(problem, s) == pytest.approx(expected, abs=1e-12)


def test_brute_force_single_spin():
    optimum, minimizers = annealer.brute_force_minimize(annealer.IsingProblem(1, [1.0]))
    assert optimum == -1.0
    assert minimizers == [(-1,)]


def test_brute_force_degenerate():
    optimum, minimizers = annealer.brute_force_minimize(annealer.IsingProblem(8))
    assert optimum == 0.0
    assert len(minimizers) == 256


def test_brute_force_frustrated_triangle(fixture_frustrated_triangle):
    problem, optimum, count = fixture_frustrated_triangle
    found, minimizers = annealer.brute_force_minimize(problem)
    assert found == optimum
    assert len(minimizers) == count


def test_brute_force_matches_diagonal():
    rng = np.random.default_rng(8)
    problem = random_cell_problem(rng, [-1.0, 1.0])
    optimum, minimizers = annealer.brute_force_minimize(problem)
    assert optimum == annealer.diagonal_energies(problem).min()
    assert all(annealer.objective(problem, s) == optimum for s in minimizers)


def test_brute_force_too_large():
    with pytest.raises(TooLarge):
        annealer.brute_force_minimize(annealer.IsingProblem(25))


############ Problems
def test_problem_rejects_off_edge_coupling():
    with pytest.raises(ParameterError):
        annealer.IsingProblem(8, None, {(0, 1): 0.5}, UNIT_CELL_EDGES)
    with pytest.raises(ParameterError):
        annealer.IsingProblem(2, [0.0, np.nan])


def test_read_problem(fixture_problem_file):
    path = fixture_problem_file(["# unit cell", "h 0 0.5", "h 3 -1", "K 4 0 -0.25", ""])
    problem = annealer.read_problem(path, UNIT_CELL_EDGES)
    assert problem.n == 5
    assert list(problem.h) == [0.5, 0.0, 0.0, -1.0, 0.0]
    assert problem.K == {(0, 4): -0.25}


def test_read_problem_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    problem = random_cell_problem(rng)
    path = str(tmp_path / "cell.txt")
    annealer.write_problem(path, problem)
    copy = annealer.read_problem(path, UNIT_CELL_EDGES, n=8)
    assert np.array_equal(copy.h, problem.h)
    assert copy.K == problem.K


@pytest.mark.parametrize("lines", [
    ["h 0 1", "h 0 2"],
    ["K 0 1 0.5"],
    ["h 0"],
    ["x 0 1"],
    ["h 0 one"],
])
def test_read_problem_errors(fixture_problem_file, lines):
    with pytest.raises(ProblemFormatError):
        annealer.read_problem(fixture_problem_file(lines), UNIT_CELL_EDGES)


############ Schedules
def test_default_schedule_ratios():
    schedule = annealer.AnnealSchedule.default(10.0)
    a0, b0 = schedule.envelopes(0.0)
    a1, b1 = schedule.envelopes(1.0)
    assert b0 == 0.0 and a0 == pytest.approx(annealer.E0)
    assert a1 == 0.0 and b1 == pytest.approx(annealer.E0)


@pytest.mark.parametrize("s, A, B, t_f", [
    ([0.0, 1.0], [1.0, 1.0], [0.0, 1.0], 1.0),
    ([0.0, 1.0], [1.0, 0.0], [0.1, 1.0], 1.0),
    ([0.0, 0.5, 0.5, 1.0], [1.0, 0.5, 0.5, 0.0], [0.0, 0.5, 0.5, 1.0], 1.0),
    ([0.0, 1.0], [1.0, 0.0], [0.0, 1.0], -1.0),
])
def test_bad_schedules(s, A, B, t_f):
    with pytest.raises(BadSchedule):
        annealer.AnnealSchedule(s, A, B, t_f)


def test_schedule_file(tmp_path):
    path = tmp_path / "schedule.txt"
    path.write_text("# s A B\n0 6.0 0\n0.5 1.0 3.0\n1 0 6.0\n", encoding='utf-8')
    schedule = annealer.AnnealSchedule.from_file(str(path), 5.0)
    assert schedule.envelopes(0.25) == pytest.approx((3.5, 1.5))


############ Anneals
def test_slow_single_spin_finds_ground():
    problem = annealer.IsingProblem(1, [1.0])
    result = annealer.anneal(problem, annealer.AnnealSchedule.default(100.0), 200,
                             rng_seed=1)
    assert result.ground_probability >= 0.99
    assert result.ground_fraction >= 0.99
    assert np.all(result.outcomes[result.energies == -1.0] == -1)


def test_sudden_quench_is_even():
    problem = annealer.IsingProblem(1, [1.0])
    result = annealer.anneal(problem, annealer.AnnealSchedule.default(0.0), 2000,
                             rng_seed=1)
    assert result.ground_probability == pytest.approx(0.5)
    assert 0.45 <= result.ground_fraction <= 0.55


@pytest.mark.parametrize("method", [annealer.EXPM, annealer.SPLIT])
def test_norm_is_conserved(fixture_frustrated_triangle, method):
    problem, _, _ = fixture_frustrated_triangle
    schedule = annealer.AnnealSchedule.default(10.0, method=method)
    result = annealer.anneal(problem, schedule, 16, rng_seed=0)
    assert abs(result.norm - 1.0) < 1e-8


def test_integrators_agree():
    problem = annealer.IsingProblem(2, [0.3, -0.2], {(0, 1): 0.7})
    expm = annealer.anneal(problem, annealer.AnnealSchedule.default(
        5.0, steps=4000, method=annealer.EXPM), 1, rng_seed=0)
    split = annealer.anneal(problem, annealer.AnnealSchedule.default(
        5.0, steps=4000, method=annealer.SPLIT), 1, rng_seed=0)
    assert np.allclose(expm.probabilities, split.probabilities, atol=5e-3)


def test_anneal_results_are_consistent(fixture_frustrated_triangle):
    problem, optimum, _ = fixture_frustrated_triangle
    schedule = annealer.AnnealSchedule.default(20.0)
    first = annealer.anneal(problem, schedule, 64, rng_seed=42)
    second = annealer.anneal(problem, schedule, 64, rng_seed=42)
    assert np.array_equal(first.outcomes, second.outcomes)
    assert first.ground_fraction == second.ground_fraction
    assert first.optimum == optimum
    assert first.energies.min() >= optimum
    for row, energy in zip(first.outcomes, first.energies):
        assert annealer.objective(problem, row) == energy


def test_anneal_limits():
    with pytest.raises(TooLarge):
        annealer.anneal(annealer.IsingProblem(13), annealer.AnnealSchedule.default(1.0), 1)
    with pytest.raises(ParameterError):
        annealer.anneal(annealer.IsingProblem(1, [1.0]),
                        annealer.AnnealSchedule.default(1.0), 0)


def minimum_gap(problem, points=101):
    diagonal = annealer.diagonal_energies(problem)
    transverse = annealer.transverse_operator(problem.n).toarray()
    schedule = annealer.AnnealSchedule.default(1.0)
    gaps = []
    for s in np.linspace(0.0, 1.0, points):
        a, b = schedule.envelopes(s)
        levels = np.linalg.eigvalsh(a * transverse + np.diag(b * diagonal))
        gaps.append(levels[1] - levels[0])
    return min(gaps)


@pytest.mark.slow
def test_slow_anneals_recover_cell_optimum():
    rng = np.random.default_rng(2019)
    instances = []
    for _ in range(500):
        problem = random_cell_problem(rng, [-1.0, 1.0])
        _, minimizers = annealer.brute_force_minimize(problem)
        if len(minimizers) == 1 and minimum_gap(problem) >= 0.5:
            instances.append(problem)
        if len(instances) == 20:
            break
    assert len(instances) == 20
    for seed, problem in enumerate(instances):
        fractions = []
        for t_f in (3.0, 30.0, 300.0):
            schedule = annealer.AnnealSchedule.default(t_f, method=annealer.SPLIT)
            result = annealer.anneal(problem, schedule, 128, rng_seed=seed)
            fractions.append(result.ground_probability)
        assert fractions[-1] >= 0.9
        assert all(later >= earlier - 0.1
                   for earlier, later in zip(fractions, fractions[1:]))
        assert result.ground_fraction >= 0.9


############ Quantization
def test_zero_problem_quantizes_to_zero():
    quantized = annealer.quantize_problem(annealer.IsingProblem(8))
    assert set(quantized.targets.values()) == {(0, 0)}
    assert len(quantized.targets) == 64
    assert quantized.max_error == 0.0


def test_random_problems_within_five_percent():
    rng = np.random.default_rng(100)
    grid = topology.build_grid(1, 1)
    for _ in range(100):
        problem = random_cell_problem(rng)
        quantized = annealer.quantize_problem(problem, grid, flux_dac.DESIGNED)
        assert quantized.max_error <= 0.05
        h, K = annealer.dequantize(quantized.targets, 8, UNIT_CELL_EDGES, grid)
        assert np.allclose(h, quantized.h)
        assert K == pytest.approx(quantized.K)
        for j in range(8):
            assert abs(h[j] - problem.h[j]) <= quantized.fine_steps['h[%d]' % j]


def test_targets_fit_dac_capacities():
    rng = np.random.default_rng(3)
    grid = topology.build_grid(1, 1)
    table = flux_dac.DAC_TYPES[flux_dac.DESIGNED]
    quantized = annealer.quantize_problem(random_cell_problem(rng), grid, table)
    for dac_id, (n_coarse, n_fine) in quantized.targets.items():
        params = table[grid.dac_type(dac_id)]
        assert abs(n_coarse) <= params.capacity_coarse
        assert abs(n_fine) <= params.capacity_fine


def test_quantize_out_of_range():
    with pytest.raises(OutOfRange):
        annealer.quantize_problem(annealer.IsingProblem(8, [5.0] + [0.0] * 7))


def test_quantize_needs_a_coupler():
    problem = annealer.IsingProblem(8, None, {(0, 1): 0.5})
    with pytest.raises(ParameterError):
        annealer.quantize_problem(problem)


def test_quantize_uses_calibration():
    grid = topology.build_grid(1, 1)
    problem = annealer.IsingProblem(8, [0.5] + [0.0] * 7)
    dac_id = grid.qubit_dac(0, 'ip-compensator')
    nominal = annealer.quantize_problem(problem, grid)
    record = CalibrationRecord(dac_id, 0.02, 10.6, 2.0)
    calibrated = annealer.quantize_problem(problem, grid, calibration={dac_id: record})
    assert calibrated.targets[dac_id] != nominal.targets[dac_id]
    assert calibrated.max_error <= 0.05


def test_grid_for():
    assert (annealer.grid_for(8).rows, annealer.grid_for(8).cols) == (1, 1)
    assert (annealer.grid_for(9).rows, annealer.grid_for(9).cols) == (2, 2)
    assert annealer.grid_for(40).rows == 3
