import pytest

from pmmtwin import annealer
from pmmtwin import demux
from pmmtwin import flux_dac
from pmmtwin import machines
from pmmtwin import topology


SEED = 20190101


############ Chips
@pytest.fixture
def fixture_one_cell_grid():
    return topology.build_grid(1, 1)


@pytest.fixture
def fixture_one_cell_processor():
    return machines.VirtualProcessor(rows=1, cols=1, seed=SEED)


@pytest.fixture
def fixture_noisy_processor():
    # 4 x 4 cells, 968 DACs on 31 trees.
    gate = demux.DemuxGate(error_probability=1e-3)
    return machines.VirtualProcessor(rows=4, cols=4, gate=gate, seed=SEED)


############ DACs
@pytest.fixture
def fixture_achieved_qubit_flux_dac():
    return flux_dac.TwoStageDac.from_type('QubitFlux', flux_dac.ACHIEVED, dac_id=0)


@pytest.fixture
def fixture_achieved_coupler_dac():
    return flux_dac.TwoStageDac.from_type('Coupler', flux_dac.ACHIEVED, dac_id=1)


############ Problems
@pytest.fixture
def fixture_frustrated_triangle():
    # Every antiferromagnetic triangle leaves one bond unsatisfied.
    problem = annealer.IsingProblem(3, [0.0, 0.0, 0.0],
                                    {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.0})
    return problem, -1.0, 6


@pytest.fixture
def fixture_problem_file(tmp_path):
    def write(lines):
        path = tmp_path / "problem.txt"
        path.write_text("\n".join(lines) + "\n", encoding='utf-8')
        return str(path)
    return write
