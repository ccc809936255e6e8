import networkx as nx
import pytest

from pmmtwin import topology


# cells per side -> (qubits, couplers, dacs, junctions)
PARTS = {
    1: (8, 16, 56, 1500),
    2: (32, 72, 232, 6000),
    4: (128, 328, 968, 24000),
    8: (512, 1416, 3976, 96000),
    16: (2048, 5896, 16136, 384000),
}


@pytest.mark.parametrize("side", sorted(PARTS))
def test_parts_count_square_grids(side):
    count = topology.parts_count(topology.build_grid(side, side))
    assert tuple(count) == PARTS[side]


def test_one_cell_is_complete_bipartite(fixture_one_cell_grid):
    grid = fixture_one_cell_grid
    assert len(grid.qubits) == 8
    assert len(grid.couplers) == 16
    graph = grid.graph
    assert nx.is_bipartite(graph)
    assert all(degree == 4 for _, degree in graph.degree())
    assert grid.edge_set() == frozenset((h, v) for h in range(4) for v in range(4, 8))


def test_one_cell_breakouts_get_dacs(fixture_one_cell_grid):
    grid = fixture_one_cell_grid
    assert len(grid.breakouts) == 8
    assert grid.dac_count == 64
    assert topology.parts_count(grid).dacs == 56
    roles = [grid.dac(d).role for d in range(grid.dac_count)]
    assert roles.count(topology.BREAKOUT_ROLE) == 8
    assert grid.dac_type(63) == 'Coupler'


def test_two_by_two_inter_cell_couplers():
    grid = topology.build_grid(2, 2)
    edges = grid.edge_set()
    # Horizontal qubit 0 of cell (0, 0) couples to its twin in cell (0, 1).
    assert (0, 8) in edges
    # Vertical qubit 4 of cell (0, 0) couples to its twin in cell (1, 0).
    assert (4, 20) in edges
    assert grid.breakouts == []
    assert nx.is_connected(grid.graph)


def test_dac_identifiers_follow_qubits_then_couplers():
    grid = topology.build_grid(2, 2)
    assert grid.qubit_dac(0, 'qubit-flux') == 0
    assert grid.qubit_dac(1, 'ip-compensator') == 9
    first_coupler = len(topology.QUBIT_ROLES) * len(grid.qubits)
    i, j = grid.edge_list()[0]
    assert grid.coupler_dac(j, i) == first_coupler
    assert grid.dac(first_coupler).role == topology.COUPLER_ROLE


def test_coupler_dac_missing_edge(fixture_one_cell_grid):
    with pytest.raises(KeyError):
        fixture_one_cell_grid.coupler_dac(0, 1)


def test_rectangular_grid_generalizes():
    grid = topology.build_grid(2, 3)
    assert len(grid.couplers) == 16 * 6 + 8 * 1 * 2


@pytest.mark.parametrize("rows, cols", [(2, 2), (2, 3), (3, 3), (4, 4), (3, 5)])
def test_every_neighbouring_cell_pair_is_coupled(rows, cols):
    grid = topology.build_grid(rows, cols)
    assert nx.is_connected(grid.graph)
    cells = set()
    for a, b in grid.couplers:
        if (a.cell_row, a.cell_col) != (b.cell_row, b.cell_col):
            assert a.orientation == b.orientation
            assert a.index == b.index
            cells.add(((a.cell_row, a.cell_col), (b.cell_row, b.cell_col)))
    assert len(cells) == len(grid.adjacencies())
    assert len(grid.couplers) == 16 * rows * cols + 8 * (rows - 1) * (cols - 1)


def test_single_row_of_cells_has_no_inter_cell_couplers():
    grid = topology.build_grid(1, 3)
    assert len(grid.couplers) == 48
    assert nx.number_connected_components(grid.graph) == 3


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        topology.build_grid(0, 3)
