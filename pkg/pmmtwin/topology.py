"""Topology module of the PMM digital twin.

Builds the processor interconnect: tiled eight-qubit unit cells, the
couplers between their qubits and the inventory of flux DACs that program
every device.

- 'QubitId', 'DacAssignment', 'PartsCount' records.
- 'UnitCellGrid' class:
    Qubits, couplers, break-out devices and DAC assignments of a tiled chip,
    with a networkx view of the allowed edge set.
- 'build_grid' method:
    Tiles rows x cols unit cells.
- 'parts_count' method:
    Qubit, coupler, DAC and junction counts of a grid.

Copyright (c) 2018 Daniel Marquina
"""

import collections
import itertools

import networkx as nx

from pmmtwin.utilities import notice

QUBITS_PER_CELL = 8
HALF_CELL = 4
JUNCTIONS_PER_CELL = 1500

HORIZONTAL = 'H'
VERTICAL = 'V'

QUBIT_ROLES = ('qubit-flux', 'ccjj-minor-1', 'ccjj-minor-2', 'l-tuner',
               'ip-compensator')
COUPLER_ROLE = 'coupler'
BREAKOUT_ROLE = 'breakout'

# DAC type programming each role.
ROLE_TYPES = {
    'qubit-flux': 'QubitFlux',
    'ccjj-minor-1': 'CcjjMinor',
    'ccjj-minor-2': 'CcjjMinor',
    'l-tuner': 'LTuner',
    'ip-compensator': 'Coupler',
    COUPLER_ROLE: 'Coupler',
    BREAKOUT_ROLE: 'Coupler',
}

QubitId = collections.namedtuple('QubitId',
                                 'cell_row cell_col orientation index')
DacAssignment = collections.namedtuple('DacAssignment', 'dac_id role device')
PartsCount = collections.namedtuple('PartsCount',
                                    'qubits couplers dacs junctions')


class UnitCellGrid(object):
    """A rows x cols tiling of eight-qubit unit cells.

    Inside each cell the four horizontal qubits couple to the four vertical
    ones (16 couplers). Between cells there are 8 (rows - 1) (cols - 1)
    couplers, joining a horizontal qubit to its twin in the cell on the
    right or a vertical qubit to its twin in the cell below. They are dealt
    out index by index over every pair of neighbouring cells, so any grid
    with at least two rows and two columns is connected; a single row or
    column of cells gets none. A stand-alone cell has
    nothing to couple to, so its 8 boundary couplers are exposed as
    dc-SQUID test devices with the 'breakout' role.

    DAC identifiers are assigned in a fixed order: five per qubit in qubit
    order, then one per coupler, then one per break-out device.

    Args:
        rows (int): Number of unit cell rows, at least 1.
        cols (int): Number of unit cell columns, at least 1.

    Attributes:
        rows (int): Unit cell rows.
        cols (int): Unit cell columns.
        qubits (list): QubitId of every qubit, in linear index order.
        couplers (list): (QubitId, QubitId) pairs forming the edge set E.
        breakouts (list): QubitId hosting each break-out coupler.
        dac_assignments (OrderedDict): Device identifier to list of
            DacAssignment. Devices are ('qubit', i), ('coupler', c) and
            ('breakout', b).
    """

    def __init__(self, rows, cols):
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least one row and one column")
        self.rows = int(rows)
        self.cols = int(cols)
        self.name = "grid %dx%d" % (self.rows, self.cols)
        self.qubits = [QubitId(r, c, o, k)
                       for r in range(self.rows)
                       for c in range(self.cols)
                       for o in (HORIZONTAL, VERTICAL)
                       for k in range(HALF_CELL)]
        self.couplers = []
        self.breakouts = []
        self.dac_assignments = collections.OrderedDict()
        self._dacs = []
        self.init_couplers()
        self.init_dacs()
        self._graph = None

    @property
    def cell_count(self):
        return self.rows * self.cols

    def qubit_index(self, qubit):
        """Linear index of a QubitId."""
        cell = qubit.cell_row * self.cols + qubit.cell_col
        offset = 0 if qubit.orientation == HORIZONTAL else HALF_CELL
        return QUBITS_PER_CELL * cell + offset + qubit.index

    def init_couplers(self):
        for r, c in itertools.product(range(self.rows), range(self.cols)):
            for h, v in itertools.product(range(HALF_CELL), repeat=2):
                self.add_coupler(QubitId(r, c, HORIZONTAL, h),
                                 QubitId(r, c, VERTICAL, v))
        remaining = self.inter_cell_count
        for k in range(HALF_CELL):
            for r, c, orientation in self.adjacencies():
                if not remaining:
                    break
                if orientation == HORIZONTAL:
                    neighbour = QubitId(r, c + 1, HORIZONTAL, k)
                else:
                    neighbour = QubitId(r + 1, c, VERTICAL, k)
                self.add_coupler(QubitId(r, c, orientation, k), neighbour)
                remaining -= 1
        if self.cell_count == 1:
            self.breakouts = list(self.qubits)
            notice(self, "Boundary couplers exposed as %d break-out devices."
                   % len(self.breakouts))

    @property
    def inter_cell_count(self):
        return 8 * (self.rows - 1) * (self.cols - 1)

    def adjacencies(self):
        """(row, col, orientation) of every pair of neighbouring cells.

        HORIZONTAL pairs a cell with its right neighbour, VERTICAL with the
        one below.
        """
        pairs = []
        for r, c in itertools.product(range(self.rows), range(self.cols)):
            if c + 1 < self.cols:
                pairs.append((r, c, HORIZONTAL))
            if r + 1 < self.rows:
                pairs.append((r, c, VERTICAL))
        return pairs

    def add_coupler(self, qubit_a, qubit_b):
        if self.qubit_index(qubit_a) > self.qubit_index(qubit_b):
            qubit_a, qubit_b = qubit_b, qubit_a
        self.couplers.append((qubit_a, qubit_b))

    def init_dacs(self):
        for i in range(len(self.qubits)):
            self.assign(('qubit', i), QUBIT_ROLES)
        for c in range(len(self.couplers)):
            self.assign(('coupler', c), (COUPLER_ROLE,))
        for b in range(len(self.breakouts)):
            self.assign(('breakout', b), (BREAKOUT_ROLE,))

    def assign(self, device, roles):
        assignments = []
        for role in roles:
            assignment = DacAssignment(len(self._dacs), role, device)
            self._dacs.append(assignment)
            assignments.append(assignment)
        self.dac_assignments[device] = assignments

    @property
    def dac_count(self):
        """Every DAC on the chip, break-out devices included."""
        return len(self._dacs)

    def dac(self, dac_id):
        """DacAssignment of a DAC identifier."""
        return self._dacs[dac_id]

    def dacs(self):
        return list(self._dacs)

    def dac_type(self, dac_id):
        return ROLE_TYPES[self._dacs[dac_id].role]

    def qubit_dac(self, qubit, role):
        """DAC identifier holding a given role of a qubit (index or QubitId)."""
        if isinstance(qubit, QubitId):
            qubit = self.qubit_index(qubit)
        return self.dac_assignments[('qubit', qubit)][QUBIT_ROLES.index(role)].dac_id

    def coupler_dac(self, i, j):
        """DAC identifier of the coupler joining linear qubits i and j."""
        edge = (min(i, j), max(i, j))
        index = self.edge_index().get(edge)
        if index is None:
            raise KeyError("no coupler between qubits %d and %d" % edge)
        return self.dac_assignments[('coupler', index)][0].dac_id

    def edge_index(self):
        if not hasattr(self, '_edge_index'):
            self._edge_index = dict((edge, c) for c, edge in
                                    enumerate(self.edge_list()))
        return self._edge_index

    def edge_list(self):
        """Couplers as (i, j) linear index pairs with i < j, in coupler order."""
        return [(self.qubit_index(a), self.qubit_index(b))
                for a, b in self.couplers]

    def edge_set(self):
        return frozenset(self.edge_list())

    @property
    def graph(self):
        """networkx.Graph of linear qubit indices with QubitId node labels."""
        if self._graph is None:
            graph = nx.Graph(rows=self.rows, cols=self.cols)
            for i, qubit in enumerate(self.qubits):
                graph.add_node(i, qubit=qubit)
            for c, (i, j) in enumerate(self.edge_list()):
                graph.add_edge(i, j, coupler=c)
            self._graph = graph
        return self._graph


def build_grid(rows, cols):
    """Tile rows x cols unit cells.

    Args:
        rows (int): Unit cell rows.
        cols (int): Unit cell columns.

    Returns:
        A UnitCellGrid.
    """
    return UnitCellGrid(rows, cols)


def parts_count(grid):
    """Count the parts of a grid.

    Break-out devices are test structures and are not counted as couplers.

    Returns:
        A PartsCount record.
    """
    qubits = len(grid.qubits)
    couplers = len(grid.couplers)
    return PartsCount(qubits=qubits,
                      couplers=couplers,
                      dacs=len(QUBIT_ROLES) * qubits + couplers,
                      junctions=JUNCTIONS_PER_CELL * grid.cell_count)
