"""Machines module of the PMM digital twin.

This module contains classes needed to define a virtual machine and the
virtual processor built on it.

- 'VirtualMachine' class:
    Base class of virtual machines. It runs a fixed sequence of 'init_*'
    hooks that children override.
- 'VirtualProcessor' class:
    The chip twin: interconnect, demultiplexer interface, flux DAC nodes and
    feedback devices, with its DAC states kept in a persistence file.

Copyright (c) 2018 Daniel Marquina
"""

from pmmtwin import device
from pmmtwin import flux_dac
from pmmtwin import interfaces
from pmmtwin import nodes
from pmmtwin import topology
from pmmtwin.core import ParameterError
from pmmtwin.utilities import PersistenceManager, notice

STATE_SECTION = 'states'


class VirtualMachine(object):
    """Base class for all virtual machines.

    A virtual machine is made of an interface and nodes, all of them virtual
    too because they represent the real, physical machine.

    All 'init...' methods are empty but are called on initialization because
    children override them according to the machine's requirements.

    Keyword Args:
        name (str): Virtual machine's to-be name.
        interface (InterfaceShell, BaseInterface or a child): Virtual machine's
            to-be interface.
        persistenceFile (str): Persistence file's to-be name.

    Attributes:
        name (str): Virtual machine's name.
        interface (InterfaceShell): Virtual machine's interface.
        persistence (PersistenceManager): Persistence file's manager.
    """
    def __init__(self, *args, **kwargs):
        self.name = None
        self.interface = None
        self.persistence = None

        self.set_name(kwargs.get('name'))
        notice(self, "Initializing virtual machine...")
        self.set_interface(kwargs.get('interface'))
        self.set_persistence(kwargs.get('persistenceFile'))

        # Run user initialization
        self.init(*args, **kwargs)
        self.init_interfaces()
        self.init_nodes()
        self.init_devices()
        self.init_last()

    def default_name(self):
        return self.__class__.__name__

    def set_name(self, name=None):
        """Set name of virtual machine.

        Args:
            name (str): Virtual machine's new name, 'default_name()' if None.
        """
        if name is None:
            self.name = self.default_name()
        elif isinstance(name, str):
            self.name = name
            notice(self, "Name successfully assigned.")
        else:
            notice(self, "Assignation of ill defined name was refused. "
                         "Previous name remains.")

    def set_interface(self, interface=None):
        """Set interface of virtual machine.

        When no interface is specified, an empty interface shell is assigned.

        Args:
            interface: Virtual machine's interface, defined in the interfaces
                module.
        """
        if interface is None:
            self.interface = interfaces.InterfaceShell(self)
            notice(self, "An empty interface has been assigned.")
        elif isinstance(interface, interfaces.InterfaceShell):
            self.interface = interface
            interface.set_owner(self)
        elif isinstance(interface, interfaces.BaseInterface):
            self.interface = interfaces.InterfaceShell(self, interface)
            notice(self, "Interface successfully assigned.")
        else:
            notice(self, "Assignation of ill defined interface was refused. "
                         "Previous interface remains")

    def set_persistence(self, filename=None):
        """Set persistence file of virtual machine.

        Args:
            filename (str): Virtual machine's persistence file's name.
        """
        if filename is None:
            self.persistence = PersistenceManager(namespace=self.name)
            notice(self, "No persistence manager has been assigned.")
        elif isinstance(filename, str):
            self.persistence = PersistenceManager(filename=filename,
                                                  namespace=self.name)
            notice(self, "Persistence manager successfully initialized.")
        else:
            notice(self, "Assignation of ill defined persistence manager was "
                         "refused. Previous one remains.")

    def init(self, *args, **kwargs):
        """User-defined initialization, called first."""
        pass

    def init_interfaces(self):
        """Initialization of interfaces."""
        pass

    def init_nodes(self):
        """Initialization of nodes."""
        pass

    def init_devices(self):
        """Initialization of the devices nodes act on."""
        pass

    def init_last(self):
        """Called after every other initializer."""
        pass


class VirtualProcessor(VirtualMachine):
    """Digital twin of a PMM-programmed processor.

    Keyword Args:
        rows (int): Unit cell rows.
        cols (int): Unit cell columns.
        parameter_set (str): 'designed' or 'achieved' DAC parameters.
        table (dict): DAC type name to DacTypeParams, overrides parameter_set.
        gate (DemuxGate): Gate model of every address tree.
        seed (int): Master seed of every random stream of the chip.
        spread (float): Relative fabrication spread of DAC k, 0 for none.
        reset_mismatch (float): Reset junction mismatch of every DAC stage.
        qubit_params (QubitParams): Parameters of every qubit.
        analog_mutual (float): Analog line mutual of every qubit, in pH.
        name (str): Name, also the namespace in the persistence file.
        persistenceFile (str): File keeping DAC states between runs.

    Attributes:
        grid (UnitCellGrid): Interconnect.
        nodes (dict): DAC identifier to DacNodeShell.
        devices (dict): Device identifier to feedback device.
    """

    def init(self, rows=1, cols=1, parameter_set=flux_dac.DESIGNED, table=None,
             gate=None, seed=None, spread=0.0, reset_mismatch=0.0,
             qubit_params=None, analog_mutual=2.0, **kwargs):
        self.grid = topology.build_grid(rows, cols)
        if parameter_set not in flux_dac.PARAMETER_SETS:
            raise ParameterError("unknown parameter set %r" % parameter_set)
        self.parameter_set = parameter_set
        self.table = table or flux_dac.DAC_TYPES[parameter_set]
        self.gate = gate
        self.seed = seed
        self.spread = float(spread)
        self.reset_mismatch = float(reset_mismatch)
        self.qubit_params = qubit_params or device.QubitParams()
        self.analog_mutual = float(analog_mutual)
        self.nodes = {}
        self.devices = {}

    def default_name(self):
        return "processor"

    def init_interfaces(self):
        if self.interface.contained_interface is None:
            self.interface.set(interfaces.DemuxInterface(
                self, self.grid.dac_count, gate=self.gate, seed=self.seed), self)

    def init_devices(self):
        for i in range(len(self.grid.qubits)):
            self.devices[('qubit', i)] = device.QubitDevice(
                self.qubit_params, self.analog_mutual, name="qubit %d" % i)
        for b in range(len(self.grid.breakouts)):
            self.devices[('breakout', b)] = device.DcSquidDevice(
                analog_mutual=self.analog_mutual, name="break-out %d" % b)
        for shell in self.nodes.values():
            shell.node.device = self.feedback_device(shell.node)

    def feedback_device(self, node):
        """Device whose observable reads a DAC, None when there is none."""
        if node.role in ('qubit-flux', topology.BREAKOUT_ROLE):
            return self.devices.get(node.target)
        return None

    def init_nodes(self):
        for assignment in self.grid.dacs():
            params = self.table[topology.ROLE_TYPES[assignment.role]]
            dac = flux_dac.TwoStageDac.from_params(
                params, assignment.dac_id, self.parameter_set, self.reset_mismatch)
            if self.spread:
                dac = dac.with_spread(self.seed, self.spread)
            self.nodes[assignment.dac_id] = nodes.DacNodeShell(
                self, assignment, dac, self.interface)

    def init_last(self):
        if self.persistence():
            self.restore_states()

    def node(self, dac_id):
        return self.nodes[dac_id]

    def dacs(self):
        """DAC identifier to TwoStageDac."""
        return dict((dac_id, shell.dac) for dac_id, shell in self.nodes.items())

    def states(self):
        """DAC identifier to stored (N_C, N_F)."""
        return dict((dac_id, shell.dac.counts())
                    for dac_id, shell in self.nodes.items())

    def load_states(self, states):
        for dac_id, (n_coarse, n_fine) in states.items():
            self.nodes[dac_id].dac.load(n_coarse, n_fine)

    def persist_states(self):
        """Write non-empty DAC states to the persistence file."""
        if not self.persistence():
            notice(self, "No persistence file, states not saved.")
            return
        values = dict((str(dac_id), "%d %d" % counts)
                      for dac_id, counts in sorted(self.states().items())
                      if counts != (0, 0))
        persistence_dict = self.persistence.read_persistence_dictionary()
        persistence_dict[self.persistence.section_name(STATE_SECTION)] = values
        self.persistence.write_persistence_dictionary(persistence_dict)

    def restore_states(self):
        section = self.persistence.get(STATE_SECTION) or {}
        states = {}
        for key, value in section.items():
            n_coarse, n_fine = value.split()
            states[int(key)] = (int(n_coarse), int(n_fine))
        self.load_states(states)
        notice(self, "Restored %d DAC states." % len(states))
