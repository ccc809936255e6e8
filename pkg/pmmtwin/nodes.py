"""Nodes module of the PMM digital twin.

This module defines virtual node and node shell classes, the latter act
as an intermediary between the former and the virtual processor.

- 'BaseNodeShell' class:
    Basic node shell. It forwards every call it does not support to the
    node it contains.
- 'DacNodeShell' class:
    Shell of one addressable flux DAC.
- 'BaseVirtualNode' class:
    Basic virtual node definition.
- 'DacNode' class:
    A flux DAC, its place on the demultiplexer trees and the device it
    programs.

Copyright (c) 2018 Daniel Marquina
"""

from pmmtwin import demux
from pmmtwin import interfaces
from pmmtwin.core import FINE
from pmmtwin.utilities import notice


# ----NODE SHELLS------------
class BaseNodeShell(object):
    """The basic container for all nodes.

    Args:
        owner (VirtualProcessor): Processor that instantiates this node shell.
        name (str): Name of this node shell.

    Attributes:
        owner (VirtualProcessor): Processor that owns this node shell.
        name (str): Name of this node shell.
        interface (InterfaceShell): Shell to contain owner's interface.
        node (BaseVirtualNode or a child): Contained node.
    """
    def __init__(self, owner, name):
        self.owner = owner
        self.name = name
        self.interface = interfaces.InterfaceShell(self)
        self.node = None

    def __getattr__(self, attribute):
        """Forward any unsupported call to the shell onto the node."""
        node = self.__dict__.get('node')
        if node is not None:
            if hasattr(node, attribute):
                return getattr(node, attribute)
            else:
                notice(self, "Node does not have requested attribute.")
                raise AttributeError(attribute)
        else:
            notice(self, "Node has not been initialized.")
            raise AttributeError(attribute)

    def set_node(self, node):
        """Place a node in this shell and hand it the shell's interface."""
        self.node = node
        node.shell = self
        node.owner = self.owner
        node.init_after_set()


class DacNodeShell(BaseNodeShell):
    """Shell of one flux DAC.

    Args:
        owner (VirtualProcessor): Processor owning the DAC.
        assignment (DacAssignment): Identifier, role and programmed device.
        dac (TwoStageDac): DAC state.
        interface: Demultiplexer interface (or shell) delivering its pulses.
        device: Device whose observable measures this DAC, if any.
    """
    def __init__(self, owner, assignment, dac, interface=None, device=None):
        super(DacNodeShell, self).__init__(owner, "DAC %d" % assignment.dac_id)
        if interface is not None:
            self.interface.set(interface, owner)
        self.set_node(DacNode(assignment, dac, device))


# ----VIRTUAL NODES------------
class BaseVirtualNode(object):
    """Base class for virtual nodes.

    Attributes:
        shell (BaseNodeShell): Shell containing this node.
        owner: Owner of that shell.
    """
    def __init__(self):
        self.shell = None
        self.owner = None

    def init_after_set(self):
        """Called once the node sits in a shell."""
        pass


class DacNode(BaseVirtualNode):
    """A flux DAC reachable through the demultiplexer.

    Each DAC occupies one slot of one address tree; its COARSE stage hangs
    off leaf 2*slot and its FINE stage off leaf 2*slot + 1.

    Args:
        assignment (DacAssignment): Identifier, role and programmed device.
        dac (TwoStageDac): DAC state.
        device: Feedback device, None when the DAC has no observable.

    Attributes:
        dac_id (int): Chip-wide DAC identifier.
        role (str): Role of the DAC on its device.
        target (tuple): Device identifier, e.g. ('qubit', 3).
        tree_id (int): Address tree the DAC hangs off.
        slot (int): Slot of the DAC on its tree.
    """
    def __init__(self, assignment, dac, device=None):
        super(DacNode, self).__init__()
        self.dac_id = assignment.dac_id
        self.role = assignment.role
        self.target = assignment.device
        self.dac = dac
        self.device = device
        self.tree_id = None
        self.slot = None
        self.depth = None

    def init_after_set(self):
        interface = self.shell.interface
        if interface.contained_interface is None:
            return
        self.tree_id, self.slot = interface.locate(self.dac_id)
        self.depth = interface.depth
        notice(self.shell, "Tree %d, slot %d, %s." % (self.tree_id, self.slot,
                                                      self.role))

    @property
    def capacity_coarse(self):
        return self.dac.capacity_coarse

    @property
    def capacity_fine(self):
        return self.dac.capacity_fine

    def leaf(self, stage):
        return 2 * self.slot + (1 if stage == FINE else 0)

    def pulse_op(self, stage, polarity):
        """PulseOp carrying one quantum of a polarity into a stage."""
        return demux.PulseOp.for_leaf(self.tree_id, self.leaf(stage),
                                      self.depth, polarity)

    def counts(self):
        return self.dac.counts()

    def is_measurable(self):
        return self.device is not None and hasattr(self.device,
                                                   'compensation_current')
