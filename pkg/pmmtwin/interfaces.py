"""Interfaces module of the PMM digital twin.

This module defines interface classes and an interface shell class, which acts
as an intermediary between the interface and nodes.

- 'InterfaceShell' class:
    A wrapper that links the real interface object to classes and methods that
    try to access it.
- 'BaseInterface' class:
    A basic example of an interface object. Every interface should be based on it.
- 'DemuxInterface' class:
    Delivers SFQ pulses to the DACs of a chip through its demultiplexer trees.

Copyright (c) 2018 Daniel Marquina
"""

import math

from pmmtwin import demux
from pmmtwin.core import COARSE, FINE, ParameterError
from pmmtwin.utilities import notice


class InterfaceShell(object):
    """Intermediary between nodes, node shells and interfaces.

    Args:
        owner: Object that initializes this interface shell. It could be a
            virtual processor, a node shell, etc.
        interface (BaseInterface):
            Interface to be contained by this shell.

    Attributes:
        name: Always None; notices follow the owner chain.
        owner: Object that owns this shell.
        contained_interface (BaseInterface or a child): Interface contained by
            this shell.

    """
    def __init__(self, owner, interface=None):
        self.name = None
        self.owner = None
        self.contained_interface = None
        self.set(interface, owner)

    def set(self, interface, owner=None):
        """Update the interface contained by the shell.

        Owner can be None. This method is called when a node is initialized.

        Args:
            interface (BaseInterface): Interface to be contained by this shell.
            owner: Object that will own this interface shell.
        """
        if isinstance(interface, InterfaceShell):
            interface = interface.contained_interface
        if owner:
            self.owner = owner
        self.contained_interface = interface
        if interface and self.owner:
            self.contained_interface.owner = self.owner
        if interface:
            self.contained_interface.init_after_set()

    def set_owner(self, owner):
        """Set owner of this shell and its contained interface."""
        self.owner = owner
        if self.contained_interface:
            self.contained_interface.owner = owner

    def __getattr__(self, attribute):
        """Forward attribute calls to the contained interface.

        Args:
            attribute: Contained interface's attribute to be called.

        Returns:
            Contained interfaces's attribute.
        """
        contained = self.__dict__.get('contained_interface')
        if contained is not None:
            if hasattr(contained, attribute):
                return getattr(contained, attribute)
            else:
                notice(self, "Interface does not have requested attribute.")
                raise AttributeError(attribute)
        else:
            notice(self, "Interface shell is empty.")
            raise AttributeError(attribute)


class BaseInterface(object):
    """Base class of all interfaces.

    Args:
        owner: Object that initializes this interface.

    Attributes:
        owner: Object that owns this interface.
    """

    def __init__(self, owner=None):
        self.owner = owner

    def init_after_set(self):
        """Prepare the interface after it was assigned to an interface shell."""
        pass


class DemuxInterface(BaseInterface):
    """Pulse delivery through a set of address trees.

    Every tree has its own bias line; the address lines of a given depth are
    shared by all trees, so one address magnitude applies chip-wide. DAC d
    sits in slot d mod S of tree d // S, with S = 2**depth / 2 slots per
    tree. Transmission is strictly sequential.

    Args:
        owner: Object that instantiates this interface.
        dac_count (int): Number of DACs to reach.
        depth (int): Address lines per tree.
        gate (DemuxGate): Gate model of every tree.
        seed (int): Master seed of the tree error streams.
        drop_fraction (float): Share of gate errors that lose the pulse.

    Attributes:
        trees (list): AddressTree objects, built once the interface is set.
        address (float): Shared address magnitude, in mPhi0.
    """
    def __init__(self, owner=None, dac_count=0, depth=demux.REFERENCE_DEPTH,
                 gate=None, seed=None, drop_fraction=demux.DEFAULT_DROP_FRACTION):
        super(DemuxInterface, self).__init__(owner)
        if dac_count < 0:
            raise ParameterError("DAC count must not be negative")
        self.dac_count = int(dac_count)
        self.depth = int(depth)
        self.gate = gate or demux.DemuxGate()
        self.seed = seed
        self.drop_fraction = drop_fraction
        self.address = self.gate.nominal_address
        self.trees = []

    @property
    def name(self):
        return "demux interface (%d trees)" % self.tree_count

    @property
    def slots_per_tree(self):
        return (1 << self.depth) // 2

    @property
    def tree_count(self):
        return int(math.ceil(self.dac_count / float(self.slots_per_tree)))

    def init_after_set(self):
        """Build the trees once; later shells only share them."""
        if self.trees:
            return
        self.trees = [demux.AddressTree(self.depth, self.gate, tree_id, self.seed,
                                        self.drop_fraction)
                      for tree_id in range(self.tree_count)]
        notice(self, "%d DACs on %d depth-%d trees."
               % (self.dac_count, self.tree_count, self.depth))

    def tree(self, tree_id):
        return self.trees[tree_id]

    def locate(self, dac_id):
        """(tree_id, slot) of a DAC."""
        if not 0 <= dac_id < self.dac_count:
            raise ParameterError("no DAC %d on this interface" % dac_id)
        return divmod(dac_id, self.slots_per_tree)

    def dac_at(self, tree_id, leaf):
        """(dac_id, stage) hanging off a leaf, None for an unused leaf."""
        dac_id = tree_id * self.slots_per_tree + leaf // 2
        if dac_id >= self.dac_count:
            return None
        return dac_id, FINE if leaf & 1 else COARSE

    def reseed(self, seed):
        self.seed = seed
        for tree in self.trees:
            tree.reseed(seed)

    def set_gate_error(self, probability):
        """Give every gate of every tree a flat error probability."""
        self.gate = self.gate.replace(error_probability=probability)
        for tree in self.trees:
            tree.gates = [self.gate] * len(tree.gates)

    def set_operating_point(self, bias=None, address=None, tree_id=None):
        """Set a tree bias (all trees when tree_id is None) and the shared address."""
        if address is not None:
            self.address = float(address)
        targets = self.trees if tree_id is None else [self.trees[tree_id]]
        for tree in targets:
            tree.set_operating_point(bias, None)
        for tree in self.trees:
            tree.set_operating_point(None, self.address)

    def transmit(self, op):
        """Route one pulse; see 'AddressTree.route()'."""
        return self.trees[op.tree_id].route(op)

    def transmit_many(self, op, count):
        """Route 'count' copies of a pulse; see 'AddressTree.route_many()'."""
        return self.trees[op.tree_id].route_many(op.leaf, count, op.polarity)

    def bias_reversals(self):
        return sum(tree.reversals for tree in self.trees)
