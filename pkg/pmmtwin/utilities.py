"""Utilities module of the PMM digital twin.

This module contains various classes and methods shared by every other
module of the package.

- 'PersistenceManager' class:
    Defines an object which is in charge of managing the creation, writing and
    reading of key=value parameter and calibration files.
- 'notice' method:
    Shows notifications about the execution of the twin using a logger.
- 'configure_logging' method:
    Attaches a stderr handler to the package logger.
- 'make_rng' method:
    Returns an independent, seeded random stream identified by a name.
- 'write_csv' method:
    Emits rows with a single header line in a locale-independent format.

Copyright (c) 2018 Daniel Marquina
"""

import configparser
import csv
import datetime
import logging
import numbers
import sys
import zlib

import numpy as np

from pmmtwin.core import ProblemFormatError

log = logging.getLogger("pmmtwin")

# Section holding keys written before any '[section]' header.
TOP_SECTION = '__top__'


class PersistenceManager(object):
    """Manager of key=value persistence files.

    DAC parameter tables, calibration records and command line run
    configurations are all stored as plain text files with optional
    '[section]' headers, 'key = value' lines and '#' comments. This class
    manages such files. When a namespace is given, section names are prefixed
    with it, so 'dac' and '12' are stored under '[dac.12]'.

    Args:
        filename (str): Future name of persistence file.
        namespace (str): Prefix of every section handled by this manager.

    Attributes:
        filename (str): Name of persistence file.
        namespace (str): Prefix of sections owned by this manager.
    """

    def __init__(self, filename=None, namespace=None):
        self.filename = filename
        self.namespace = namespace

    def __call__(self):
        """Override '__call__()' method.

        Makes sure that a persistence file exists before trying to use it.

        Returns:
            'self', if was previously initialized, False otherwise.
        """
        if self.filename:
            return self
        else:
            return False

    def section_name(self, name):
        if self.namespace:
            return self.namespace + '.' + str(name)
        return str(name)

    def get(self, name):
        """Get a stored section.

        Args:
            name (str): Section name, without namespace.

        Returns:
            A dict of string values, if found; else, None.
        """
        persistence_dict = self.read_persistence_dictionary()
        return persistence_dict.get(self.section_name(name))

    def store(self, name, values):
        """Store a section, replacing keys it already had.

        Args:
            name (str): Section name, without namespace.
            values (dict): Keys and values to store. Values are written with
                'str()', floats with 'repr()'.
        """
        persistence_dict = self.read_persistence_dictionary()
        section = persistence_dict.setdefault(self.section_name(name), {})
        section.update(values)
        self.write_persistence_dictionary(persistence_dict)

    def sections(self):
        """Names of stored sections owned by this manager, namespace removed."""
        prefix = self.namespace + '.' if self.namespace else ''
        names = []
        for section in self.read_persistence_dictionary():
            if section == TOP_SECTION:
                continue
            if section.startswith(prefix):
                names.append(section[len(prefix):])
        return names

    def read_persistence_dictionary(self):
        """Copy persistence file's content into a dictionary of sections.

        Keys found before the first section header are returned under
        'TOP_SECTION'. A missing file reads as an empty dictionary.
        """
        try:
            with open(self.filename, 'r', encoding='utf-8') as file_object:
                text = file_object.read()
        except (IOError, TypeError):
            return {}
        return parse_key_value(text, self.filename)

    def write_persistence_dictionary(self, persistence_dict):
        """Write actual persistence file's content.

        Persistence file's content consists of a title comment and one block
        of 'key = value' lines per section.

        Args:
            persistence_dict (dict): Sections to be stored, as returned by
                'read_persistence_dictionary()'.
        """
        with open(self.filename, 'w', encoding='utf-8') as file_object:
            file_object.write("# This PMM persistence file was auto-generated @ " +
                              str(datetime.datetime.now()) + "\n")
            top = persistence_dict.get(TOP_SECTION, {})
            for key in top:
                file_object.write(key + " = " + format_value(top[key]) + "\n")
            for section in persistence_dict:
                if section == TOP_SECTION:
                    continue
                file_object.write("\n[" + section + "]\n")
                for key, value in persistence_dict[section].items():
                    file_object.write(key + " = " + format_value(value) + "\n")


def parse_key_value(text, filename='<string>'):
    """Parse key=value text into a dictionary of sections.

    Args:
        text (str): File content.
        filename (str): Used in error messages only.

    Returns:
        A dict mapping section names to dicts of string values.
    """
    parser = configparser.ConfigParser(delimiters=('=',),
                                       comment_prefixes=('#',),
                                       inline_comment_prefixes=('#',),
                                       interpolation=None,
                                       default_section='__defaults__')
    parser.optionxform = str
    try:
        parser.read_string("[" + TOP_SECTION + "]\n" + text, source=filename)
    except configparser.Error as error:
        raise ProblemFormatError(filename, getattr(error, 'lineno', 0) or 0,
                                 str(error).splitlines()[0])
    result = {}
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == TOP_SECTION and not values:
            continue
        result[section] = values
    return result


def format_value(value):
    """Render a value in a locale-independent way."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    return str(value)


def notice(source=None, message=""):
    """Send a notice to the user.

    Every notice is sent to the package logger at debug level, so it can be
    redirected by whoever configures logging (the command line does so with
    'configure_logging()').

    Args:
        source (VirtualProcessor, DacNodeShell, etc.): Object that sends a
            notice. Its 'name' is used when set; otherwise its 'owner' chain
            is followed.
        message (str): Message to display.
    """
    name = getattr(source, 'name', None)
    if name:
        log.debug(str(name) + ": " + str(message))
        return
    owner = getattr(source, 'owner', None)
    if owner:
        notice(owner, message)
    else:
        log.debug(str(source) + ": " + str(message))


def configure_logging(level=logging.WARNING, stream=None):
    """Attach a single stream handler to the package logger.

    Args:
        level (int): Logging level.
        stream: Output stream, stderr by default so data on stdout stays clean.
    """
    if stream is None:
        stream = sys.stderr
    for handler in list(log.handlers):
        if getattr(handler, '_pmm_handler', False):
            log.removeHandler(handler)
    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    handler._pmm_handler = True
    log.addHandler(handler)
    log.setLevel(level)
    return log


def stream_key(name):
    """Map a stream name onto a stable 32-bit integer."""
    if isinstance(name, numbers.Integral):
        return int(name)
    return zlib.crc32(str(name).encode('utf-8'))


def make_rng(seed, *stream):
    """Return a seeded random generator for a named stream.

    Streams sharing a seed but differing in name are statistically
    independent; the same (seed, name) always yields the same sequence.

    Args:
        seed (int): Master seed. None draws fresh OS entropy.
        *stream: Names (str or int) identifying the stream, e.g.
            ('tree', 0) for the error stream of address tree 0.

    Returns:
        A numpy.random.Generator.
    """
    key = tuple(stream_key(name) for name in stream)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def as_rng(rng_or_seed, *stream):
    """Accept either a Generator or a seed and return a Generator."""
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return make_rng(rng_or_seed, *stream)


def write_csv(stream, header, rows):
    """Write rows as comma separated values with a single header row.

    Floats are written with 'repr()', which never depends on the locale.

    Args:
        stream: Text stream to write to.
        header (list): Column names.
        rows (iterable): Sequences of values, one per row.
    """
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(value) for value in row])
