"""Command line entry point of the PMM digital twin.

Every subcommand writes its data as CSV with a single header row, to
stdout or to '--out FILE'; diagnostics go to stderr. Exit codes are 0 on
success, 1 on a domain error and 2 on a usage error.

Options given on the command line win over the top-level keys of a
'--config' key=value file, which win over built-in defaults. Without a
seed anywhere, the environment variable PMM_SEED is used, then 0.

Copyright (c) 2018 Daniel Marquina
"""

import argparse
import collections
import contextlib
import logging
import math
import os
import sys

import numpy as np

from pmmtwin import annealer, controller, demux, device, flux_dac, machines, \
    noise, topology
from pmmtwin.core import ParameterError, PmmError
from pmmtwin.utilities import TOP_SECTION, PersistenceManager, \
    configure_logging, write_csv

SEED_VARIABLE = 'PMM_SEED'
MODES = {'incremental': controller.INCREMENTAL, 'reset': controller.RESET_FIRST}


def parse_counts(text):
    """Integer list from '1,2,5' or an inclusive range '-6..6'."""
    values = []
    for part in text.split(','):
        part = part.strip()
        if '..' in part[1:]:
            cut = part.index('..', 1)
            low, high = int(part[:cut]), int(part[cut + 2:])
            values.extend(range(low, high + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError("empty count list %r" % text)
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog='pmm', description="Digital twin of a flux-DAC programmed "
                                "superconducting processor.")
    parser.add_argument('-v', '--verbose', action='store_true',
                        help="debug notices on stderr")
    parser.add_argument('--config', help="key=value run configuration file")
    parser.add_argument('--seed', type=int, default=None, help="master seed")
    parser.add_argument('--parameter-set', choices=flux_dac.PARAMETER_SETS,
                        default=flux_dac.DESIGNED)
    parser.add_argument('--out', help="write data to this file instead of stdout")
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    sub = commands.add_parser('topology', help="parts count or edge list")
    sub.add_argument('--rows', type=int, default=1)
    sub.add_argument('--cols', type=int, default=1)
    sub.add_argument('--format', choices=('table', 'edgelist'), default='table')
    sub.set_defaults(handler=run_topology)

    sub = commands.add_parser('dac', help="DAC staircase or parameter tables")
    sub.add_argument('--type', choices=flux_dac.DAC_TYPE_NAMES, default='QubitFlux')
    sub.add_argument('--coarse', type=parse_counts,
                     help="COARSE counts, e.g. '14,15,16' or '-25..25'")
    sub.add_argument('--fine', type=parse_counts, default=[0],
                     help="FINE counts swept at every COARSE count")
    sub.add_argument('--table', action='store_true',
                     help="print the DAC type tables instead")
    sub.set_defaults(handler=run_dac)

    sub = commands.add_parser('demux', help="Monte-Carlo routing statistics")
    sub.add_argument('--pulses', type=int, default=1000000)
    sub.add_argument('--p-gate', type=float, default=1e-3)
    sub.add_argument('--leaf', type=int, default=0)
    sub.add_argument('--sweep', action='store_true',
                     help="failure probability versus tree bias instead")
    sub.add_argument('--bias-min', type=float, default=80.0)
    sub.add_argument('--bias-max', type=float, default=135.0)
    sub.add_argument('--bias-points', type=int, default=56)
    sub.set_defaults(handler=run_demux)

    sub = commands.add_parser('margins', help="bias and address margin scan")
    sub.add_argument('--bias-min', type=float, default=80.0)
    sub.add_argument('--bias-max', type=float, default=120.0)
    sub.add_argument('--bias-points', type=int, default=21)
    sub.add_argument('--address-min', type=float, default=100.0)
    sub.add_argument('--address-max', type=float, default=500.0)
    sub.add_argument('--address-points', type=int, default=21)
    sub.add_argument('--trials', type=int, default=100)
    sub.set_defaults(handler=run_margins)

    sub = commands.add_parser('errorbound', help="Clopper-Pearson upper bounds")
    sub.add_argument('--operations', type=int, required=True)
    sub.add_argument('--errors', type=int, default=0)
    sub.add_argument('--confidence', type=float, default=0.95)
    sub.set_defaults(handler=run_errorbound)

    sub = commands.add_parser('noise', help="R_eq and flux noise sweep")
    sub.add_argument('--decades', type=float, nargs=2, default=[6.0, 11.0],
                     metavar=('LO', 'HI'))
    sub.add_argument('--points-per-decade', type=int, default=10)
    sub.set_defaults(handler=run_noise)

    sub = commands.add_parser('device', help="qubit potential along phi_q")
    sub.add_argument('--phi-cjj', type=float, default=device.CJJ_OPERATING_BIAS)
    sub.add_argument('--phi-q-ext', type=float, default=0.0)
    sub.add_argument('--points', type=int, default=201)
    sub.set_defaults(handler=run_device)

    sub = commands.add_parser('anneal', help="anneal a problem and sample it")
    sub.add_argument('--problem', required=True)
    sub.add_argument('--tf', type=float, default=100.0, help="run time, in ns")
    sub.add_argument('--repeats', type=int, default=128)
    sub.add_argument('--seed', type=int, default=argparse.SUPPRESS)
    sub.add_argument('--schedule', help="'s A B' schedule file")
    sub.add_argument('--method', choices=(annealer.EXPM, annealer.SPLIT),
                     default=annealer.EXPM)
    sub.add_argument('--steps', type=int, default=None)
    sub.set_defaults(handler=run_anneal)

    sub = commands.add_parser('program', help="load a problem into the DACs")
    sub.add_argument('--problem', required=True)
    sub.add_argument('--calibration', help="calibration file")
    sub.add_argument('--mode', choices=sorted(MODES), default='incremental')
    sub.add_argument('--seed', type=int, default=argparse.SUPPRESS)
    sub.add_argument('--p-gate', type=float, default=0.0)
    sub.add_argument('--reset-mismatch', type=float, default=0.0)
    sub.add_argument('--state', help="file keeping DAC states between runs")
    sub.set_defaults(handler=run_program)

    sub = commands.add_parser('calibrate', help="calibrate every measurable DAC")
    sub.add_argument('--rows', type=int, default=1)
    sub.add_argument('--cols', type=int, default=1)
    sub.add_argument('--spread', type=float, default=flux_dac.FABRICATION_SIGMA)
    sub.add_argument('--noise', type=float, default=controller.NOISE_FINE_STEPS,
                     help="measurement noise, in FINE steps")
    sub.add_argument('--bins', type=int, default=0,
                     help="emit a k histogram with this many bins")
    sub.add_argument('--write', help="calibration file to write")
    sub.set_defaults(handler=run_calibrate)
    return parser


def apply_config(parser, argv):
    """Use the top-level keys of a '--config' file as parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    manager = PersistenceManager(known.config)
    if not os.path.exists(known.config):
        raise PmmError("configuration file %s not found" % known.config)
    values = manager.read_persistence_dictionary().get(TOP_SECTION, {})
    defaults = dict((key.replace('-', '_'), value) for key, value in values.items())
    own = set(action.dest for action in parser._actions)
    parser.set_defaults(**dict((key, value) for key, value in defaults.items()
                               if key in own))
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            dests = set(a.dest for a in sub._actions) - own
            sub.set_defaults(**dict((key, value) for key, value in defaults.items()
                                    if key in dests))


def resolve_seed(args):
    """Master seed: --seed, then the PMM_SEED variable, then 0."""
    value = args.seed if args.seed is not None else os.environ.get(SEED_VARIABLE, 0)
    try:
        return int(value)
    except ValueError:
        raise ParameterError("seed must be an integer, got %r" % (value,))


def run_topology(args, out):
    grid = topology.build_grid(args.rows, args.cols)
    if args.format == 'edgelist':
        for i, j in grid.edge_list():
            out.write("%d %d\n" % (i, j))
        return 0
    count = topology.parts_count(grid)
    write_csv(out, ['cells', 'qubits', 'couplers', 'dacs', 'junctions'],
              [[grid.cell_count, count.qubits, count.couplers, count.dacs,
                count.junctions]])
    return 0


def run_dac(args, out):
    if args.table:
        write_csv(out, ['parameter_set', 'dac_type', 'coarse_step_mphi0',
                        'fine_step_mphi0', 'gamma', 'capacity_coarse',
                        'capacity_fine', 'max_coupled_flux', 'overlap_ratio',
                        'levels'],
                  [[row.parameter_set, row.dac_type, row.coarse_step_mphi0,
                    row.fine_step_mphi0, row.gamma, row.capacity_coarse,
                    row.capacity_fine, row.max_coupled_flux, row.overlap_ratio,
                    row.levels] for row in flux_dac.dac_table(args.parameter_set)])
        return 0
    dac = flux_dac.TwoStageDac.from_type(args.type, args.parameter_set)
    coarse = args.coarse or list(range(-dac.capacity_coarse - 3,
                                       dac.capacity_coarse + 4))
    write_csv(out, ['coarse', 'fine', 'n_coarse', 'n_fine', 'flux_phi0', 'saturated'],
              [[s.coarse, s.fine, s.n_coarse, s.n_fine, s.flux, int(s.saturated)]
               for s in flux_dac.staircase(dac, coarse, args.fine)])
    return 0


def run_demux(args, out):
    gate = demux.DemuxGate(error_probability=args.p_gate)
    tree = demux.AddressTree(gate=gate, seed=args.seed)
    if args.sweep:
        grid = np.linspace(args.bias_min, args.bias_max, args.bias_points)
        write_csv(out, ['bias_ua', 'failure_probability'],
                  demux.error_curve(tree, grid, args.leaf))
        return 0
    stats = tree.route_many(args.leaf, args.pulses)
    failed = stats.dropped + stats.misrouted
    predicted = tree.failure_probability(args.leaf)
    sigma = math.sqrt(args.pulses * predicted * (1.0 - predicted))
    write_csv(out, ['pulses', 'delivered', 'dropped', 'misrouted', 'error_rate',
                    'predicted_rate', 'sigma_errors'],
              [[stats.pulses, stats.delivered, stats.dropped, stats.misrouted,
                failed / float(stats.pulses), predicted, sigma]])
    return 0


def run_margins(args, out):
    tree = demux.AddressTree(seed=args.seed)
    points = demux.margin_scan(
        tree, np.linspace(args.bias_min, args.bias_max, args.bias_points),
        np.linspace(args.address_min, args.address_max, args.address_points),
        args.trials, rng_seed=args.seed)
    write_csv(out, ['bias_ua', 'address_mphi0', 'pass_fraction', 'passed'],
              [[p.bias, p.address, p.pass_fraction, int(p.passed)] for p in points])
    return 0


def run_errorbound(args, out):
    one_sided = demux.error_upper_bound(args.operations, args.errors, args.confidence)
    two_sided = demux.error_upper_bound(args.operations, args.errors,
                                        args.confidence, two_sided=True)
    write_csv(out, ['operations', 'errors', 'confidence', 'upper_one_sided',
                    'upper_two_sided'],
              [[args.operations, args.errors, args.confidence,
                '%.2e' % one_sided, '%.2e' % two_sided]])
    return 0


def run_noise(args, out):
    params = noise.NoiseCircuitParams()
    frequencies = noise.log_frequencies(args.decades[0], args.decades[1],
                                        args.points_per_decade)
    rows = []
    for row in noise.sweep(params, frequencies):
        rows.append([row.f_hz, row.r_eq_empty, row.r_eq_full,
                     noise.flux_noise_density(row.r_eq_empty, params.L_q,
                                              params.temperature),
                     noise.flux_noise_density(row.r_eq_full, params.L_q,
                                              params.temperature)])
    write_csv(out, ['f_hz', 'r_eq_empty_ohm', 'r_eq_full_ohm',
                    'flux_noise_empty_phi0_rthz', 'flux_noise_full_phi0_rthz'], rows)
    return 0


def run_device(args, out):
    params = device.QubitParams()
    phi = np.linspace(args.phi_q_ext - 1.0, args.phi_q_ext + 1.0, args.points)
    energy = device.potential(params, phi, args.phi_q_ext, args.phi_cjj, args.phi_cjj)
    write_csv(out, ['phi_q', 'potential'], zip(phi.tolist(), energy.tolist()))
    return 0


def _problem_on_grid(filename):
    size = annealer.read_problem(filename).n
    grid = annealer.grid_for(size)
    return annealer.read_problem(filename, grid.edge_set(), size), grid


def run_anneal(args, out):
    problem, _ = _problem_on_grid(args.problem)
    if args.schedule:
        schedule = annealer.AnnealSchedule.from_file(args.schedule, args.tf,
                                                     args.steps, args.method)
    else:
        schedule = annealer.AnnealSchedule.default(args.tf, args.steps, args.method)
    result = annealer.anneal(problem, schedule, args.repeats, args.seed)
    tally = collections.Counter(tuple(int(x) for x in row) for row in result.outcomes)
    energies = dict((tuple(int(x) for x in row), energy)
                    for row, energy in zip(result.outcomes, result.energies))
    rows = [[' '.join('%+d' % x for x in spins), count, energies[spins],
             int(energies[spins] == result.optimum), count / float(args.repeats)]
            for spins, count in sorted(tally.items())]
    write_csv(out, ['spins', 'count', 'energy', 'ground', 'fraction'], rows)
    sys.stderr.write("ground_fraction %s ground_probability %s\n"
                     % (repr(result.ground_fraction), repr(result.ground_probability)))
    return 0


def run_program(args, out):
    problem, grid = _problem_on_grid(args.problem)
    calibration = (controller.load_calibration(args.calibration)
                   if args.calibration else None)
    table = flux_dac.DAC_TYPES[args.parameter_set]
    quantized = annealer.quantize_problem(problem, grid, table,
                                          calibration=calibration)
    processor = machines.VirtualProcessor(
        rows=grid.rows, cols=grid.cols, parameter_set=args.parameter_set,
        gate=demux.DemuxGate(error_probability=args.p_gate), seed=args.seed,
        reset_mismatch=args.reset_mismatch, persistenceFile=args.state)
    program, report = controller.Controller(processor).program(
        quantized.targets, MODES[args.mode], args.seed)
    cost = controller.program_cost(program)
    out.write("mode %s\n" % program.mode)
    out.write("pulses %d\n" % cost.pulse_count)
    out.write("bias_reversals %d\n" % cost.bias_reversals)
    out.write("cooldown_s %r\n" % cost.cooldown)
    out.write("max_relative_error %r\n" % quantized.max_error)
    out.write("routing_errors %d\n" % report.routing_errors)
    for (dac_id, stage), residual in sorted(report.residuals.items()):
        out.write("residual dac=%d stage=%s quanta=%d\n" % (dac_id, stage, residual))
    for item in report.discrepancies:
        out.write("discrepancy dac=%d expected=%d,%d achieved=%d,%d causes=%s\n"
                  % ((item.dac_id,) + tuple(item.expected) + tuple(item.achieved) +
                     ('+'.join(item.causes) or 'unknown',)))
    out.write("discrepancies %d\n" % len(report.discrepancies))
    return 0 if report.ok else 1


def run_calibrate(args, out):
    processor = machines.VirtualProcessor(
        rows=args.rows, cols=args.cols, parameter_set=args.parameter_set,
        seed=args.seed, spread=args.spread)
    records = controller.Controller(processor).calibrate_all(
        rng_seed=args.seed, noise_steps=args.noise)
    if args.write:
        controller.save_calibration(args.write, records)
    if args.bins:
        write_csv(out, ['k_low', 'k_high', 'count'],
                  controller.k_histogram(records, args.bins))
        return 0
    rows = []
    for dac_id, record in records.items():
        node = processor.node(dac_id)
        rows.append([dac_id, node.role, node.dac.k, record.k, record.gamma,
                     record.analog_mutual, record.uncertainty])
    write_csv(out, ['dac_id', 'role', 'true_k', 'k', 'gamma', 'analog_mutual_ph',
                    'uncertainty'], rows)
    return 0


@contextlib.contextmanager
def output_stream(filename):
    if filename is None:
        yield sys.stdout
    else:
        with open(filename, 'w', encoding='utf-8', newline='') as stream:
            yield stream


def main(argv=None):
    """Run one command.

    Args:
        argv (list): Arguments without the program name, sys.argv by default.

    Returns:
        Exit code.
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return 0 if stop.code is None else stop.code
    except PmmError as error:
        sys.stderr.write("pmm: error: %s\n" % error)
        return 1
    configure_logging(logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.seed = resolve_seed(args)
        with output_stream(args.out) as out:
            return args.handler(args, out)
    except (PmmError, OSError) as error:
        sys.stderr.write("pmm: error: %s\n" % error)
        return 1


if __name__ == '__main__':
    sys.exit(main())
