import argparse

import pytest

from pmmtwin import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def fixture_single_spin(fixture_problem_file):
    return fixture_problem_file(["# one biased spin", "h 0 1"])


############ Usage
def test_help_exits_cleanly(capsys):
    code, out, _ = run(capsys, '--help')
    assert code == 0
    assert "topology" in out


def test_unknown_flag_is_a_usage_error(capsys):
    code, _, err = run(capsys, 'topology', '--no-such-flag')
    assert code == 2
    assert "unrecognized" in err


def test_missing_command_is_a_usage_error(capsys):
    assert run(capsys)[0] == 2


def test_domain_error_exits_with_one(capsys, tmp_path):
    code, _, err = run(capsys, 'errorbound', '--operations', '0')
    assert code == 1
    assert err.startswith("pmm: error:")
    assert run(capsys, 'anneal', '--problem', str(tmp_path / "absent.txt"))[0] == 1


def test_parse_counts():
    assert cli.parse_counts("1,2,5") == [1, 2, 5]
    assert cli.parse_counts("-2..1") == [-2, -1, 0, 1]
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_counts(",")


############ Configuration
def test_config_file_supplies_defaults(capsys, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("rows = 2\ncols = 2\n")
    code, out, _ = run(capsys, '--config', str(config), 'topology')
    assert code == 0
    assert out.splitlines()[1] == "4,32,72,232,6000"


def test_flags_win_over_config_file(capsys, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("rows = 2\ncols = 2\n")
    code, out, _ = run(capsys, '--config', str(config), 'topology',
                       '--rows', '1', '--cols', '1')
    assert out.splitlines()[1] == "1,8,16,56,1500"


def test_missing_config_file(capsys, tmp_path):
    assert run(capsys, '--config', str(tmp_path / "none.cfg"), 'topology')[0] == 1


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(cli.SEED_VARIABLE, "42")
    assert cli.resolve_seed(argparse.Namespace(seed=None)) == 42
    assert cli.resolve_seed(argparse.Namespace(seed=3)) == 3
    monkeypatch.delenv(cli.SEED_VARIABLE)
    assert cli.resolve_seed(argparse.Namespace(seed=None)) == 0


def test_non_integer_seed_variable_is_reported(capsys, monkeypatch):
    monkeypatch.setenv(cli.SEED_VARIABLE, "abc")
    code, _, err = run(capsys, 'topology')
    assert code == 1
    assert err.startswith("pmm: error:")
    assert "'abc'" in err


############ Commands
def test_topology_table(capsys):
    code, out, _ = run(capsys, 'topology', '--rows', '4', '--cols', '4')
    assert code == 0
    assert out.splitlines() == ["cells,qubits,couplers,dacs,junctions",
                                "16,128,328,968,24000"]


def test_topology_edgelist(capsys):
    code, out, _ = run(capsys, 'topology', '--format', 'edgelist')
    lines = out.splitlines()
    assert len(lines) == 16
    assert "0 4" in lines


def test_errorbound(capsys):
    code, out, _ = run(capsys, 'errorbound', '--operations', '15000000')
    header, row = out.splitlines()
    assert header == "operations,errors,confidence,upper_one_sided,upper_two_sided"
    assert row == "15000000,0,0.95,2.00e-07,2.46e-07"


def test_errorbound_prints_three_significant_digits(capsys):
    assert run(capsys, 'errorbound', '--operations', '16136')[1].splitlines()[1] == \
        "16136,0,0.95,1.86e-04,2.29e-04"


def test_dac_table(capsys):
    code, out, _ = run(capsys, '--parameter-set', 'achieved', 'dac', '--table')
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("parameter_set,dac_type,coarse_step_mphi0")
    assert len(lines) == 5
    assert all(line.startswith("achieved,") for line in lines[1:])


def test_dac_staircase(capsys, tmp_path):
    target = tmp_path / "stairs.csv"
    code, out, _ = run(capsys, '--out', str(target), 'dac', '--coarse', '0..2',
                       '--fine', '0,1')
    assert out == ""
    lines = target.read_text().splitlines()
    assert lines[0] == "coarse,fine,n_coarse,n_fine,flux_phi0,saturated"
    assert len(lines) == 7


def test_demux_counts(capsys):
    code, out, _ = run(capsys, '--seed', '1', 'demux', '--pulses', '10000',
                       '--p-gate', '0')
    header, row = out.splitlines()
    assert header.startswith("pulses,delivered,dropped,misrouted")
    assert row.startswith("10000,10000,0,0,")


def test_noise_sweep(capsys):
    code, out, _ = run(capsys, 'noise', '--decades', '6', '7',
                       '--points-per-decade', '2')
    lines = out.splitlines()
    assert lines[0].startswith("f_hz,r_eq_empty_ohm,r_eq_full_ohm")
    assert len(lines) == 4


def test_device_potential(capsys):
    code, out, _ = run(capsys, 'device', '--points', '11')
    assert code == 0
    assert len(out.splitlines()) == 12


def test_sudden_anneal_samples_both_states(capsys, fixture_single_spin):
    code, out, err = run(capsys, 'anneal', '--problem', fixture_single_spin,
                         '--tf', '0', '--repeats', '1000', '--seed', '7')
    assert code == 0
    assert out.splitlines()[0] == "spins,count,energy,ground,fraction"
    fields = err.split()
    fraction = float(fields[fields.index('ground_fraction') + 1])
    assert fraction == pytest.approx(0.5, abs=0.06)


def test_program_without_gate_errors(capsys, fixture_problem_file):
    problem = fixture_problem_file(["h 0 0.5", "h 4 -0.25", "K 0 4 -0.3"])
    code, out, _ = run(capsys, '--seed', '3', 'program', '--problem', problem)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "mode incremental"
    assert "routing_errors 0" in lines
    assert "discrepancies 0" in lines
    assert int(lines[1].split()[1]) > 0


def test_calibrate_histogram(capsys, tmp_path):
    records = tmp_path / "cal.txt"
    code, out, _ = run(capsys, '--seed', '2', 'calibrate', '--bins', '4',
                       '--write', str(records))
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "k_low,k_high,count"
    assert len(lines) == 5
    assert records.exists()


def test_noise_free_calibration_recovers_true_k(capsys):
    code, out, _ = run(capsys, '--parameter-set', 'achieved', 'calibrate',
                       '--spread', '0', '--noise', '0')
    assert code == 0
    header, *rows = out.splitlines()
    assert header == "dac_id,role,true_k,k,gamma,analog_mutual_ph,uncertainty"
    fields = [row.split(',') for row in rows]
    assert set(field[1] for field in fields) == {'qubit-flux', 'breakout'}
    for field in fields:
        assert float(field[3]) == pytest.approx(float(field[2]), rel=1e-4)
        if field[1] == 'qubit-flux':
            assert float(field[3]) == pytest.approx(3.506e-3, abs=5e-7)
