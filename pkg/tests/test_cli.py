import io

import numpy as np
import pytest

from sdiqrng.cli import (
    EXIT_CERT_FAIL,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    CommandError,
    cmd_certify,
    cmd_extract,
    main,
)
from sdiqrng.config import RunConfig
from sdiqrng.extract import output_length, read_bit_file
from sdiqrng.formats import format_monitor_csv, parse_monitor_csv, read_records
from sdiqrng.physics import PHOTON_ENERGY_1550NM, DriftModel, NoiseModel, simulate_rounds
from sdiqrng.protocol import parse_session_log

CONFIG = """\
rep_rate_hz = 1e5
block_duration_s = 1
duration_s = 4
omega = 0.005
p_noise = 0.39
seed = 5
"""


@pytest.fixture(scope="module")
def session(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "run.cfg"
    cfg.write_text(CONFIG)
    rec = d / "run.sdiq"
    assert main(["simulate", str(cfg), str(rec)]) == EXIT_OK
    assert main(["certify", str(rec), str(cfg), "--witness-out", str(d / "w.txt")]) == EXIT_OK
    assert main(["seed", str(200_000), str(d / "seed.bin"), "--random-state", "3"]) == EXIT_OK
    return d


def test_simulate_round_trip(session):
    rounds, rate = read_records(session / "run.sdiq")
    ref, trace, _ = simulate_rounds(0.005, NoiseModel(0.39), DriftModel(), 400_000, 1e5, 5,
                                    monitor_period_s=1.0)
    assert rate == 1e5 and rounds == ref
    monitor = (session / "run.sdiq.monitor.csv").read_text()
    assert monitor == format_monitor_csv(trace)


def test_simulate_deterministic(session, tmp_path):
    out = tmp_path / "again.sdiq"
    assert main(["simulate", str(session / "run.cfg"), str(out)]) == EXIT_OK
    assert out.read_bytes() == (session / "run.sdiq").read_bytes()


def test_simulate_zero_duration(tmp_path):
    cfg = tmp_path / "zero.cfg"
    cfg.write_text("duration_s = 0\n")
    out = tmp_path / "zero.sdiq"
    assert main(["simulate", str(cfg), str(out)]) == EXIT_OK
    rounds, _ = read_records(out)
    assert len(rounds) == 0 and out.stat().st_size == 21


def test_simulate_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("p_noise = 3\n")
    assert main(["simulate", str(cfg), str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["simulate", str(tmp_path / "missing.cfg"), str(tmp_path / "x")]) == EXIT_CONFIG


def test_simulate_unwritable(session):
    assert main(["simulate", str(session / "run.cfg"), "/nonexistent/dir/x.sdiq"]) == EXIT_DATA


def test_certify_outputs(session):
    results = parse_session_log((session / "run.sdiq.session.csv").read_text())
    assert len(results) == 4
    assert sum(r.passed for r in results) >= 3
    assert all(r.certified_bits in (0, 686) for r in results)
    assert "gamma[0][0]" in (session / "w.txt").read_text()


def test_certify_replay_with_witness(session, tmp_path):
    log = tmp_path / "replay.csv"
    assert main(["certify", str(session / "run.sdiq"), str(session / "run.cfg"),
                 "--witness", str(session / "w.txt"), "--log", str(log)]) == EXIT_OK
    assert log.read_text() == (session / "run.sdiq.session.csv").read_text()


def test_certify_over_power_block(session, tmp_path):
    trace = parse_monitor_csv((session / "run.sdiq.monitor.csv").read_text(), 1.0)
    trace.power_w[2] *= 1.2
    mon = tmp_path / "hot.csv"
    mon.write_text(format_monitor_csv(trace))
    log = tmp_path / "hot.session.csv"
    assert main(["certify", str(session / "run.sdiq"), str(session / "run.cfg"),
                 "--monitor", str(mon), "--log", str(log)]) == EXIT_OK
    results = parse_session_log(log.read_text())
    assert not results[2].passed and results[2].certified_bits == 0
    assert results[2].measured_omega > 0.005


def test_certify_errors(session, tmp_path):
    cfg = str(session / "run.cfg")
    empty = tmp_path / "empty.sdiq"
    empty.write_bytes(b"")
    assert main(["certify", str(empty), cfg]) == EXIT_DATA
    corrupt = tmp_path / "corrupt.sdiq"
    data = bytearray((session / "run.sdiq").read_bytes())
    data[4] = 9
    corrupt.write_bytes(bytes(data))
    with pytest.raises(CommandError, match="byte offset 4"):
        cmd_certify(str(corrupt), cfg, out=io.StringIO())
    other = tmp_path / "other.cfg"
    other.write_text(CONFIG.replace("1e5", "2e5"))
    assert main(["certify", str(session / "run.sdiq"), str(other)]) == EXIT_CONFIG
    bad_w = tmp_path / "bad_w.txt"
    bad_w.write_text("zeta = 1\n")
    assert main(["certify", str(session / "run.sdiq"), cfg, "--witness", str(bad_w)]) == EXIT_CONFIG


def test_certify_all_fail(session, tmp_path):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text(CONFIG + "threshold_h = 0.5\n")
    log = tmp_path / "strict.csv"
    assert main(["certify", str(session / "run.sdiq"), str(cfg), "--log", str(log)]) \
        == EXIT_CERT_FAIL
    out = tmp_path / "never.bin"
    assert main(["extract", str(session / "run.sdiq"), str(log), str(session / "seed.bin"),
                 str(out)]) == EXIT_CERT_FAIL
    assert not out.exists()


def test_extract_accounting(session, tmp_path):
    out = tmp_path / "out.bin"
    args = ["extract", str(session / "run.sdiq"), str(session / "run.sdiq.session.csv"),
            str(session / "seed.bin"), str(out), "--config", str(session / "run.cfg")]
    assert main(args) == EXIT_OK
    results = parse_session_log((session / "run.sdiq.session.csv").read_text())
    expected = sum(output_length(r.certified_bits, 2.0 ** -64) for r in results if r.passed)
    assert read_bit_file(out).size == expected
    out2 = tmp_path / "out2.bin"
    args[4] = str(out2)
    assert main(args) == EXIT_OK
    assert out.read_bytes() == out2.read_bytes()


def test_extract_short_seed(session, tmp_path):
    assert main(["seed", "10", str(tmp_path / "s.bin"), "--random-state", "1"]) == EXIT_OK
    assert main(["extract", str(session / "run.sdiq"), str(session / "run.sdiq.session.csv"),
                 str(tmp_path / "s.bin"), str(tmp_path / "o.bin")]) == EXIT_DATA
    with pytest.raises(CommandError):
        cmd_extract(str(session / "run.sdiq"), str(tmp_path / "nolog.csv"),
                    str(session / "seed.bin"), str(tmp_path / "o.bin"), out=io.StringIO())


def test_figures(tmp_path):
    cfg = tmp_path / "fig.cfg"
    cfg.write_text("figure_points = 6\ngrid = 41\nduration_s = 3\n")
    for name in ("strategies", "entropy-vs-energy", "energy-monitor", "stability"):
        out = tmp_path / f"{name}.csv"
        assert main(["figure", name, str(out), "--config", str(cfg)]) == EXIT_OK
        again = tmp_path / f"{name}.2.csv"
        assert main(["figure", name, str(again), "--config", str(cfg)]) == EXIT_OK
        assert out.read_text() == again.read_text()
    rows = np.loadtxt(tmp_path / "strategies.csv", delimiter=",", skiprows=1)
    assert np.all(rows[:, 1] >= rows[:, 2] - 1e-12) and np.all(rows[:, 2] >= rows[:, 3] - 1e-12)
    mon = np.loadtxt(tmp_path / "energy-monitor.csv", delimiter=",", skiprows=1)
    assert np.all(mon[:, 1] <= mon[:, 2])


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["figure", "nope", "x.csv"])
    assert info.value.code == EXIT_USAGE
    assert "strategies" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE


def test_photon_energy_in_config_matches_constant():
    assert RunConfig().min_photon_energy_j == PHOTON_ENERGY_1550NM
