"""Command-line entry point: ``sdiqrng {simulate,certify,extract,figure,seed}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .certify import InfeasibleBehaviorError, Witness
from .config import ConfigError, RunConfig
from .extract import (
    ToeplitzHasher,
    ToeplitzSeed,
    output_length,
    read_bit_file,
    write_bit_file,
)
from .figures import FIGURES
from .formats import (
    RecordFormatError,
    format_csv,
    format_monitor_csv,
    parse_monitor_csv,
    read_records,
    write_records,
)
from .physics import PowerTrace, Rounds, simulate_rounds
from .protocol import format_session_log, parse_session_log, run_session, summarize_session

log = logging.getLogger("sdiqrng")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_CERT_FAIL = 5


class CommandError(Exception):
    def __init__(self, message, status):
        super().__init__(message)
        self.status = status


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandError(f"cannot write {path}: {exc.strerror}", EXIT_DATA) from None


def _read_text(path, what):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CommandError(f"cannot read {what} {path}: {exc.strerror}", EXIT_DATA) from None


def _load_records(path):
    try:
        return read_records(path)
    except RecordFormatError as exc:
        raise CommandError(f"{path}: {exc}", EXIT_DATA) from None
    except OSError as exc:
        raise CommandError(f"cannot read records {path}: {exc.strerror}", EXIT_DATA) from None


def cmd_simulate(config_path, output_path, monitor_path=None, out=sys.stdout):
    cfg = RunConfig.load(config_path)
    monitor_path = monitor_path or f"{output_path}.monitor.csv"
    n = cfg.total_rounds
    if n == 0:
        rounds = Rounds(np.zeros(0, np.uint8), np.zeros(0, np.uint8))
        trace = PowerTrace(np.zeros(0), np.zeros(0), cfg.block_duration_s)
        schedule = None
    else:
        rounds, trace, schedule = simulate_rounds(
            cfg.source_mean_photon, cfg.noise_model, cfg.drift_model, n, cfg.rep_rate_hz,
            cfg.seed, monitor_period_s=cfg.block_duration_s,
            min_photon_energy_j=cfg.min_photon_energy_j)
    try:
        write_records(output_path, rounds, cfg.rep_rate_hz)
    except OSError as exc:
        raise CommandError(f"cannot write {output_path}: {exc.strerror}", EXIT_DATA) from None
    _write_text(monitor_path, format_monitor_csv(trace))

    print(f"rounds            {n}", file=out)
    if n:
        success = float(np.mean(rounds.x == rounds.b))
        expected = float(cfg.expected_behavior()[1, 1])
        print(f"p(b=x|x)          {success:.6f}", file=out)
        print(f"model p(b=x|x)    {expected:.6f}", file=out)
        print(f"3-sigma band      {3 * np.sqrt(expected * (1 - expected) / n):.6f}", file=out)
        print(f"phase lock        mean|cos|={schedule.mean_abs_cos:.5f}"
              f"{' DEGRADED' if schedule.degraded else ''}", file=out)
    print(f"records           {output_path}", file=out)
    print(f"monitor           {monitor_path}", file=out)
    return EXIT_OK


def cmd_certify(records_path, config_path, log_path=None, monitor_path=None,
                witness_path=None, witness_out=None, out=sys.stdout):
    cfg = RunConfig.load(config_path)
    rounds, rep_rate = _load_records(records_path)
    if rep_rate != cfg.rep_rate_hz:
        raise CommandError(f"record file rep_rate_hz={rep_rate} differs from config "
                           f"rep_rate_hz={cfg.rep_rate_hz}", EXIT_CONFIG)
    if len(rounds) < cfg.block_rounds:
        raise CommandError(f"{records_path}: {len(rounds)} rounds, fewer than one block "
                           f"({cfg.block_rounds})", EXIT_DATA)
    monitor_path = monitor_path or f"{records_path}.monitor.csv"
    try:
        trace = parse_monitor_csv(_read_text(monitor_path, "monitor CSV"), cfg.block_duration_s)
    except ValueError as exc:
        raise CommandError(f"{monitor_path}: {exc}", EXIT_DATA) from None

    witness = None
    if witness_path:
        try:
            witness = Witness.from_text(_read_text(witness_path, "witness"))
        except ValueError as exc:
            raise CommandError(f"{witness_path}: {exc}", EXIT_CONFIG) from None
    try:
        pcfg = cfg.protocol_config(witness)
    except InfeasibleBehaviorError as exc:
        raise CommandError(f"expected behavior is infeasible: {exc}", EXIT_CONFIG) from None
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_CONFIG) from None
    if witness_out:
        _write_text(witness_out, pcfg.witness.to_text())

    results = run_session(rounds, trace, pcfg, cfg.min_photon_energy_j)
    log_path = log_path or f"{records_path}.session.csv"
    _write_text(log_path, format_session_log(results))
    summary = summarize_session(results, pcfg)
    print(f"threshold h          {pcfg.threshold_h:.6f}", file=out)
    print(f"blocks passed        {summary.blocks_passed}/{summary.blocks_total}", file=out)
    print(f"success fraction     {summary.success_fraction:.4f}", file=out)
    print(f"certified rate       {summary.certified_rate_hz:.6g} Hz (asymptotic)", file=out)
    print(f"finite-size rate     {summary.finite_size_rate_hz:.6g} Hz", file=out)
    print(f"session log          {log_path}", file=out)
    return EXIT_OK if summary.blocks_passed else EXIT_CERT_FAIL


def cmd_extract(records_path, log_path, seed_path, output_path, config_path=None,
                out=sys.stdout):
    cfg = RunConfig.load(config_path) if config_path else RunConfig()
    rounds, rep_rate = _load_records(records_path)
    try:
        results = parse_session_log(_read_text(log_path, "session log"))
    except ValueError as exc:
        raise CommandError(f"{log_path}: {exc}", EXIT_DATA) from None
    n_block = int(round(rep_rate * cfg.block_duration_s))
    passing = [r for r in results if r.passed and r.certified_bits > 0]
    lengths = [output_length(r.certified_bits, cfg.epsilon_ext) for r in passing]
    if not passing or sum(lengths) == 0:
        raise CommandError("no certified bits in session log; refusing to extract",
                           EXIT_CERT_FAIL)
    try:
        seed_bits = read_bit_file(seed_path)
    except (OSError, ValueError) as exc:
        raise CommandError(f"cannot read seed file {seed_path}: {exc}", EXIT_DATA) from None

    hashers = {}
    chunks = []
    for r, m in zip(passing, lengths):
        if m == 0:
            continue
        lo, hi = r.index * n_block, (r.index + 1) * n_block
        if hi > len(rounds):
            raise CommandError(f"block {r.index} lies beyond the record file", EXIT_DATA)
        if m not in hashers:
            try:
                hashers[m] = ToeplitzHasher(ToeplitzSeed.from_bits(seed_bits, n_block, m))
            except ValueError as exc:
                raise CommandError(f"seed file {seed_path}: {exc}", EXIT_DATA) from None
        chunks.append(hashers[m](rounds.b[lo:hi]))
    bits = np.concatenate(chunks)
    try:
        write_bit_file(output_path, bits)
    except OSError as exc:
        raise CommandError(f"cannot write {output_path}: {exc.strerror}", EXIT_DATA) from None
    print(f"blocks extracted     {len(chunks)}", file=out)
    print(f"output bits          {bits.size}", file=out)
    return EXIT_OK


def cmd_figure(name, config_path, output_path, out=sys.stdout):
    if name not in FIGURES:
        raise CommandError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}",
                           EXIT_USAGE)
    cfg = RunConfig.load(config_path) if config_path else RunConfig()
    _write_text(output_path, format_csv(FIGURES[name](cfg)))
    print(f"wrote {name} data to {output_path}", file=out)
    return EXIT_OK


def cmd_seed(n_bits, output_path, random_state=None, out=sys.stdout):
    if random_state is None:
        rng = np.random.default_rng(int.from_bytes(os.urandom(16), "little"))
    else:
        rng = np.random.default_rng(random_state)
    write_bit_file(output_path, rng.integers(0, 2, n_bits, dtype=np.uint8))
    print(f"wrote {n_bits} seed bits to {output_path}", file=out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sdiqrng", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate rounds and monitor power")
    p.add_argument("config")
    p.add_argument("output", help="record file to write")
    p.add_argument("--monitor", help="monitor CSV path (default OUTPUT.monitor.csv)")

    p = sub.add_parser("certify", help="run the block protocol over a record file")
    p.add_argument("records")
    p.add_argument("config")
    p.add_argument("--log", help="session log path (default RECORDS.session.csv)")
    p.add_argument("--monitor", help="monitor CSV path (default RECORDS.monitor.csv)")
    p.add_argument("--witness", help="use this witness file instead of building one")
    p.add_argument("--witness-out", help="write the witness used to this file")

    p = sub.add_parser("extract", help="hash the outputs of passing blocks")
    p.add_argument("records")
    p.add_argument("log", help="session log from 'certify'")
    p.add_argument("seed", help="length-prefixed seed bit file")
    p.add_argument("output")
    p.add_argument("--config")

    p = sub.add_parser("figure", help="write CSV data for a figure analogue")
    p.add_argument("name", choices=sorted(FIGURES))
    p.add_argument("output")
    p.add_argument("--config")

    p = sub.add_parser("seed", help="write a random seed bit file")
    p.add_argument("n_bits", type=int)
    p.add_argument("output")
    p.add_argument("--random-state", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.output, args.monitor)
        if args.command == "certify":
            return cmd_certify(args.records, args.config, args.log, args.monitor,
                               args.witness, args.witness_out)
        if args.command == "extract":
            return cmd_extract(args.records, args.log, args.seed, args.output, args.config)
        if args.command == "figure":
            return cmd_figure(args.name, args.config, args.output)
        if args.command == "seed":
            return cmd_seed(args.n_bits, args.output, args.random_state)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except CommandError as exc:
        log.error("%s", exc)
        return exc.status
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
