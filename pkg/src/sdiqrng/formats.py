"""On-disk formats: round-record binary file and monitor CSV.

Record file layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"SDIQ"
    4       1     version (1)
    5       8     rep_rate_hz, IEEE-754 double
    13      8     round count n, uint64
    21      ...   ceil(n / 4) payload bytes

Each payload byte holds four rounds, two bits per round, LSB-first: round
``j`` sits at bits ``2k`` (x) and ``2k + 1`` (b) of byte ``j // 4`` with
``k = j % 4``. Unused bits of the last byte are zero.
"""

from __future__ import annotations

import csv
import io
import struct

import numpy as np

from .physics import PowerTrace, Rounds

MAGIC = b"SDIQ"
VERSION = 1
_HEADER = struct.Struct("<4sBdQ")
HEADER_SIZE = _HEADER.size


class RecordFormatError(ValueError):
    """Malformed record file; ``offset`` is the first offending byte."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def encode_records(rounds: Rounds, rep_rate_hz: float) -> bytes:
    n = len(rounds)
    codes = (rounds.x | (rounds.b << 1)).astype(np.uint8)
    padded = np.zeros(-(-n // 4) * 4, dtype=np.uint8)
    padded[:n] = codes
    quads = padded.reshape(-1, 4)
    payload = quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4) | (quads[:, 3] << 6)
    return _HEADER.pack(MAGIC, VERSION, float(rep_rate_hz), n) + payload.astype(np.uint8).tobytes()


def decode_records(data: bytes) -> tuple[Rounds, float]:
    """Parse a record file; returns ``(rounds, rep_rate_hz)``."""
    if data[:4] != MAGIC[:len(data)]:
        raise RecordFormatError(f"bad magic {data[:4]!r}", 0)
    if len(data) < HEADER_SIZE:
        raise RecordFormatError(f"truncated header: {len(data)} of {HEADER_SIZE} bytes",
                                len(data))
    _, version, rep_rate, n = _HEADER.unpack_from(data)
    if version != VERSION:
        raise RecordFormatError(f"unsupported version {version}", 4)
    if not (rep_rate > 0 and np.isfinite(rep_rate)):
        raise RecordFormatError(f"invalid rep_rate_hz {rep_rate}", 5)
    expected = -(-n // 4)
    payload = np.frombuffer(data, dtype=np.uint8, offset=HEADER_SIZE)
    if payload.size < expected:
        raise RecordFormatError(f"payload truncated: header declares {n} rounds "
                                f"({expected} bytes), found {payload.size}", len(data))
    if payload.size > expected:
        raise RecordFormatError(f"{payload.size - expected} trailing bytes after payload",
                                HEADER_SIZE + expected)
    if n % 4 and payload[-1] >> (2 * (n % 4)):
        raise RecordFormatError("nonzero padding bits in final payload byte", len(data) - 1)
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    codes = ((payload[:, None] >> shifts) & 3).reshape(-1)[:n]
    return Rounds(codes & 1, codes >> 1), float(rep_rate)


def write_records(path, rounds: Rounds, rep_rate_hz: float) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_records(rounds, rep_rate_hz))


def read_records(path) -> tuple[Rounds, float]:
    with open(path, "rb") as fh:
        return decode_records(fh.read())


def _fmt(value) -> str:
    return format(float(value), ".17g")


def format_monitor_csv(trace: PowerTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time_s", "power_w"])
    for t, p in zip(trace.time_s, trace.power_w):
        writer.writerow([_fmt(t), _fmt(p)])
    return buf.getvalue()


def parse_monitor_csv(text: str, period_s: float) -> PowerTrace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["time_s", "power_w"]:
        raise ValueError("monitor CSV must start with header 'time_s,power_w'")
    try:
        values = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
    except ValueError as exc:
        raise ValueError(f"monitor CSV: {exc}") from None
    return PowerTrace(values[:, 0], values[:, 1], period_s)


def format_csv(columns: dict) -> str:
    """Deterministic CSV of equal-length numeric columns."""
    names = list(columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*(columns[k] for k in names)):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()
