"""Toeplitz-hashing strong extractor over GF(2).

The ``m_out x n_in`` matrix defined by a seed ``s`` of length
``n_in + m_out - 1`` is ``T[i, j] = s[i - j]`` for ``i >= j`` and
``T[i, j] = s[m_out - 1 + j - i]`` for ``i < j``: the first column is
``s[0:m_out]`` and the rest of the first row is ``s[m_out:]``.

Bits are packed LSB-first within bytes everywhere in this module.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ._validation import check_bits, check_count, check_scalar

DEFAULT_BLOCK_BITS = 1 << 20
# keeps every FFT short enough that float64 rounding cannot flip a parity
_SEGMENT_BITS = 1 << 20


@dataclass(frozen=True, eq=False)
class ToeplitzSeed:
    bits: np.ndarray
    n_in: int
    m_out: int

    def __post_init__(self):
        n_in = check_count(self.n_in, "n_in", min_val=1)
        m_out = check_count(self.m_out, "m_out", min_val=1)
        bits = check_bits(self.bits, "seed")
        if bits.size != n_in + m_out - 1:
            raise ValueError(f"seed has {bits.size} bits, expected n_in + m_out - 1 = "
                             f"{n_in + m_out - 1}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, n_in, m_out, random_state=None):
        rng = np.random.default_rng(random_state)
        return cls(rng.integers(0, 2, n_in + m_out - 1, dtype=np.uint8), n_in, m_out)

    @classmethod
    def from_bits(cls, bits, n_in, m_out):
        """Take the first ``n_in + m_out - 1`` bits of a longer seed stream."""
        bits = check_bits(bits, "seed")
        need = n_in + m_out - 1
        if bits.size < need:
            raise ValueError(f"seed stream has {bits.size} bits, need {need}")
        return cls(bits[:need], n_in, m_out)


def _diagonals(seed: np.ndarray, n_in: int, m_out: int) -> np.ndarray:
    # c[k] is the matrix entry on diagonal i - j = k - (n_in - 1)
    below = seed[:m_out]
    above = seed[m_out:]
    return np.concatenate([above[::-1], below]).astype(np.float64)


class ToeplitzHasher:
    """Reusable hasher for one seed; the seed's spectra are computed once.

    Only entries ``n_in - 1 .. n_in + m_out - 2`` of the linear convolution of
    the seed diagonals with the raw bits are needed. A circular convolution
    of length at least ``len(diagonals)`` aliases only outside that window.
    """

    def __init__(self, seed: ToeplitzSeed):
        self.seed = seed
        n, m = seed.n_in, seed.m_out
        c = _diagonals(seed.bits, n, m)
        self._segments = []
        for j0 in range(0, n, _SEGMENT_BITS):
            j1 = min(n, j0 + _SEGMENT_BITS)
            c_seg = c[n - j1: m + n - 1 - j0]
            size = sfft.next_fast_len(c_seg.size, real=True)
            self._segments.append((j0, j1, size, sfft.rfft(c_seg, size)))

    def __call__(self, raw) -> np.ndarray:
        raw = check_bits(raw, "raw")
        if raw.size != self.seed.n_in:
            raise ValueError(f"seed is for n_in={self.seed.n_in}, got {raw.size} raw bits")
        m = self.seed.m_out
        acc = np.zeros(m, dtype=np.int64)
        for j0, j1, size, c_spec in self._segments:
            full = sfft.irfft(c_spec * sfft.rfft(raw[j0:j1], size), size)
            lo = j1 - j0 - 1
            acc += np.rint(full[lo:lo + m]).astype(np.int64)
        return (acc & 1).astype(np.uint8)


def toeplitz_extract(raw, seed: ToeplitzSeed, m_out: int) -> np.ndarray:
    """Return ``T @ raw`` over GF(2)."""
    raw = check_bits(raw, "raw")
    m_out = check_count(m_out, "m_out", min_val=1)
    if seed.m_out != m_out or seed.n_in != raw.size:
        raise ValueError(f"seed is for {seed.m_out}x{seed.n_in}, got m_out={m_out}, "
                         f"n_in={raw.size}")
    if m_out > raw.size:
        raise ValueError(f"m_out={m_out} exceeds n_in={raw.size}")
    return ToeplitzHasher(seed)(raw)


def output_length(certified_bits: float, epsilon_ext: float) -> int:
    """Extractable length under the leftover hash lemma for min-entropy ``certified_bits``."""
    certified_bits = check_scalar(certified_bits, "certified_bits", min_val=0.0)
    epsilon_ext = check_scalar(epsilon_ext, "epsilon_ext", min_val=0.0, max_val=1.0,
                               include_min=False)
    return max(0, math.floor(certified_bits - 2.0 * math.log2(1.0 / epsilon_ext)))


def extract_blocks(raw, seed_bits, m_per_block: int,
                   block_bits: int = DEFAULT_BLOCK_BITS) -> np.ndarray:
    """Hash consecutive ``block_bits`` blocks of ``raw`` with one reused seed.

    A trailing partial block is not hashed.
    """
    raw = check_bits(raw, "raw")
    if m_per_block > block_bits:
        raise ValueError(f"m_per_block={m_per_block} exceeds block_bits={block_bits}")
    hasher = ToeplitzHasher(ToeplitzSeed.from_bits(seed_bits, block_bits, m_per_block))
    n_blocks = raw.size // block_bits
    out = [hasher(raw[k * block_bits:(k + 1) * block_bits]) for k in range(n_blocks)]
    return np.concatenate(out) if out else np.zeros(0, np.uint8)


def pack_bits(bits) -> bytes:
    return np.packbits(check_bits(bits), bitorder="little").tobytes()


def unpack_bits(data: bytes, n_bits: int) -> np.ndarray:
    arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    if arr.size < n_bits:
        raise ValueError(f"need {n_bits} bits, only {arr.size} available")
    return arr[:n_bits]


def encode_bit_file(bits) -> bytes:
    """Length-prefixed bit file: 64-bit little-endian bit count, then packed bits."""
    bits = check_bits(bits)
    return struct.pack("<Q", bits.size) + pack_bits(bits)


def decode_bit_file(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise ValueError("bit file shorter than its 8-byte length prefix")
    (n_bits,) = struct.unpack_from("<Q", data)
    expected = (n_bits + 7) // 8
    if len(data) - 8 != expected:
        raise ValueError(f"bit file declares {n_bits} bits ({expected} bytes) but carries "
                         f"{len(data) - 8} payload bytes")
    return unpack_bits(data[8:], n_bits)


def write_bit_file(path, bits) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_bit_file(bits))


def read_bit_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_bit_file(fh.read())
