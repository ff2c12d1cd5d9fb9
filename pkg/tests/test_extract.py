import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_gf2_product, toeplitz_matrix
from sdiqrng.extract import (
    ToeplitzHasher,
    ToeplitzSeed,
    decode_bit_file,
    encode_bit_file,
    extract_blocks,
    output_length,
    pack_bits,
    read_bit_file,
    toeplitz_extract,
    unpack_bits,
    write_bit_file,
)


def _bits(rng, n):
    return rng.integers(0, 2, n, dtype=np.uint8)


def test_examples():
    seed = ToeplitzSeed(np.array([1]), 1, 1)
    assert toeplitz_extract([1], seed, 1).tolist() == [1]
    rng = np.random.default_rng(0)
    seed = ToeplitzSeed.random(256, 64, rng)
    assert not toeplitz_extract(np.zeros(256, np.uint8), seed, 64).any()


def test_matrix_layout():
    # first column is seed[0:m], remainder of first row is seed[m:]
    s = np.arange(6)
    T = toeplitz_matrix(s, 4, 3)
    assert T[:, 0].tolist() == [0, 1, 2]
    assert T[0, 1:].tolist() == [3, 4, 5]
    assert T[1, 1] == T[0, 0] and T[2, 3] == T[1, 2]


def test_matches_naive_256x64():
    rng = np.random.default_rng(1)
    raw = _bits(rng, 256)
    seed = ToeplitzSeed.random(256, 64, rng)
    np.testing.assert_array_equal(toeplitz_extract(raw, seed, 64),
                                  naive_gf2_product(seed.bits, raw, 64))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.data())
def test_matches_naive_random_sizes(n_in, data):
    m = data.draw(st.integers(1, n_in))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    raw = _bits(rng, n_in)
    seed = ToeplitzSeed.random(n_in, m, rng)
    np.testing.assert_array_equal(toeplitz_extract(raw, seed, m),
                                  naive_gf2_product(seed.bits, raw, m))


def test_linearity():
    rng = np.random.default_rng(2)
    seed = ToeplitzSeed.random(4096, 1000, rng)
    h = ToeplitzHasher(seed)
    a, b = _bits(rng, 4096), _bits(rng, 4096)
    np.testing.assert_array_equal(h(a ^ b), h(a) ^ h(b))


def test_segmented_path_matches_dense_rows():
    # more than one FFT segment; spot-check rows against direct parity sums
    rng = np.random.default_rng(3)
    n, m = (1 << 20) + 4099, 300
    seed = ToeplitzSeed.random(n, m, rng)
    raw = _bits(rng, n)
    out = ToeplitzHasher(seed)(raw)
    for i in (0, 1, 150, m - 1):
        j = np.arange(n)
        k = i - j
        row = np.where(k >= 0, seed.bits[np.clip(k, 0, None)],
                       seed.bits[np.clip(m - 1 - k, 0, seed.bits.size - 1)])
        assert out[i] == int(row.astype(np.int64) @ raw) % 2


def test_argument_errors():
    rng = np.random.default_rng(4)
    seed = ToeplitzSeed.random(16, 4, rng)
    with pytest.raises(ValueError):
        toeplitz_extract(_bits(rng, 15), seed, 4)
    with pytest.raises(ValueError):
        toeplitz_extract(_bits(rng, 16), seed, 5)
    with pytest.raises(ValueError):
        ToeplitzSeed(np.ones(10, np.uint8), 16, 4)
    with pytest.raises(ValueError):
        toeplitz_extract(_bits(rng, 4), ToeplitzSeed.random(4, 8, rng), 8)
    with pytest.raises(ValueError):
        toeplitz_extract([0, 2, 1], ToeplitzSeed.random(3, 1, rng), 1)
    with pytest.raises(ValueError):
        ToeplitzSeed.from_bits(np.ones(5, np.uint8), 16, 4)


def test_from_bits_takes_prefix():
    bits = np.arange(40) % 2
    seed = ToeplitzSeed.from_bits(bits, 16, 4)
    np.testing.assert_array_equal(seed.bits, bits[:19])


def test_output_length_examples():
    assert output_length(0, 2.0 ** -64) == 0
    assert output_length(114411, 2.0 ** -64) == 114283
    assert output_length(114411, 1.0) == 114411
    assert output_length(100, 2.0 ** -64) == 0
    for bad in (0.0, 1.5, -1.0):
        with pytest.raises(ValueError):
            output_length(10, bad)
    with pytest.raises(ValueError):
        output_length(-1, 0.5)


def test_extract_blocks_reuses_seed():
    rng = np.random.default_rng(5)
    block = 1000
    raw = _bits(rng, 3 * block + 17)
    seed_bits = _bits(rng, 2 * block)
    out = extract_blocks(raw, seed_bits, 100, block_bits=block)
    assert out.size == 300
    seed = ToeplitzSeed.from_bits(seed_bits, block, 100)
    for k in range(3):
        np.testing.assert_array_equal(out[100 * k:100 * (k + 1)],
                                      naive_gf2_product(seed.bits, raw[k * block:(k + 1) * block],
                                                        100))
    assert extract_blocks(raw[:block - 1], seed_bits, 100, block_bits=block).size == 0


def test_pack_lsb_first():
    assert pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 1]) == b"\x01\x01"
    assert pack_bits([0, 1]) == b"\x02"
    np.testing.assert_array_equal(unpack_bits(b"\x05", 3), [1, 0, 1])


@given(st.lists(st.integers(0, 1), max_size=200))
def test_bit_file_round_trip(bits):
    data = encode_bit_file(np.array(bits, dtype=np.uint8))
    assert data[:8] == len(bits).to_bytes(8, "little")
    np.testing.assert_array_equal(decode_bit_file(data), bits)


def test_bit_file_errors(tmp_path):
    with pytest.raises(ValueError):
        decode_bit_file(b"\x01")
    with pytest.raises(ValueError):
        decode_bit_file((20).to_bytes(8, "little") + b"\x00")
    path = tmp_path / "bits.bin"
    write_bit_file(path, [1, 1, 0])
    assert read_bit_file(path).tolist() == [1, 1, 0]
