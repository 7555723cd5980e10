import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dql.codec import (
    CODE_DELTA,
    CODE_GAMMA,
    BitReader,
    BitWriter,
    bit_length_u64,
    delta_length,
    elias_delta_decode,
    elias_delta_encode,
    elias_gamma_decode,
    elias_gamma_encode,
    gamma_length,
    length_bound,
    signed_lengths,
    unzigzag,
    zigzag,
)
from dql.errors import InvalidParameterError, TruncatedCodeError


@pytest.mark.parametrize(
    "k, code",
    [(1, "1"), (2, "010"), (3, "011"), (4, "00100"), (5, "00101"), (17, "000010001")],
)
def test_gamma_golden(k, code):
    assert elias_gamma_encode(k) == code
    assert elias_gamma_decode(code) == k


@pytest.mark.parametrize(
    "k, code",
    [(1, "1"), (2, "0100"), (3, "0101"), (4, "01100"), (8, "00100000"), (17, "001010001")],
)
def test_delta_golden(k, code):
    assert elias_delta_encode(k) == code
    assert elias_delta_decode(code) == k


def test_round_trips_small_range():
    for k in range(1, 5000):
        assert elias_gamma_decode(elias_gamma_encode(k)) == k
        assert elias_delta_decode(elias_delta_encode(k)) == k


@pytest.mark.parametrize("k", [2**31 - 1, 2**40 + 7, 2**62 - 1, 2**63 + 5])
def test_round_trips_large(k):
    assert elias_delta_decode(elias_delta_encode(k)) == k
    assert elias_gamma_decode(elias_gamma_encode(k)) == k


def test_rejects_nonpositive():
    for enc in (elias_gamma_encode, elias_delta_encode):
        with pytest.raises(InvalidParameterError):
            enc(0)
    with pytest.raises(InvalidParameterError):
        unzigzag(0)


def test_truncated_and_trailing():
    with pytest.raises(TruncatedCodeError):
        elias_gamma_decode("0001")
    with pytest.raises(TruncatedCodeError):
        elias_delta_decode("0011")
    with pytest.raises(InvalidParameterError):
        elias_gamma_decode("11")


def test_zigzag_examples():
    assert [zigzag(m) for m in (0, 1, -1, 2, -2, 3)] == [1, 2, 3, 4, 5, 6]
    for m in (-7, 0, 5):
        assert zigzag(m) == round(2 * abs(m - 0.25) + 0.5)


def test_zigzag_bijection():
    ms = range(-1_000_000, 1_000_001)
    ks = [zigzag(m) for m in ms]
    assert sorted(ks) == list(range(1, 2_000_002))
    assert all(unzigzag(k) == m for k, m in zip(ks[::997], list(ms)[::997]))


@settings(max_examples=200)
@given(st.lists(st.integers(1, 2**40), min_size=2, max_size=2, unique=True))
def test_prefix_free(pair):
    for enc in (elias_gamma_encode, elias_delta_encode):
        a, b = (enc(k) for k in pair)
        assert not a.startswith(b) and not b.startswith(a)


@settings(max_examples=200)
@given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=40), st.sampled_from([CODE_DELTA, CODE_GAMMA]))
def test_bitstream_round_trip(ms, code):
    w = BitWriter()
    for m in ms:
        w.write_signed(m, code)
    data = w.to_bytes()
    assert len(data) == math.ceil(w.nbits / 8)
    r = BitReader(data)
    assert [r.read_signed(code) for _ in ms] == ms
    assert r.remaining < 8
    assert int(np.asarray(signed_lengths(ms, code)).sum()) == w.nbits


def test_bit_order():
    w = BitWriter()
    w.write("101")
    assert w.to_bytes() == b"\xa0"
    assert BitReader(b"\xa0").read(3) == "101"
    with pytest.raises(TruncatedCodeError):
        BitReader(b"\x00").read(9)


def test_vector_lengths_match_strings():
    ks = np.concatenate([np.arange(1, 3000), [2**31, 2**40 - 1, 2**62]])
    assert np.array_equal(delta_length(ks), [len(elias_delta_encode(int(k))) for k in ks])
    assert np.array_equal(gamma_length(ks), [len(elias_gamma_encode(int(k))) for k in ks])
    assert np.array_equal(bit_length_u64([0, 1, 2, 255, 256, 2**62]), [0, 1, 2, 8, 9, 63])


def test_length_bound_holds():
    ks = np.arange(1, 200_001)
    slack = length_bound(np.log(ks)) - delta_length(ks)
    # k = 8 meets the bound with equality in exact arithmetic
    assert slack.min() >= -1e-12
    assert length_bound(math.log(8)) == pytest.approx(8.0, abs=1e-12)


def test_length_bound_concave():
    z = np.linspace(0, 20, 2001)
    L = length_bound(z)
    assert np.all(np.diff(L, 2) <= 1e-12)
    assert length_bound(0.0) == 1.0
    with pytest.raises(InvalidParameterError):
        length_bound(-1.0)
