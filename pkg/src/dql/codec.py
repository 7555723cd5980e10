"""Elias gamma / delta codes, the signed zigzag map and an MSB-first bitstream.

Codes are handled as strings of '0'/'1' characters at the API surface; the
bitstream packs them MSB first and zero-pads the last byte.
"""

from __future__ import annotations

import math

import numpy as np

from dql.errors import InvalidParameterError, TruncatedCodeError

LOG2E = math.log2(math.e)

CODE_DELTA = 0
CODE_GAMMA = 1
CODE_NAMES = {"delta": CODE_DELTA, "gamma": CODE_GAMMA}


def zigzag(m: int) -> int:
    """2|m - 1/4| + 1/2: 0 -> 1, 1 -> 2, -1 -> 3, 2 -> 4, ..."""
    m = int(m)
    return 2 * m if m > 0 else 1 - 2 * m


def unzigzag(k: int) -> int:
    k = int(k)
    if k < 1:
        raise InvalidParameterError(f"zigzag image must be positive, got {k}")
    return k // 2 if k % 2 == 0 else -(k // 2)


def _check_positive(k):
    k = int(k)
    if k < 1:
        raise InvalidParameterError(f"Elias codes need k >= 1, got {k}")
    return k


def elias_gamma_encode(k: int) -> str:
    k = _check_positive(k)
    b = format(k, "b")
    return "0" * (len(b) - 1) + b


def elias_delta_encode(k: int) -> str:
    k = _check_positive(k)
    b = format(k, "b")
    return elias_gamma_encode(len(b)) + b[1:]


def _read_gamma(bits: str, pos: int):
    one = bits.find("1", pos)
    if one < 0:
        raise TruncatedCodeError(f"gamma code at bit {pos} runs past the end")
    zeros = one - pos
    end = pos + 2 * zeros + 1
    if end > len(bits):
        raise TruncatedCodeError(f"gamma code at bit {pos} runs past the end")
    return int(bits[pos + zeros : end], 2), end


def _read_delta(bits: str, pos: int):
    n_plus_1, pos = _read_gamma(bits, pos)
    n = n_plus_1 - 1
    if pos + n > len(bits):
        raise TruncatedCodeError(f"delta code tail at bit {pos} runs past the end")
    return int("1" + bits[pos : pos + n], 2), pos + n


def _decode_whole(reader, bits: str) -> int:
    value, end = reader(bits, 0)
    if end != len(bits):
        raise InvalidParameterError(f"{len(bits) - end} trailing bits after code")
    return value


def elias_gamma_decode(bits: str) -> int:
    return _decode_whole(_read_gamma, bits)


def elias_delta_decode(bits: str) -> int:
    return _decode_whole(_read_delta, bits)


def bit_length_u64(k) -> np.ndarray:
    """Exact bit length of nonnegative integers below 2^63 (vectorized)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.zeros(k.shape, dtype=np.int64)
    rem = k.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        big = rem >= (np.int64(1) << shift)
        out += np.where(big, shift, 0)
        rem = np.where(big, rem >> shift, rem)
    return out + (rem > 0)


def gamma_length(k) -> np.ndarray:
    return 2 * bit_length_u64(k) - 1


def delta_length(k) -> np.ndarray:
    n = bit_length_u64(k)
    return gamma_length(n) + n - 1


def signed_lengths(m, code_id: int) -> np.ndarray:
    """Bit lengths of the zigzagged messages under the chosen code."""
    m = np.asarray(m, dtype=np.int64)
    k = np.where(m > 0, 2 * m, 1 - 2 * m)
    if code_id == CODE_DELTA:
        return delta_length(k)
    if code_id == CODE_GAMMA:
        return gamma_length(k)
    raise InvalidParameterError(f"unknown code id {code_id}")


def length_bound(z):
    """L(z) = z log2 e + 2 log2(z log2 e + 1) + 1, bounding the delta length of k by L(ln k)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise InvalidParameterError("length_bound needs z >= 0")
    out = z * LOG2E + 2 * np.log2(z * LOG2E + 1) + 1
    return float(out) if out.ndim == 0 else out


class BitWriter:
    def __init__(self):
        self._chunks: list[str] = []
        self.nbits = 0

    def write(self, bits: str):
        self._chunks.append(bits)
        self.nbits += len(bits)

    def write_signed(self, m: int, code_id: int):
        k = zigzag(m)
        self.write(elias_delta_encode(k) if code_id == CODE_DELTA else elias_gamma_encode(k))

    def bits(self) -> str:
        return "".join(self._chunks)

    def to_bytes(self) -> bytes:
        s = self.bits()
        pad = -len(s) % 8
        s += "0" * pad
        return int(s, 2).to_bytes(len(s) // 8, "big") if s else b""


class BitReader:
    def __init__(self, data: bytes):
        self._bits = "".join(format(b, "08b") for b in data)
        self.pos = 0

    @property
    def remaining(self) -> int:
        return len(self._bits) - self.pos

    def read(self, n: int) -> str:
        if n > self.remaining:
            raise TruncatedCodeError("read past end of stream")
        out = self._bits[self.pos : self.pos + n]
        self.pos += n
        return out

    def read_gamma(self) -> int:
        value, self.pos = _read_gamma(self._bits, self.pos)
        return value

    def read_delta(self) -> int:
        value, self.pos = _read_delta(self._bits, self.pos)
        return value

    def read_signed(self, code_id: int) -> int:
        return unzigzag(self.read_delta() if code_id == CODE_DELTA else self.read_gamma())
