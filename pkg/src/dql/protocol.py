"""Byte-exact frames carrying one vector query between encoder and decoder.

Layout (little endian)::

    offset size field
    0      4    magic b"DQL1"
    4      1    version (1)
    5      1    code_id (0 = Elias delta + zigzag, 1 = Elias gamma + zigzag)
    6      8    epsilon, IEEE-754 binary64
    14     8    ell, IEEE-754 binary64
    22     4    n, uint32
    26     8    seed_id, uint64
    34     ...  payload: n signed codes MSB first, zero padded to a byte

The seed itself never travels; ``seed_id`` names a seed both parties
registered ahead of time.  Frames are stored in files with a ``.dql``
extension.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dql.codec import CODE_DELTA, CODE_GAMMA, BitReader, BitWriter
from dql.distributions import DEFAULT_T_CAP, MechanismParams, dyadic_tables
from dql.errors import ConfigurationError, CountMismatchError, FrameError, InvalidParameterError
from dql.mechanism import dql_encode_vector
from dql.randomness import RandomStream, draw_shared

MAGIC = b"DQL1"
VERSION = 1
FRAME_SUFFIX = ".dql"
_HEADER = struct.Struct("<4sBBddIQ")
HEADER_SIZE = _HEADER.size
_M_LIMIT = 1 << 62


def seed_id_for(seed: int) -> int:
    """Public 64-bit identifier of a pre-shared seed."""
    digest = hashlib.blake2b(int(seed).to_bytes(8, "little"), digest_size=8, person=b"dql-seed-id").digest()
    return int.from_bytes(digest, "little")


class SeedRegistry:
    """Seeds a party has agreed on out of band, looked up by id."""

    def __init__(self, seeds=()):
        self._by_id: dict[int, int] = {}
        for s in seeds:
            self.register(s)

    def register(self, seed: int) -> int:
        sid = seed_id_for(seed)
        self._by_id[sid] = int(seed)
        return sid

    def seed_for(self, seed_id: int) -> int:
        try:
            return self._by_id[seed_id]
        except KeyError:
            raise ConfigurationError(f"unknown seed id {seed_id:#018x}") from None

    def __contains__(self, seed_id):
        return seed_id in self._by_id


@dataclass(frozen=True)
class FrameHeader:
    epsilon: float
    ell: float
    n: int
    seed_id: int
    code_id: int = CODE_DELTA
    version: int = VERSION
    magic: bytes = MAGIC

    def __post_init__(self):
        if self.magic != MAGIC:
            raise FrameError(f"bad magic {self.magic!r}")
        if self.version != VERSION:
            raise FrameError(f"unsupported version {self.version}")
        if self.code_id not in (CODE_DELTA, CODE_GAMMA):
            raise FrameError(f"unknown code id {self.code_id}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise FrameError(f"invalid epsilon {self.epsilon!r}")
        if not (self.ell > 1 and math.isfinite(self.ell)):
            raise FrameError(f"invalid ell {self.ell!r}")
        if not 1 <= self.n < 2**32:
            raise FrameError(f"invalid vector length {self.n}")
        if not 0 <= self.seed_id < 2**64:
            raise FrameError("seed id must be an unsigned 64-bit integer")

    def pack(self) -> bytes:
        return _HEADER.pack(self.magic, self.version, self.code_id, self.epsilon, self.ell, self.n, self.seed_id)

    @classmethod
    def unpack(cls, data: bytes) -> "FrameHeader":
        if len(data) < HEADER_SIZE:
            raise FrameError(f"frame shorter than the {HEADER_SIZE}-byte header")
        magic, version, code_id, eps, ell, n, sid = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise FrameError(f"bad magic {magic!r}")
        return cls(eps, ell, n, sid, code_id, version, magic)


@dataclass(frozen=True)
class Frame:
    header: FrameHeader
    payload: bytes

    def to_bytes(self) -> bytes:
        return self.header.pack() + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Frame":
        return cls(FrameHeader.unpack(data), bytes(data[HEADER_SIZE:]))

    def messages(self) -> np.ndarray:
        """Decode the payload into exactly ``header.n`` integers."""
        reader = BitReader(self.payload)
        out = np.empty(self.header.n, dtype=np.int64)
        for i in range(self.header.n):
            m = reader.read_signed(self.header.code_id)
            if abs(m) >= _M_LIMIT:
                raise FrameError(f"entry {i}: message magnitude out of range")
            out[i] = m
        tail = reader.remaining
        if tail >= 8 or reader.read(tail).count("1"):
            raise CountMismatchError(
                f"{tail} bits left after {self.header.n} codes; payload does not hold exactly n entries"
            )
        return out


def encode_payload(m, code_id: int) -> bytes:
    w = BitWriter()
    for mi in np.asarray(m).tolist():
        w.write_signed(mi, code_id)
    return w.to_bytes()


def seal(
    x,
    params: MechanismParams,
    code_id: int,
    seed_id: int,
    shared: RandomStream,
    local: RandomStream,
) -> Frame:
    """Encode a vector into a frame; ``shared`` must be keyed by the seed behind ``seed_id``."""
    if code_id not in (CODE_DELTA, CODE_GAMMA):
        raise InvalidParameterError(f"unknown code id {code_id}")
    if seed_id_for(shared.seed) != seed_id:
        raise ConfigurationError(f"seed id {seed_id:#018x} does not name the shared stream's seed")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    desc = dql_encode_vector(x, params, shared, local)
    header = FrameHeader(params.epsilon, params.ell, len(desc), seed_id, code_id)
    return Frame(header, encode_payload(desc.m, code_id))


def open_frame(frame: Frame, shared: RandomStream, t_cap: int = DEFAULT_T_CAP) -> np.ndarray:
    """Decode a frame with the shared stream at the session start; returns the noisy vector."""
    h = frame.header
    if seed_id_for(shared.seed) != h.seed_id:
        raise ConfigurationError(f"frame names seed id {h.seed_id:#018x}, not the shared stream's seed")
    m = frame.messages()
    params = MechanismParams(h.epsilon, h.ell, t_cap)
    # t is not on the wire, so there is nothing to cross-check it against
    t, u = draw_shared(shared, dyadic_tables(params), h.n)
    return np.ldexp(params.delta0, -t) * (m + u) / params.epsilon


def open_with_registry(frame: Frame, registry: SeedRegistry, t_cap: int = DEFAULT_T_CAP) -> np.ndarray:
    seed = registry.seed_for(frame.header.seed_id)
    return open_frame(frame, RandomStream(seed), t_cap)


def write_frame(path, frame: Frame) -> Path:
    path = Path(path)
    path.write_bytes(frame.to_bytes())
    return path


def read_frame(path) -> Frame:
    return Frame.from_bytes(Path(path).read_bytes())

