"""Seeded random streams and the exact samplers the encoder needs.

Streams are numpy's Philox4x64-10 counter-based generator, keyed by
(seed, stream id).  Its raw 64-bit output sequence is part of numpy's
stability guarantee, so an encoder and decoder holding the same seed agree
word for word.  Every uniform consumes exactly one 64-bit word:

* ``uniform``: top 53 bits k, returns k * 2^-53 in [0, 1)
* ``centered``: returns (k * 2^-53 - 1/2) + 2^-54, strictly inside (-1/2, 1/2)
  and exact in binary64 (forming k + 1/2 first would round for k >= 2^52)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dql.errors import InvalidParameterError, TruncationOverflowError

_U64 = (1 << 64) - 1
_SCALE = 2.0**-53

SHARED_STREAM = 0
LOCAL_STREAM = 1


class RandomStream:
    """Single-owner deterministic uniform source; not thread safe."""

    def __init__(self, seed: int, stream_id: int = SHARED_STREAM):
        if not (0 <= int(seed) <= _U64) or not (0 <= int(stream_id) <= _U64):
            raise InvalidParameterError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        self._bits = np.random.Philox(key=self.seed | (self.stream_id << 64))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def raw(self, n: int) -> np.ndarray:
        self.counter += n
        return self._bits.random_raw(n)

    def uniform(self, n: int | None = None):
        """Uniform on [0, 1); one word per draw."""
        k = self.raw(1 if n is None else n) >> np.uint64(11)
        out = k.astype(float) * _SCALE
        return float(out[0]) if n is None else out

    def centered(self, n: int | None = None):
        """Uniform on the open interval (-1/2, 1/2); one word per draw."""
        out = to_centered(self.uniform(1 if n is None else n))
        return float(out[0]) if n is None else out

    def fork(self, stream_id: int) -> "RandomStream":
        """A fresh stream on the same seed with a different key."""
        return RandomStream(self.seed, stream_id)


def to_centered(v):
    """Map words already turned into [0, 1) uniforms onto (-1/2, 1/2) as ``centered`` does."""
    # v - 1/2 is exact on the 2^-53 grid, and so is adding 2^-54 to it
    return (np.asarray(v, dtype=float) - 0.5) + 0.5 * _SCALE


@dataclass(frozen=True)
class DitherState:
    """Shared (t, u) and local (v, w) randomness of one scalar encode."""

    t: int
    u: float
    v: float
    w: float


def inverse_cdf_T(F_upto, v):
    """Smallest t with F_T(t) >= v; ``F_upto`` is F_T(0..t_cap)."""
    v = np.asarray(v, dtype=float)
    t = np.searchsorted(F_upto, v, side="left")
    if np.any(t >= len(F_upto)):
        raise TruncationOverflowError(
            f"shared draw exceeds F_T(t_cap) = {F_upto[-1]!r}; increase t_cap"
        )
    return t


def draw_shared(stream: RandomStream, tables, n: int | None = None):
    """Draw (t, u) per entry: the T-word first, then the U-word.

    Returns scalars when ``n`` is None, otherwise length-n arrays whose
    entries are drawn in index order (T0, U0, T1, U1, ...).
    """
    m = 1 if n is None else n
    words = stream.uniform(2 * m).reshape(m, 2)
    t = inverse_cdf_T(tables.F[1:], words[:, 0])
    u = to_centered(words[:, 1])
    if n is None:
        return int(t[0]), float(u[0])
    return t.astype(np.int64), u


def geom0_from_uniform(v, log_q):
    """floor(ln(1 - v) / ln q): geometric on {0, 1, ...} with success probability 1 - q."""
    v = np.asarray(v, dtype=float)
    log_q = np.asarray(log_q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.floor(np.log1p(-v) / log_q)
    g = np.where(np.isneginf(log_q), 0.0, g)
    return g.astype(np.int64)


def geom0(stream: RandomStream, p: float, n: int | None = None):
    """Geometric variate on {0, 1, ...} with P(G = k) = (1 - p)^k p, one word per draw."""
    if not 0 < p <= 1:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p!r}")
    log_q = -math.inf if p == 1 else math.log1p(-p)
    g = geom0_from_uniform(stream.uniform(1 if n is None else n), log_q)
    return int(g[0]) if n is None else g


def categorical_from_uniform(weights, v):
    """Smallest index i with cumsum(weights)[i] >= v * sum(weights)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidParameterError("weights must be a nonempty vector of finite nonnegative reals")
    total = w.sum()
    if not total > 0:
        raise InvalidParameterError("weights are all zero")
    cum = np.cumsum(w)
    idx = np.searchsorted(cum, np.asarray(v, dtype=float) * total, side="left")
    return np.minimum(idx, w.size - 1)


def categorical(stream: RandomStream, weights, n: int | None = None):
    """Index i with probability weights[i] / sum(weights); one word per draw."""
    idx = categorical_from_uniform(weights, stream.uniform(1 if n is None else n))
    return int(idx[0]) if n is None else idx
