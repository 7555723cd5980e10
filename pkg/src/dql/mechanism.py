"""Quantized piecewise-linear mechanism and the dyadic quantized Laplace (DQL) mechanism.

Per scalar the shared stream supplies (T, U) and the local stream supplies
three words in order: the mixture-class draw, the geometric draw and the
local dither W.  Vectors are processed entry by entry in index order, so a
length-1 vector and a scalar consume identical draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from dql.distributions import (
    DyadicTables,
    MechanismParams,
    PiecewiseLinearDensity,
    dyadic_tables,
    ft_vertex_weights,
)
from dql.errors import DesynchronizationError, InternalConsistencyError, InvalidParameterError
from dql.randomness import (
    RandomStream,
    draw_shared,
    geom0_from_uniform,
    to_centered,
)


def round_half_away(y):
    """Nearest integer, ties away from zero; exact for every double."""
    y = np.asarray(y, dtype=float)
    r = np.trunc(y)
    frac = y - r
    r = r + np.where(frac >= 0.5, 1.0, 0.0) - np.where(frac <= -0.5, 1.0, 0.0)
    return r.astype(np.int64)


def _check_dither(u, w, v):
    u, w, v = (np.asarray(a, dtype=float) for a in (u, w, v))
    if np.any(np.abs(u) >= 0.5) or np.any(np.abs(w) >= 0.5):
        raise InvalidParameterError("dithers u and w must lie in (-1/2, 1/2)")
    if np.any(v < 0) or np.any(v >= 1):
        raise InvalidParameterError("v must lie in [0, 1)")
    return u, w, v


def plm_encode(x, f: PiecewiseLinearDensity, u, v, w):
    """round(x/delta + min{k : sum_{i<=k} a_i >= v} + w - u)."""
    u, w, v = _check_dither(u, w, v)
    k = f.quantile_index(v)
    m = round_half_away(np.asarray(x, dtype=float) / f.delta + k + w - u)
    return int(m) if m.ndim == 0 else m


def plm_decode(m, delta: float, u):
    out = delta * (np.asarray(m) + np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MixtureAtom:
    """Offset m0 and stride z of one geometric arm, with its unnormalized weight."""

    m0: int
    z: int
    weight: float


ATOM_SHAPE = ((0, 2), (-2, -2), (1, 2), (-1, -2))


def mixture_atoms(tables: DyadicTables, t: int) -> tuple[MixtureAtom, ...]:
    """The four geometric arms of f_t, with c0 = c_d, c1 = c_{2d}, d = delta_t and r = F(t-1)/F(t).

    Weights equal 1/c0 - r/c1, the same times e^{-2d}, and twice
    e^{-d}/c0 - r(1 + e^{-2d})/(2 c1); computed from the stable vertex weights.
    """
    a0, a1 = ft_vertex_weights(tables, t)
    d = math.ldexp(tables.params.delta0, -t)
    scale = float(tables.s[t]) / d
    weights = (a0 * scale, a0 * math.exp(-2 * d) * scale, a1 * scale, a1 * scale)
    atoms = []
    for (m0, z), wt in zip(ATOM_SHAPE, weights):
        if wt < -1e-12:
            raise InternalConsistencyError(f"atom weight {wt!r} at t={t}")
        atoms.append(MixtureAtom(m0, z, max(wt, 0.0)))
    return tuple(atoms)


@lru_cache(maxsize=64)
def _atom_table(tables: DyadicTables):
    """Per-t normalized cumulative atom probabilities, shape (t_cap + 1, 4)."""
    rows = []
    for t in range(tables.params.t_cap + 1):
        w = np.array([a.weight for a in mixture_atoms(tables, t)])
        rows.append(np.cumsum(w) / w.sum())
    cum = np.array(rows)
    cum[:, -1] = 1.0
    cum.setflags(write=False)
    return cum


_M0 = np.array([s[0] for s in ATOM_SHAPE], dtype=np.int64)
_Z = np.array([s[1] for s in ATOM_SHAPE], dtype=np.int64)


def sample_mtilde(tables: DyadicTables, t, class_v, geo_v):
    """M~ = m0 + z * Geom0(1 - e^{-2 delta_t}) from the class and geometric uniforms."""
    t = np.asarray(t, dtype=np.int64)
    cum = _atom_table(tables)[t]
    cls = np.minimum((cum < np.asarray(class_v)[..., None]).sum(axis=-1), 3)
    g = geom0_from_uniform(geo_v, -2.0 * np.ldexp(tables.params.delta0, -t))
    return _M0[cls] + _Z[cls] * g


@dataclass(frozen=True)
class Description:
    """Message M of one scalar, with the mixture index T it was produced under."""

    m: int
    t: int
    params: MechanismParams


@dataclass(frozen=True, eq=False)
class DescriptionBatch:
    """Messages of a vector, entry i produced under mixture index t[i]."""

    m: np.ndarray
    t: np.ndarray
    params: MechanismParams

    def __len__(self):
        return len(self.m)

    def __getitem__(self, i) -> Description:
        return Description(int(self.m[i]), int(self.t[i]), self.params)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def dql_encode_vector(x, params: MechanismParams, shared: RandomStream, local: RandomStream) -> DescriptionBatch:
    """Per-entry DQL encode; the decoded noise is i.i.d. Laplace(0, 1/epsilon)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise InvalidParameterError("x must be a scalar or a 1-d vector")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("x must be finite")
    n = x.size
    tables = dyadic_tables(params)
    t, u = draw_shared(shared, tables, n)
    words = local.uniform(3 * n).reshape(n, 3)
    mtilde = sample_mtilde(tables, t, words[:, 0], words[:, 1])
    w = to_centered(words[:, 2])
    delta = np.ldexp(params.delta0, -t)
    m = round_half_away(params.epsilon * x / delta + mtilde + w - u)
    return DescriptionBatch(m, t, params)


def dql_encode_scalar(x: float, params: MechanismParams, shared: RandomStream, local: RandomStream) -> Description:
    return dql_encode_vector([x], params, shared, local)[0]


def dql_decode_vector(desc: DescriptionBatch, params: MechanismParams, shared: RandomStream) -> np.ndarray:
    """Reproduce (T, U) per entry and return delta_T (M + U) / epsilon."""
    tables = dyadic_tables(params)
    m = np.asarray(desc.m, dtype=np.int64)
    t, u = draw_shared(shared, tables, m.size)
    bad = np.nonzero(t != np.asarray(desc.t))[0]
    if bad.size:
        i = int(bad[0])
        raise DesynchronizationError(
            f"entry {i}: description carries t={int(desc.t[i])}, shared stream gives t={int(t[i])}"
        )
    return np.ldexp(params.delta0, -t) * (m + u) / params.epsilon


def dql_decode_scalar(desc: Description, params: MechanismParams, shared: RandomStream) -> float:
    batch = DescriptionBatch(np.array([desc.m], dtype=np.int64), np.array([desc.t]), params)
    return float(dql_decode_vector(batch, params, shared)[0])
