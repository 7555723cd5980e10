"""Closed-form densities, normalizers and dyadic mixture tables.

Everything here is pure and immutable. Weight sequences of piecewise-linear
densities are stored as a short explicit table plus geometric tails that
repeat with period two (one ratio per parity class), which is exactly the
shape of the piecewise-linear Laplace family and of its dyadic mixture
components.  Keeping the tails symbolic means normalization, cdfs and
inverse cdfs carry no truncation error, even at step sizes near 1e-15.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from dql.errors import (
    DegenerateComponentError,
    InternalConsistencyError,
    InvalidParameterError,
    RangeError,
)

# Lower bound on a tail mass we still bother to bracket when inverting a cdf.
_TAIL_EPS_LOG2 = 64
# Largest index of the infinite product for F_T, per the truncation rule.
_PRODUCT_CAP = 64
DEFAULT_T_CAP = 48


def solve_delta0(ell: float) -> float:
    """Unique positive root of exp(d) = d * ell + 1."""
    ell = float(ell)
    if not ell > 1.0 or not math.isfinite(ell):
        raise InvalidParameterError(f"ell must be a finite real > 1, got {ell!r}")

    # expm1(d)/d - ell is increasing in d, equals 1 - ell < 0 as d -> 0+.
    def h(d):
        return math.expm1(d) / d - ell

    hi = 2.0 * math.log(ell) + 2.0
    while h(hi) <= 0.0:
        hi *= 2.0
    lo = min(1e-300, hi / 4)
    root = brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    # one Newton polish on the residual e^d - d*ell - 1
    for _ in range(2):
        resid = math.expm1(root) - root * ell
        slope = math.exp(root) - ell
        if slope > 0:
            root -= resid / slope
    return root


def c_delta(delta):
    """Normalizer delta * (1 + e^-delta) / (1 - e^-delta) of the piecewise-linear Laplace."""
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)):
        raise InvalidParameterError("delta must be positive")
    out = d / np.tanh(d / 2)
    return float(out) if out.ndim == 0 else out


def laplace_density(epsilon: float, x):
    """Density (epsilon/2) exp(-epsilon |x|) of Laplace(0, 1/epsilon)."""
    _check_epsilon(epsilon)
    out = 0.5 * epsilon * np.exp(-epsilon * np.abs(np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def laplace_cdf(epsilon: float, x):
    _check_epsilon(epsilon)
    z = epsilon * np.asarray(x, dtype=float)
    out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
    return float(out) if np.ndim(out) == 0 else out


def _check_epsilon(epsilon):
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be a finite positive real, got {epsilon!r}")


@dataclass(frozen=True, eq=False)
class PiecewiseLinearDensity:
    """f(x) = (1/delta) * sum_k a_k tri(x/delta - k).

    ``table`` holds a_k for k = k_lo .. k_lo + len(table) - 1.  Beyond the
    table the weights continue geometrically within each parity class:
    a_{k+2} = a_k * exp(right_log_ratio) to the right and
    a_{k-2} = a_k * exp(left_log_ratio) to the left.  A log ratio of -inf
    means the weights are zero outside the table.
    """

    delta: float
    k_lo: int
    table: np.ndarray
    right_log_ratio: float = -math.inf
    left_log_ratio: float = -math.inf

    def __post_init__(self):
        if not (self.delta > 0) or not math.isfinite(self.delta):
            raise InvalidParameterError("delta must be a finite positive real")
        table = np.array(self.table, dtype=float).ravel()
        if table.size == 0:
            raise InvalidParameterError("weight table is empty")
        if np.any(table < -1e-14):
            raise InvalidParameterError("weights must be nonnegative")
        table = np.maximum(table, 0.0)
        for lr in (self.right_log_ratio, self.left_log_ratio):
            if not lr < 0:
                raise InvalidParameterError("tail log ratios must be negative (or -inf)")
        if table.size < 2 and (self.has_right_tail or self.has_left_tail):
            raise InvalidParameterError("geometric tails need at least two table entries")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "k_lo", int(self.k_lo))
        total = self.total_mass()
        if abs(total - 1.0) > 1e-9:
            raise InvalidParameterError(f"weights sum to {total!r}, expected 1")

    @property
    def k_hi(self) -> int:
        return self.k_lo + self.table.size - 1

    @property
    def has_right_tail(self) -> bool:
        return self.right_log_ratio > -math.inf

    @property
    def has_left_tail(self) -> bool:
        return self.left_log_ratio > -math.inf

    def _tail_masses(self):
        left = right = 0.0
        if self.has_left_tail:
            q = math.exp(self.left_log_ratio)
            left = (self.table[0] + self.table[1]) * q / -math.expm1(self.left_log_ratio)
        if self.has_right_tail:
            q = math.exp(self.right_log_ratio)
            right = (self.table[-2] + self.table[-1]) * q / -math.expm1(self.right_log_ratio)
        return left, right

    def total_mass(self) -> float:
        left, right = self._tail_masses()
        return left + math.fsum(self.table) + right

    def log_weight(self, k):
        """log a_k for integer k (array-valued)."""
        k = np.asarray(k, dtype=np.int64)
        with np.errstate(divide="ignore"):
            log_table = np.log(self.table)
        out = np.full(k.shape, -np.inf)
        inside = (k >= self.k_lo) & (k <= self.k_hi)
        out[inside] = log_table[k[inside] - self.k_lo]
        if self.has_right_tail:
            sel = k > self.k_hi
            n = (k[sel] - self.k_hi + 1) // 2
            base = k[sel] - 2 * n
            out[sel] = log_table[base - self.k_lo] + n * self.right_log_ratio
        if self.has_left_tail:
            sel = k < self.k_lo
            n = (self.k_lo - k[sel] + 1) // 2
            base = k[sel] + 2 * n
            out[sel] = log_table[base - self.k_lo] + n * self.left_log_ratio
        return out

    def weight(self, k):
        return np.exp(self.log_weight(k))

    def cdf_index(self, k):
        """sum_{i <= k} a_i, in closed form."""
        k = np.asarray(k, dtype=np.int64)
        left_mass, right_mass = self._tail_masses()
        cum = left_mass + np.cumsum(self.table)
        out = np.empty(k.shape)
        below = k < self.k_lo
        above = k > self.k_hi
        inside = ~below & ~above
        out[inside] = cum[k[inside] - self.k_lo]
        out[below] = 0.0
        if self.has_left_tail and np.any(below):
            kb = k[below]
            acc = np.zeros(kb.shape)
            denom = -math.expm1(self.left_log_ratio)
            for j, b in enumerate((self.k_lo, self.k_lo + 1)):
                n_min = (b - kb + 1) // 2
                acc += self.table[j] * np.exp(n_min * self.left_log_ratio) / denom
            out[below] = acc
        total = cum[-1] + right_mass
        out[above] = total
        if self.has_right_tail and np.any(above):
            ka = k[above]
            acc = np.zeros(ka.shape)
            denom = -math.expm1(self.right_log_ratio)
            for j, b in ((-2, self.k_hi - 1), (-1, self.k_hi)):
                n_min = (ka - b) // 2 + 1
                acc += self.table[j] * np.exp(n_min * self.right_log_ratio) / denom
            out[above] = total - acc
        return out

    def _bracket(self):
        def reach(lr):
            if lr == -math.inf:
                return 0
            n = math.ceil(_TAIL_EPS_LOG2 * math.log(2.0) / -lr) + 1
            return min(n, 2**60)

        return self.k_lo - 2 * reach(self.left_log_ratio), self.k_hi + 2 * reach(self.right_log_ratio)

    def quantile_index(self, v):
        """min{k : sum_{i<=k} a_i >= v}, ties going to the smaller index.

        Searches a bracket outside of which the tails hold less than 2^-64 of
        the mass; a target beyond the bracket returns the bracket edge.
        """
        v = np.asarray(v, dtype=float)
        target = v * self.total_mass()
        k_min, k_max = self._bracket()
        lo = np.full(v.shape, k_min - 1, dtype=np.int64)
        hi = np.full(v.shape, k_max, dtype=np.int64)
        while True:
            open_ = hi - lo > 1
            if not np.any(open_):
                break
            mid = lo + (hi - lo) // 2
            ok = self.cdf_index(mid) >= target
            hi = np.where(open_ & ok, mid, hi)
            lo = np.where(open_ & ~ok, mid, lo)
        return hi

    def _locate(self, x):
        y = np.asarray(x, dtype=float) / self.delta
        y = np.clip(y, -(2.0**62), 2.0**62)
        k = np.floor(y)
        return k.astype(np.int64), y - k

    def pdf(self, x):
        k, tau = self._locate(x)
        return ((1 - tau) * self.weight(k) + tau * self.weight(k + 1)) / self.delta

    def log_pdf(self, x):
        k, tau = self._locate(x)
        with np.errstate(divide="ignore"):
            return (
                np.logaddexp(np.log1p(-tau) + self.log_weight(k), np.log(tau) + self.log_weight(k + 1))
                - math.log(self.delta)
            )

    def cdf(self, x):
        k, tau = self._locate(x)
        ak, ak1 = self.weight(k), self.weight(k + 1)
        return self.cdf_index(k - 1) + ak / 2 + ak * tau - ak * tau**2 / 2 + ak1 * tau**2 / 2

    def step_pdf(self, x):
        """The rect-mixture companion (1/delta) sum_k a_k rect(x/delta - k)."""
        y = np.asarray(x, dtype=float) / self.delta
        k = np.floor(np.clip(y, -(2.0**62), 2.0**62) + 0.5).astype(np.int64)
        return self.weight(k) / self.delta


def g_delta(delta: float) -> PiecewiseLinearDensity:
    """Piecewise-linear Laplace density: weights a_k = delta e^{-|k delta|} / c_delta."""
    delta = float(delta)
    if not delta > 0:
        raise InvalidParameterError("delta must be positive")
    a0 = math.tanh(delta / 2)  # delta / c_delta
    a1 = math.exp(-delta) * a0
    return PiecewiseLinearDensity(delta, -1, np.array([a1, a0, a1]), -2 * delta, -2 * delta)


def plm_epsilon(f: PiecewiseLinearDensity) -> float:
    """Privacy constant max_{|i-j|=1} (a_j / a_i - 1) / delta of the quantized mechanism."""
    # tails repeat with period two, so two extra periods on each side see every ratio
    k = np.arange(f.k_lo - 4, f.k_hi + 5)
    a = f.weight(k)
    best = 0.0
    for lo, hi in ((a[:-1], a[1:]), (a[1:], a[:-1])):
        live = hi > 0
        if np.any(live & (lo == 0)):
            return math.inf
        both = live & (lo > 0)
        if np.any(both):
            best = max(best, float(np.max(hi[both] / lo[both] - 1.0)))
    return best / f.delta


@dataclass(frozen=True)
class MechanismParams:
    """Database privacy epsilon, decoder relaxation ell and the derived dyadic grid."""

    epsilon: float
    ell: float
    t_cap: int = DEFAULT_T_CAP
    delta0: float = field(init=False)

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "ell", float(self.ell))
        if not (0 <= int(self.t_cap) <= 62):
            raise InvalidParameterError("t_cap must lie in [0, 62]")
        object.__setattr__(self, "t_cap", int(self.t_cap))
        object.__setattr__(self, "delta0", solve_delta0(self.ell))

    def delta_t(self, t):
        """Step size 2^-t delta0."""
        return np.ldexp(self.delta0, -np.asarray(t)) if np.ndim(t) else math.ldexp(self.delta0, -int(t))


def cdf_factor(delta, ell):
    """One factor of the infinite product defining F_T, rewritten without cancellation.

    (4 - 4(d ell + 1)e^-d) / ((1 + e^-d)^2 (2/(1 + e^-2d) - d ell - 1))
      = (expm1(d) - d ell) / (cosh^2(d/2) (tanh d - d ell)).
    """
    d = np.asarray(delta, dtype=float)
    return (np.expm1(d) - d * ell) / (np.cosh(d / 2) ** 2 * (np.tanh(d) - d * ell))


def cdf_factor_complement(delta, ell):
    """1 - cdf_factor(delta, ell), in a form with no subtractive cancellation for small delta."""
    d = np.asarray(delta, dtype=float)
    h = np.tanh(d / 2)
    return h * h * (2.0 + d * ell + np.tanh(d)) / (d * (ell - 1.0) + (d - np.tanh(d)))


@dataclass(frozen=True, eq=False)
class DyadicTables:
    """F_T, p_T, r_t and c_{delta_t} for t = -1 .. t_cap (F) or 0 .. t_cap (rest).

    ``F[0]`` is F_T(-1), which is zero exactly: the first product factor
    vanishes because delta0 solves exp(d) = d ell + 1.
    """

    params: MechanismParams
    F: np.ndarray
    p: np.ndarray
    r: np.ndarray
    s: np.ndarray
    c: np.ndarray
    log_factors: np.ndarray

    def cdf_T(self, t: int) -> float:
        if not -1 <= t <= self.params.t_cap:
            raise RangeError(f"t={t} outside [-1, {self.params.t_cap}]")
        return float(self.F[t + 1])

    def expected_neg_log_delta(self) -> float:
        """E[-ln delta_T] = E[T] ln 2 - ln delta0 under the truncated law."""
        t = np.arange(self.params.t_cap + 1)
        return float(np.dot(t, self.p) / self.p.sum() * math.log(2) - math.log(self.params.delta0))


@lru_cache(maxsize=64)
def dyadic_tables(params: MechanismParams) -> DyadicTables:
    ell = params.ell
    n_fac = max(_PRODUCT_CAP, params.t_cap + 1) + 1
    deltas = np.ldexp(params.delta0, -np.arange(n_fac))
    s = cdf_factor_complement(deltas, ell)
    s[0] = 1.0  # the i = 0 factor is exactly zero
    log_fac = np.full(n_fac, -np.inf)
    log_fac[1:] = np.log1p(-s[1:])
    # product runs over i = t+1 .. I*, I* the first index with |factor - 1| < 1e-16
    small = np.nonzero(s[1:] < 1e-16)[0]
    i_star = min(int(small[0]) + 1 if small.size else _PRODUCT_CAP, _PRODUCT_CAP)
    F = np.empty(params.t_cap + 2)
    F[0] = 0.0
    for t in range(params.t_cap + 1):
        F[t + 1] = math.exp(math.fsum(log_fac[t + 1 : i_star + 1])) if t < i_star else 1.0
    if F[-1] < 1.0 - 1e-9:
        raise InvalidParameterError(
            f"F_T(t_cap) = {F[-1]!r} < 1 - 1e-9; raise t_cap for ell={ell}"
        )
    s_t = s[: params.t_cap + 1].copy()
    p = F[1:] * s_t
    r = 1.0 - s_t
    r[0] = 0.0
    c = np.asarray(c_delta(deltas[: params.t_cap + 1]))
    arrays = (F, p, r, s_t, c, log_fac)
    for a in arrays:
        a.setflags(write=False)
    return DyadicTables(params, *arrays)


def ft_vertex_weights(tables: DyadicTables, t: int):
    """(a_0, a_1) of the t-th mixture component; a_{-1} = a_1 and tails decay by e^{-2 delta_t}.

    Stable rewrite of
      a_0 = (F(t)/c_d - F(t-1)/c_{2d}) d / p(t)
      a_1 = (F(t) e^{-d}/c_d - F(t-1)(1 + e^{-2d})/(2 c_{2d})) d / p(t)
    using r = F(t-1)/F(t), s = 1 - r and h = tanh(d/2).
    """
    if not 0 <= t <= tables.params.t_cap:
        raise RangeError(f"t={t} outside [0, {tables.params.t_cap}]")
    if not tables.p[t] > 0:
        raise DegenerateComponentError(f"p_T({t}) = 0")
    d = math.ldexp(tables.params.delta0, -t)
    s = float(tables.s[t])
    h = math.tanh(d / 2)
    one_minus_y = -math.expm1(-d)
    one_minus_y2 = -math.expm1(-2 * d)
    a0 = h * (h * h + s) / (s * (1 + h * h))
    a1 = one_minus_y2 / 4 - h * one_minus_y**2 / (4 * s)
    if a1 < -1e-12:
        raise InternalConsistencyError(f"negative vertex weight {a1!r} at t={t}")
    return a0, max(a1, 0.0)


def ft_density(tables: DyadicTables, t: int) -> PiecewiseLinearDensity:
    """Mixture component f_t = (F(t) g_{delta_t} - F(t-1) g_{2 delta_t}) / p(t)."""
    a0, a1 = ft_vertex_weights(tables, t)
    d = math.ldexp(tables.params.delta0, -t)
    return PiecewiseLinearDensity(d, -1, np.array([a1, a0, a1]), -2 * d, -2 * d)
