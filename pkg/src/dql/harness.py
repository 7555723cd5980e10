"""Statistical and analytic checks of the DQL mechanism, and the epsilon-vs-MSE sweep.

Every check returns a :class:`TestReport` whose threshold is fixed in this
module.  Reports render to a deterministic text line and dict; wall-clock
time is kept on the object but left out of both so that two runs with the
same seed produce identical output.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from dql.codec import (
    CODE_DELTA,
    CODE_GAMMA,
    LOG2E,
    delta_length,
    elias_delta_decode,
    elias_delta_encode,
    elias_gamma_decode,
    elias_gamma_encode,
    length_bound,
    signed_lengths,
)
from dql.distributions import (
    MechanismParams,
    dyadic_tables,
    ft_density,
    laplace_cdf,
    laplace_density,
    plm_epsilon,
    cdf_factor,
)
from dql.errors import InvalidParameterError, RangeError
from dql.mechanism import dql_decode_vector, dql_encode_vector, sample_mtilde
from dql.randomness import LOCAL_STREAM, SHARED_STREAM, RandomStream

DATA_STREAM = 2

KS_COEFF = 1.63  # asymptotic Kolmogorov critical value at alpha = 0.01
PRIVACY_SLACK = 1e-9
CONSTANT_RTOL = 1e-9
MIXTURE_TOL = 1e-8
F_MINUS1_TOL = 1e-12
TV_TOL = 0.005
CODEC_BOUND_SLACK = 1e-12
SWEEP_BITS_TOL = 0.05
SWEEP_EPS_RANGE = (1e-3, 1e3)


@dataclass
class TestReport:
    name: str
    n: int
    statistic: float
    threshold: float
    passed: bool
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "".join(f" {k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{status} {self.name} n={self.n} statistic={_fmt(self.statistic)} threshold={_fmt(self.threshold)}{extra}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
            "detail": self.detail,
        }


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class SweepRow:
    ell: float
    epsilon: float
    mse: float
    bits_per_sample: float
    decoder_eps: float
    database_eps: float
    error: str | None = None


SWEEP_HEADER = ("ell", "epsilon", "mse", "bits_per_sample", "decoder_eps", "database_eps")


def ks_threshold(n: int) -> float:
    return KS_COEFF / math.sqrt(n)


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical cdf of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise InvalidParameterError("need at least two samples")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def tv_distance(a, b) -> float:
    """Total variation between two empirical laws on the integers."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo = min(a.min(), b.min())
    pa = np.bincount(a - lo) / a.size
    pb = np.bincount(b - lo) / b.size
    size = max(pa.size, pb.size)
    pa = np.pad(pa, (0, size - pa.size))
    pb = np.pad(pb, (0, size - pb.size))
    return 0.5 * float(np.abs(pa - pb).sum())


def streams(seed: int):
    """Shared and local streams of one harness session."""
    return RandomStream(seed, SHARED_STREAM), RandomStream(seed, LOCAL_STREAM)


def round_trip(x, params: MechanismParams, seed: int):
    """Encode then decode ``x`` once per entry; returns (decoded vector, descriptions)."""
    shared, local = streams(seed)
    desc = dql_encode_vector(x, params, shared, local)
    x_hat = dql_decode_vector(desc, params, RandomStream(seed, SHARED_STREAM))
    return x_hat, desc


def verify_noise(params: MechanismParams, x: float, n_samples: int, seed: int = 0) -> TestReport:
    """KS test of X_hat - x against Laplace(0, 1/epsilon)."""
    start = time.perf_counter()
    x_hat, _ = round_trip(np.full(n_samples, float(x)), params, seed)
    stat = ks_statistic(x_hat - x, lambda z: laplace_cdf(params.epsilon, z))
    thr = ks_threshold(n_samples)
    return TestReport(
        f"noise[x={x:g},eps={params.epsilon:g},ell={params.ell:g}]",
        n_samples,
        stat,
        thr,
        stat < thr,
        time.perf_counter() - start,
    )


def _privacy_grid(params, t, xs, n_u=7, n_m=2001, width=12.0):
    """(u, m) pairs covering all but ~1e-5 of the mass of every h_x with x in ``xs``."""
    d = params.delta_t(t)
    ex = params.epsilon * np.asarray(xs)
    lo = math.floor((ex.min() - width) / d) - 1
    hi = math.ceil((ex.max() + width) / d) + 1
    ms = [np.unique(np.linspace(lo, hi, n_m).round().astype(np.int64))]
    # every vertex near each x, where the log-slope is steepest
    for c in ex:
        k = int(round(c / d))
        ms.append(np.arange(k - 4, k + 5, dtype=np.int64))
    m = np.unique(np.concatenate(ms))
    u = np.linspace(-0.5, 0.5, n_u + 2)[1:-1]
    return np.add.outer(m, u).ravel() * d


def verify_decoder_privacy(
    params: MechanismParams,
    t_max: int = 12,
    xs=None,
    gaps=(1e-4, 0.1, 1.0),
) -> TestReport:
    """Analytic decoder-privacy check.

    (a) the privacy constant of every f_t, t <= t_max, equals ell;
    (b) |ln h_x(t,u,m) - ln h_x'(t,u,m)| <= ell eps |x - x'| + 1e-9 on a
        (u, m) grid, where h_x = p_T(t) delta_t f_t(delta_t (m+u) - eps x);
    (c) the Laplace log-ratio bound eps |x - x'| for the database view.
    """
    start = time.perf_counter()
    tables = dyadic_tables(params)
    xs = np.linspace(-3, 3, 7) if xs is None else np.asarray(xs, dtype=float)
    bound = params.ell * params.epsilon
    worst_const = 0.0
    worst_ratio = 0.0
    worst_excess = -math.inf
    n_checked = 0
    for t in range(t_max + 1):
        f = ft_density(tables, t)
        const = plm_epsilon(f)
        worst_const = max(worst_const, abs(const - params.ell) / params.ell)
        for gap in gaps:
            x1 = xs[xs + gap <= xs.max() + 1e-12]
            x2 = x1 + gap
            pts = _privacy_grid(params, t, np.concatenate([x1, x2]))
            # the p_T(t) delta_t factor is common to both sides and cancels
            la = f.log_pdf(pts[None, :] - params.epsilon * x1[:, None])
            lb = f.log_pdf(pts[None, :] - params.epsilon * x2[:, None])
            live = np.isfinite(la) & np.isfinite(lb)
            diff = np.abs(la - lb)[live]
            n_checked += diff.size
            worst_excess = max(worst_excess, float(np.max(diff - bound * gap)))
            worst_ratio = max(worst_ratio, float(np.max(diff)) / gap)
    # database side: Laplace log-density ratio at matched outputs
    z = np.linspace(-20, 20, 4001) / params.epsilon
    db = np.abs(
        np.log(laplace_density(params.epsilon, z)) - np.log(laplace_density(params.epsilon, z - 1.0))
    )
    db_ok = bool(np.max(db) <= params.epsilon + PRIVACY_SLACK)
    passed = worst_const <= CONSTANT_RTOL and worst_excess <= PRIVACY_SLACK and db_ok
    return TestReport(
        f"privacy[eps={params.epsilon:g},ell={params.ell:g},t<={t_max}]",
        n_checked,
        worst_ratio,
        bound,
        passed,
        time.perf_counter() - start,
        {"constant_rel_err": worst_const, "max_excess": worst_excess, "database_ok": db_ok},
    )


def verify_mixture(params: MechanismParams, t_max: int = 30, n_grid: int = 1000) -> TestReport:
    """F_T(-1) = 0 and sum_{t<=t_max} p_T(t) f_t matches the Laplace density on [-8, 8]."""
    start = time.perf_counter()
    tables = dyadic_tables(params)
    f_minus1 = float(cdf_factor(params.delta0, params.ell)) * tables.cdf_T(0)
    x = np.linspace(-8, 8, n_grid)
    total = np.zeros_like(x)
    for t in range(t_max + 1):
        total += tables.p[t] * ft_density(tables, t).pdf(x)
    err = float(np.max(np.abs(total - laplace_density(1.0, x))))
    passed = abs(f_minus1) <= F_MINUS1_TOL and err <= MIXTURE_TOL
    return TestReport(
        f"mixture[ell={params.ell:g},t<={t_max}]",
        n_grid,
        err,
        MIXTURE_TOL,
        passed,
        time.perf_counter() - start,
        {"F_minus1": f_minus1},
    )


def verify_equivalence(params: MechanismParams, t: int, n_samples: int, seed: int = 0) -> TestReport:
    """Four-arm geometric sampler vs. inverse-cdf index over the f_t weights."""
    start = time.perf_counter()
    tables = dyadic_tables(params)
    local = RandomStream(seed, LOCAL_STREAM)
    words = local.uniform(2 * n_samples).reshape(n_samples, 2)
    fast = sample_mtilde(tables, np.full(n_samples, t), words[:, 0], words[:, 1])
    generic = ft_density(tables, t).quantile_index(local.uniform(n_samples))
    tv = tv_distance(fast, generic)
    return TestReport(
        f"equivalence[ell={params.ell:g},t={t}]",
        n_samples,
        tv,
        TV_TOL,
        tv < TV_TOL,
        time.perf_counter() - start,
    )


def length_bound_for(params: MechanismParams, x_abs_mean: float, e_neg_log_delta: float, code_id: int):
    """Per-entry expected-length bound given E[-ln delta_T] (delta: L(z); gamma: 2 z log2 e + 1)."""
    ell = params.ell
    z = math.log(2 * params.epsilon * x_abs_mean + 9 / 8 * math.log(2 * ell * math.log(ell) + 1) + 2)
    z += e_neg_log_delta
    if code_id == CODE_DELTA:
        return length_bound(z)
    return 2 * z * LOG2E + 1


def neg_log_delta_bound(ell: float) -> float:
    """Closed-form upper bound ln(e/(ell - 1) + 1) - 1/2 on E[-ln delta_T]."""
    return math.log(math.e / (ell - 1) + 1) - 0.5


def verify_length(params: MechanismParams, x: float, n_samples: int, code_id: int = CODE_DELTA, seed: int = 0) -> TestReport:
    """Measured bits per sample against the expected-length bound, plus the E[-ln delta_T] bound."""
    start = time.perf_counter()
    _, desc = round_trip(np.full(n_samples, float(x)), params, seed)
    bits = float(np.mean(signed_lengths(desc.m, code_id)))
    e_meas = float(np.mean(desc.t) * math.log(2) - math.log(params.delta0))
    bound = length_bound_for(params, abs(x), e_meas, code_id)
    e_bound = neg_log_delta_bound(params.ell)
    passed = bits <= bound and e_meas <= e_bound
    code = "delta" if code_id == CODE_DELTA else "gamma"
    return TestReport(
        f"length[{code},x={x:g},eps={params.epsilon:g},ell={params.ell:g}]",
        n_samples,
        bits,
        bound,
        passed,
        time.perf_counter() - start,
        {"E_neg_log_delta": e_meas, "E_bound": e_bound},
    )


def mean_bits(params: MechanismParams, x, seed: int, code_id: int) -> float:
    _, desc = round_trip(x, params, seed)
    return float(np.mean(signed_lengths(desc.m, code_id)))


def length_slope(params: MechanismParams, xs, n_samples: int, seed: int = 0, code_id: int = CODE_DELTA) -> float:
    """Least-squares slope of mean bits against log2(eps |x|)."""
    xs = np.asarray(xs, dtype=float)
    bits = [mean_bits(params, np.full(n_samples, x), seed, code_id) for x in xs]
    return float(np.polyfit(np.log2(params.epsilon * np.abs(xs)), bits, 1)[0])


def uniform_data(n: int, seed: int) -> np.ndarray:
    """x ~ Unif(-1, 1), from a stream separate from the mechanism's."""
    return 2.0 * RandomStream(seed, DATA_STREAM).uniform(n) - 1.0


def sweep_row(ell: float, target_bits: float, n_samples: int, seed: int = 0, code_id: int = CODE_GAMMA) -> SweepRow:
    """Bisect log epsilon until the mean bits per sample hit ``target_bits``.

    Every probe reuses the same data and seeds, so the measured rate is a
    deterministic function of epsilon.
    """
    x = uniform_data(n_samples, seed)

    def rate(eps):
        return mean_bits(MechanismParams(eps, ell), x, seed, code_id)

    lo, hi = (math.log(e) for e in SWEEP_EPS_RANGE)
    r_lo, r_hi = rate(math.exp(lo)), rate(math.exp(hi))
    if not r_lo - SWEEP_BITS_TOL <= target_bits <= r_hi + SWEEP_BITS_TOL:
        nan = math.nan
        msg = (
            f"target {target_bits} bits unreachable for ell={ell}: "
            f"epsilon in [{SWEEP_EPS_RANGE[0]:g}, {SWEEP_EPS_RANGE[1]:g}] gives [{r_lo:.3f}, {r_hi:.3f}]"
        )
        return SweepRow(ell, nan, nan, nan, nan, nan, msg)
    eps, bits = math.exp(lo), r_lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        eps, bits = math.exp(mid), rate(math.exp(mid))
        if abs(bits - target_bits) <= SWEEP_BITS_TOL / 2:
            break
        if bits < target_bits:
            lo = mid
        else:
            hi = mid
    params = MechanismParams(eps, ell)
    x_hat, desc = round_trip(x, params, seed)
    bits = float(np.mean(signed_lengths(desc.m, code_id)))
    mse = float(np.mean((x_hat - x) ** 2))
    error = None
    if abs(bits - target_bits) > SWEEP_BITS_TOL:
        error = f"bisection stalled at {bits:.4f} bits for ell={ell}"
    return SweepRow(ell, eps, mse, bits, ell * eps, eps, error)


def sweep(ell_grid, target_bits: float = 5.0, n_samples: int = 200_000, seed: int = 0) -> list[SweepRow]:
    return [sweep_row(float(ell), target_bits, n_samples, seed) for ell in ell_grid]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([repr(float(getattr(r, k))) for k in SWEEP_HEADER])
    return buf.getvalue()


def sweep_slope(rows) -> float:
    """Slope of log epsilon against log MSE over the valid rows (-1/2 for Laplace)."""
    ok = [r for r in rows if r.error is None]
    if len(ok) < 2:
        raise RangeError("need two valid rows to fit a slope")
    return float(np.polyfit(np.log([r.mse for r in ok]), np.log([r.epsilon for r in ok]), 1)[0])


# suite definitions used by the CLI and the acceptance tests

NOISE_CASES = ((0.0, 1.0, 2.0), (0.3, 1.0, 2.0), (-2.5, 4.0, 1.5), (100.0, 0.5, 8.0))
PRIVACY_ELLS = (1.5, 2.0, 4.0)
LENGTH_ELLS = (1.5, 2.0, 4.0)
LENGTH_EPSILONS = (0.5, 1.0, 4.0)
LENGTH_XS = (0.0, 1.0, 10.0)
SUITES = ("noise", "privacy", "mixture", "equivalence", "length", "codec")


def run_suite(name: str, seed: int = 1, n: int | None = None) -> list[TestReport]:
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, seed, n)]
    if name == "noise":
        n = n or 1_000_000
        return [verify_noise(MechanismParams(e, l), x, n, seed) for x, e, l in NOISE_CASES]
    if name == "privacy":
        return [verify_decoder_privacy(MechanismParams(1.0, l)) for l in PRIVACY_ELLS]
    if name == "mixture":
        return [verify_mixture(MechanismParams(1.0, 2.0))]
    if name == "equivalence":
        n = n or 1_000_000
        return [verify_equivalence(MechanismParams(1.0, 2.0), t, n, seed) for t in (0, 1, 2)]
    if name == "length":
        n = n or 100_000
        return [
            verify_length(MechanismParams(e, l), x, n, CODE_DELTA, seed)
            for l in LENGTH_ELLS
            for e in LENGTH_EPSILONS
            for x in LENGTH_XS
        ]
    if name == "codec":
        return [verify_codec(n or 1_000_000)]
    raise InvalidParameterError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")


def verify_codec(k_max: int = 1_000_000) -> TestReport:
    """Exhaustive round trips of both codes on [1, k_max] and the delta length bound."""
    start = time.perf_counter()
    failures = 0
    lengths = []
    for k in range(1, k_max + 1):
        d = elias_delta_encode(k)
        if elias_delta_decode(d) != k or elias_gamma_decode(elias_gamma_encode(k)) != k:
            failures += 1
        lengths.append(len(d))
    ks = np.arange(1, k_max + 1)
    lengths = np.array(lengths)
    failures += int(np.count_nonzero(lengths != delta_length(ks)))
    # the bound is tight (k = 8 hits it exactly), so allow float rounding
    slack = float(np.min(length_bound(np.log(ks)) - lengths))
    golden = {1: "1", 8: "00100000", 17: "001010001"}
    golden_ok = all(elias_delta_encode(k) == v for k, v in golden.items())
    return TestReport(
        f"codec[k<={k_max}]",
        k_max,
        float(failures),
        0.0,
        failures == 0 and slack >= -CODEC_BOUND_SLACK and golden_ok,
        time.perf_counter() - start,
        {"min_bound_slack": slack, "golden_ok": golden_ok},
    )
