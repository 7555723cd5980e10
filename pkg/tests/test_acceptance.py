"""Acceptance criteria, one test each, at the stated sample sizes and tolerances.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the terminal summary) and then asserts it.  Runtime budgets are part of
the criterion.
"""

import contextlib
import io
import math
import time

import pytest

from dql import harness
from dql.cli import main
from dql.codec import CODE_DELTA
from dql.distributions import MechanismParams
from dql.protocol import seal, seed_id_for
from dql.randomness import LOCAL_STREAM, SHARED_STREAM, RandomStream

GOLDEN_FRAME_HEX = "44514c310100000000000000f03f00000000000000400200000039730761100e1463309a"
SWEEP_ELLS = (2.0, 3.0, 4.0, 6.0, 8.0)

_LINES: list[str] = []


def _report(criterion, passed, seconds, budget, detail):
    ok = passed and seconds <= budget
    limit = f"of {budget:g}s" if math.isfinite(budget) else "(no budget)"
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail} ({seconds:.1f}s {limit})"
    _LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and _LINES:
        reporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            reporter.write_line(line)


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def test_criterion_1_exact_laplace_noise():
    reports, secs = _timed(lambda: harness.run_suite("noise", seed=1))
    worst = max(r.statistic / r.threshold for r in reports)
    detail = ", ".join(f"{r.name} KS={r.statistic:.5f}" for r in reports) + f" vs {reports[0].threshold:.5f}"
    assert len(reports) == 4 and all(r.n == 10**6 for r in reports)
    assert _report(1, all(r.passed for r in reports) and worst < 1, secs, 60, detail)


def test_criterion_2_decoder_privacy():
    reports, secs = _timed(lambda: harness.run_suite("privacy"))
    const = max(r.detail["constant_rel_err"] for r in reports)
    excess = max(r.detail["max_excess"] for r in reports)
    detail = f"max constant rel err {const:.2e} (<= 1e-9), max log-ratio excess over ell*eps {excess:.2e} (<= 1e-9)"
    assert [r.threshold for r in reports] == [1.5, 2.0, 4.0]
    assert _report(2, all(r.passed for r in reports), secs, 10, detail)


def test_criterion_3_mixture_identity():
    (r,), secs = _timed(lambda: harness.run_suite("mixture"))
    detail = f"F_T(-1)={r.detail['F_minus1']:.1e}, sup error {r.statistic:.2e} on {r.n} points (<= 1e-8)"
    assert r.n == 1000
    assert _report(3, r.passed, secs, 5, detail)


def test_criterion_4_sampler_equivalence():
    reports, secs = _timed(lambda: harness.run_suite("equivalence", seed=1))
    detail = ", ".join(f"t={i} TV={r.statistic:.4f}" for i, r in enumerate(reports)) + " (< 0.005)"
    assert all(r.n == 10**6 for r in reports)
    assert _report(4, all(r.passed for r in reports), secs, 30, detail)


def test_criterion_5_codec():
    (r,), secs = _timed(lambda: harness.run_suite("codec"))
    detail = f"{int(r.statistic)} failures over k<=10^6, min bound slack {r.detail['min_bound_slack']:.2e}, golden {r.detail['golden_ok']}"
    assert r.n == 10**6
    assert _report(5, r.passed, secs, 10, detail)


def test_criterion_6_expected_length():
    reports, secs = _timed(lambda: harness.run_suite("length", seed=1))
    margin = min(r.threshold - r.statistic for r in reports)
    e_margin = min(r.detail["E_bound"] - r.detail["E_neg_log_delta"] for r in reports)
    detail = f"{sum(r.passed for r in reports)}/27 cases, min bits margin {margin:.3f}, min E[-ln delta_T] margin {e_margin:.4f}"
    assert len(reports) == 27 and all(r.n == 10**5 for r in reports)
    assert _report(6, all(r.passed for r in reports), secs, 60, detail)


def test_criterion_7_sweep_shape():
    rows, secs = _timed(lambda: harness.sweep(SWEEP_ELLS, 5.0, 200_000, seed=1))
    mse_ok = all(r.error is None and abs(r.mse * r.epsilon**2 / 2 - 1) <= 0.02 for r in rows)
    ratio_ok = all(r.decoder_eps / r.database_eps == r.ell for r in rows)
    slope = harness.sweep_slope(rows)
    worst = max(abs(r.mse * r.epsilon**2 / 2 - 1) for r in rows)
    detail = f"max |MSE eps^2/2 - 1| = {worst:.4f} (<= 0.02), ratio exact {ratio_ok}, slope {slope:.4f} (-0.5 +- 0.02)"
    assert _report(7, mse_ok and ratio_ok and abs(slope + 0.5) <= 0.02, secs, 120, detail)


def _verify_all():
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        rc = main(["verify", "all", "--seed", "1"])
    return rc, buf.getvalue()


def test_criterion_8_determinism():
    start = time.perf_counter()
    rc1, first = _verify_all()
    rc2, second = _verify_all()
    params = MechanismParams(1.0, 2.0)
    frame = seal([0.5, -0.25], params, CODE_DELTA, seed_id_for(7), RandomStream(7, SHARED_STREAM), RandomStream(9, LOCAL_STREAM))
    golden_ok = frame.to_bytes().hex() == GOLDEN_FRAME_HEX
    secs = time.perf_counter() - start
    same = first == second and len(first) > 0
    detail = f"verify all exit codes {rc1},{rc2}; reports byte-identical {same}; golden frame stable {golden_ok}"
    assert _report(8, same and golden_ok and rc1 == rc2 == 0, secs, math.inf, detail)
