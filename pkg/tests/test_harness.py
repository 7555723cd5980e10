import math

import numpy as np
import pytest
from scipy import stats

from dql import harness
from dql.codec import CODE_DELTA, CODE_GAMMA
from dql.distributions import MechanismParams, dyadic_tables, laplace_cdf
from dql.errors import InvalidParameterError, RangeError
from dql.harness import (
    SweepRow,
    TestReport,
    ks_statistic,
    ks_threshold,
    ks_two_sample,
    length_slope,
    neg_log_delta_bound,
    sweep_csv,
    sweep_row,
    sweep_slope,
    tv_distance,
    verify_decoder_privacy,
    verify_equivalence,
    verify_length,
    verify_mixture,
    verify_noise,
)
from dql.randomness import RandomStream


class TestStatistics:
    def test_ks_matches_scipy(self):
        x = RandomStream(1).uniform(5000) * 2 - 1
        ours = ks_statistic(x, stats.norm.cdf)
        assert ours == pytest.approx(stats.kstest(x, "norm").statistic, rel=1e-12)

    def test_ks_constant_sample(self):
        assert ks_statistic(np.zeros(100), stats.norm.cdf) >= 0.5

    def test_ks_needs_two(self):
        with pytest.raises(InvalidParameterError):
            ks_statistic([1.0], stats.norm.cdf)

    def test_threshold(self):
        assert ks_threshold(10**6) == pytest.approx(0.00163)

    def test_two_sample(self):
        x = RandomStream(2).uniform(20_000)
        assert ks_two_sample(x[:10_000], x[10_000:]) < 1.63 * math.sqrt(2 / 10_000)
        assert ks_two_sample(x, x + 10) == 1.0
        assert ks_two_sample(x[:1000], x[1000:3000]) == pytest.approx(
            stats.ks_2samp(x[:1000], x[1000:3000]).statistic, rel=1e-12
        )

    def test_tv(self):
        assert tv_distance([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.25)
        assert tv_distance([0], [5]) == 1.0


class TestVerifiers:
    def test_noise(self):
        r = verify_noise(MechanismParams(1.0, 2.0), 0.3, 100_000, seed=4)
        assert r.passed and r.statistic < r.threshold

    def test_noise_detects_wrong_scale(self):
        # decoding with the wrong epsilon must fail the KS test
        params = MechanismParams(1.0, 2.0)
        x_hat, _ = harness.round_trip(np.zeros(100_000), params, 5)
        assert ks_statistic(1.2 * x_hat, lambda z: laplace_cdf(1.0, z)) > ks_threshold(100_000)

    @pytest.mark.parametrize("ell", [1.001, 1.5, 4.0])
    def test_privacy(self, ell):
        r = verify_decoder_privacy(MechanismParams(1.0, ell), t_max=6)
        assert r.passed
        assert r.statistic <= ell * (1 + 1e-9)
        assert r.detail["constant_rel_err"] <= 1e-9

    def test_privacy_ratio_is_attained(self):
        r = verify_decoder_privacy(MechanismParams(2.0, 2.0), t_max=4)
        assert r.passed
        assert r.statistic >= 0.9 * r.threshold

    def test_mixture(self):
        r = verify_mixture(MechanismParams(1.0, 2.0))
        assert r.passed
        assert abs(r.detail["F_minus1"]) <= 1e-12

    def test_mixture_fails_when_truncated(self):
        assert not verify_mixture(MechanismParams(1.0, 2.0), t_max=3).passed

    def test_equivalence(self):
        r = verify_equivalence(MechanismParams(1.0, 2.0), 1, 200_000, seed=3)
        assert r.passed

    # oracle: the raw product for F_T summed in 250-digit arithmetic over t < 160
    @pytest.mark.parametrize("ell, expected", [(2.0, 0.716874059732), (1.5, 1.27484517088), (4.0, 0.0238981668847)])
    def test_expected_neg_log_delta(self, ell, expected):
        e = dyadic_tables(MechanismParams(1.0, ell)).expected_neg_log_delta()
        assert e == pytest.approx(expected, rel=1e-10)
        assert e <= neg_log_delta_bound(ell)

    def test_length(self):
        r = verify_length(MechanismParams(1.0, 2.0), 10.0, 50_000)
        assert r.passed
        e = dyadic_tables(MechanismParams(1.0, 2.0)).expected_neg_log_delta()
        assert r.detail["E_neg_log_delta"] == pytest.approx(e, abs=0.02)

    def test_length_slope(self):
        # gamma spends 2 log2 k + 1 bits; delta adds a 2 log2 log2 k term on top of log2 k
        xs = 2.0 ** np.arange(4, 11)
        params = MechanismParams(1.0, 2.0)
        assert length_slope(params, xs, 20_000, seed=2, code_id=CODE_GAMMA) == pytest.approx(2.0, abs=0.1)
        assert 1.0 < length_slope(params, xs, 20_000, seed=2, code_id=CODE_DELTA) < 1.5


class TestReportFormat:
    def test_line_excludes_time(self):
        a = TestReport("x", 3, 0.1, 0.2, True, seconds=1.0, detail={"k": 1.5})
        b = TestReport("x", 3, 0.1, 0.2, True, seconds=9.0, detail={"k": 1.5})
        assert a.line() == b.line() == "PASS x n=3 statistic=0.1 threshold=0.2 k=1.5"
        assert "seconds" not in a.as_dict()

    def test_unknown_suite(self):
        with pytest.raises(InvalidParameterError):
            harness.run_suite("bogus")


@pytest.fixture(scope="module")
def row():
    return sweep_row(2.0, 5.0, 50_000, seed=1)


class TestSweep:
    def test_row_properties(self, row):
        assert row.error is None
        assert abs(row.bits_per_sample - 5.0) <= harness.SWEEP_BITS_TOL
        assert row.decoder_eps == 2.0 * row.epsilon
        assert row.database_eps == row.epsilon
        assert row.mse * row.epsilon**2 / 2 == pytest.approx(1.0, rel=0.03)

    def test_unreachable(self):
        r = sweep_row(2.0, 64.0, 2000, seed=1)
        assert r.error and math.isnan(r.mse)

    def test_csv(self, row):
        text = sweep_csv([row])
        header, line = text.strip().split("\n")
        assert header == "ell,epsilon,mse,bits_per_sample,decoder_eps,database_eps"
        assert float(line.split(",")[1]) == row.epsilon

    def test_slope_needs_rows(self):
        with pytest.raises(RangeError):
            sweep_slope([SweepRow(2.0, 1.0, 2.0, 5.0, 2.0, 1.0)])

    def test_slope_exact_laplace(self):
        rows = [SweepRow(2.0, e, 2 / e**2, 5.0, 2 * e, e) for e in (0.5, 1.0, 3.0)]
        assert sweep_slope(rows) == pytest.approx(-0.5, abs=1e-12)
