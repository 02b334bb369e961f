import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.special import kolmogorov

from reinforced_walks import distributions as dist
from reinforced_walks import nrbm, stats, walk
from reinforced_walks.errors import UsageError
from reinforced_walks.rng import replica_rng
from reinforced_walks.stats import StatReport


def test_mean_var_ci_small_cases():
    mean, var, se_mean, _ = stats.mean_var_ci([1, 1, 1, 1])
    assert (mean, var, se_mean) == (1.0, 0.0, 0.0)
    mean, var, _, _ = stats.mean_var_ci([0, 2])
    assert (mean, var) == (1.0, 2.0)
    with pytest.raises(UsageError):
        stats.mean_var_ci([3.0])


def test_mean_var_ci_normal_draws():
    x = replica_rng(1, 0).standard_normal(10**6)
    mean, var, se_mean, se_var = stats.mean_var_ci(x)
    assert abs(mean) <= 4 * se_mean
    assert abs(var - 1.0) <= 4 * se_var
    # Var(s^2) = 2/(N-1) for normal samples
    assert se_var == pytest.approx(math.sqrt(2 / (x.size - 1)), rel=0.01)


def test_covariance_trivial_pairs():
    x = replica_rng(2, 0).standard_normal(500)
    var = np.var(x, ddof=1)
    assert stats.empirical_covariance(x, x)[0] == pytest.approx(var, rel=1e-14)
    assert stats.empirical_covariance(x, -x)[0] == pytest.approx(-var, rel=1e-14)
    pairs = np.column_stack([x, 2 * x])
    assert stats.empirical_covariance(pairs)[0] == pytest.approx(2 * var, rel=1e-14)
    with pytest.raises(UsageError):
        stats.empirical_covariance(x, x[:-1])


def test_covariance_of_nrbm_pair():
    rng = replica_rng(3, 0)
    x = np.array([nrbm.sample_exact(0.25, [1.0, 2.0], rng).values for _ in range(100_000)])
    cov, se = stats.empirical_covariance(x[:, 0], x[:, 1])
    assert abs(cov - 2.378414) <= 4 * se


def test_correlation():
    x = replica_rng(4, 0).standard_normal(10_000)
    r, se = stats.correlation(x, x)
    assert r == pytest.approx(1.0) and se == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("x", [0.05, 0.3, 0.7, 0.99, 1.0, 1.3, 2.0, 3.5])
def test_kolmogorov_sf_matches_scipy(x):
    assert stats.kolmogorov_sf(x) == pytest.approx(kolmogorov(x), abs=1e-13)


def test_kolmogorov_sf_edges():
    assert stats.kolmogorov_sf(0.0) == 1.0
    assert stats.kolmogorov_sf(-1.0) == 1.0
    assert 0.0 <= stats.kolmogorov_sf(10.0) < 1e-80


def test_ks_statistic_matches_scipy():
    x = replica_rng(5, 0).standard_normal(2000) * 1.5
    d, _ = stats.ks_test(x, "normal", variance=2.25)
    assert d == pytest.approx(sps.kstest(x, sps.norm(scale=1.5).cdf).statistic, rel=1e-12)
    y = replica_rng(6, 0).standard_exponential(2000)
    d, _ = stats.ks_test(y, "exp")
    assert d == pytest.approx(sps.kstest(y, "expon").statistic, rel=1e-12)
    d2, _ = stats.ks_two_sample(x, y)
    assert d2 == pytest.approx(sps.ks_2samp(x, y).statistic, rel=1e-12)


def test_ks_level():
    passes = sum(
        stats.ks_test(replica_rng(7, s).standard_normal(10_000), "normal")[1] > 0.01 for s in range(100)
    )
    assert passes >= 98
    passes = sum(stats.ks_test(replica_rng(8, s).standard_exponential(10_000), "exp")[1] > 0.01 for s in range(100))
    assert passes >= 98


def test_ks_power():
    x = replica_rng(9, 0).standard_normal(10_000)
    assert stats.ks_test(x, "normal", variance=4.0)[1] < 1e-3
    y = replica_rng(10, 0).standard_normal(10_000) + 1.0
    assert stats.ks_two_sample(x, y)[1] < 1e-3


def test_ks_two_sample_level_and_identity():
    passes = sum(
        stats.ks_two_sample(replica_rng(11, s).standard_normal(2000), replica_rng(12, s).standard_normal(2000))[1]
        > 0.01
        for s in range(100)
    )
    assert passes >= 98
    x = replica_rng(13, 0).standard_normal(100)
    assert stats.ks_two_sample(x, x.copy()) == (0.0, 1.0)


def test_ks_on_quantiles_gives_small_d():
    n = 10_000
    x = sps.norm.ppf((np.arange(n) + 0.5) / n)
    d, p = stats.ks_test(x, "normal")
    assert d <= 0.5 / n + 1e-12
    assert p == 1.0


def test_ks_argument_checks():
    with pytest.raises(UsageError):
        stats.ks_test(np.zeros(10))
    with pytest.raises(UsageError):
        stats.ks_test(np.zeros(100), "normal", variance=-1.0)
    with pytest.raises(UsageError):
        stats.ks_test(np.zeros(100), "cauchy")
    with pytest.raises(UsageError):
        stats.ks_two_sample(np.zeros(100), np.zeros(5))


def test_ks_callable_target():
    x = replica_rng(14, 0).uniform(size=1000)
    assert stats.ks_test(x, lambda v: np.clip(v, 0, 1))[1] > 0.01


def test_scaling_exponent_noise_free():
    n = 2 ** np.arange(10, 15)
    for slope in (1.0, 1.5):
        est, se = stats.scaling_exponent(n, variances=3.0 * n**slope)
        assert est == pytest.approx(slope, abs=1e-6)
        assert se < 1e-6
    exact = walk.exact_variance(0.25, int(n[-1]))[n - 1]
    assert stats.scaling_exponent(n, variances=exact)[0] == pytest.approx(1.0, abs=0.02)
    with pytest.raises(UsageError):
        stats.scaling_exponent([1, 2], variances=[1, 2])
    with pytest.raises(UsageError):
        stats.scaling_exponent([1, 2, 3], variances=[1, 0, 2])


def test_scaling_exponent_iid():
    n = 2 ** np.arange(10, 15)
    ens = walk.walk_ensemble(0.0, int(n[-1]), dist.rademacher(), 5000, seed=15, checkpoints=n, test_mode=True)
    slope, _ = stats.scaling_exponent(n, ensemble=ens["S_hat"])
    assert abs(slope - 1.0) <= 0.05


def test_cauchy_l2_trivial_and_negative_control():
    n = np.array([2**8, 2**10, 2**12])
    rad = dist.rademacher()
    both = np.sort(np.concatenate([n, 2 * n]))
    ens = walk.walk_ensemble(1.0, int(both[-1]), rad, 200, seed=16, checkpoints=both, test_mode=True)
    cols = {c: j for j, c in enumerate(both)}
    at_n = ens["S_hat"][:, [cols[c] for c in n]]
    at_2n = ens["S_hat"][:, [cols[c] for c in 2 * n]]
    d, se = stats.cauchy_l2(1.0, at_n, at_2n, n)
    assert np.all(d == 0.0)
    # i.i.d. steps under the p = 0.75 normalisation: d_last stays clear of zero
    ens = walk.walk_ensemble(0.0, int(both[-1]), rad, 5000, seed=17, checkpoints=both, test_mode=True)
    at_n = ens["S_hat"][:, [cols[c] for c in n]]
    at_2n = ens["S_hat"][:, [cols[c] for c in 2 * n]]
    d, se = stats.cauchy_l2(0.75, at_n, at_2n, n)
    assert d[-1] > 4 * se[-1]


def test_lil_statistic():
    t = nrbm.log_grid(200, 10.0, 1e6)
    assert stats.lil_statistic(t, np.zeros_like(t)) == 0.0
    with pytest.raises(UsageError):
        stats.lil_statistic([2.0, 10.0], [0.0, 0.0])
    rng = replica_rng(18, 0)
    bm = [stats.lil_statistic(t, nrbm.sample_exact(0.0, t, rng, allow_zero=True).values) for _ in range(100)]
    assert 0.5 <= np.median(bm) <= 1.3


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_estimators_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(200)
    y = x + rng.standard_normal(200)
    perm = rng.permutation(200)
    np.testing.assert_allclose(stats.mean_var_ci(x), stats.mean_var_ci(x[perm]), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(
        stats.empirical_covariance(x, y), stats.empirical_covariance(x[perm], y[perm]), rtol=1e-12, atol=1e-15
    )
    assert stats.ks_test(x)[0] == stats.ks_test(x[perm])[0]
    assert stats.ks_two_sample(x, y)[0] == stats.ks_two_sample(y[perm], x)[0]


def test_report_verdicts_and_schema():
    ok = StatReport.moment("m", 1.0, 0.1, 1.3)
    assert ok.verdict == stats.PASS and ok.tolerance == pytest.approx(0.4)
    bad = StatReport.moment("m", 1.0, 0.1, 1.5)
    assert bad.verdict == stats.FAIL
    assert bad.as_warning().verdict == stats.WARN
    assert ok.as_warning() is ok
    assert StatReport.test("ks", 0.01, 0.5).passed
    assert not StatReport.test("ks", 0.1, 0.001).passed
    assert StatReport.check("c", True).passed
    d = StatReport.test("ks", 0.01, 0.5).to_dict()
    assert set(d) == {"name", "estimate", "se", "p_value", "target", "tolerance", "verdict"}
    assert d["se"] is None
    json.dumps(d)
    assert "[FAIL]" in bad.line()
