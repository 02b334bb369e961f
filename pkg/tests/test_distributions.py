import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from reinforced_walks import distributions as dist
from reinforced_walks.errors import DegenerateLawError, UsageError
from reinforced_walks.rng import replica_rng
from reinforced_walks.stats import mean_var_ci


def std_normal_trunc_second_moment(b):
    # E(Z^2 1{|Z|<=b}) = erf(b/sqrt2) - 2 b phi(b)
    return math.erf(b / math.sqrt(2)) - 2 * b * math.exp(-b * b / 2) / math.sqrt(2 * math.pi)


BUILTINS = [
    dist.rademacher(),
    dist.gaussian(2.0, 3.0),
    dist.uniform(-1.0, 1.0),
    dist.uniform(0.0, 3.0),
    dist.discrete([-1.0, 0.0, 2.0], [0.5, 0.25, 0.25]),
]


def test_sample_is_deterministic_per_stream():
    law = dist.rademacher()
    assert dist.sample(law, replica_rng(42, 0)) == dist.sample(law, replica_rng(42, 0))


def test_rademacher_mean_over_a_million_draws():
    x = dist.sample(dist.rademacher(), replica_rng(1, 0), 10**6)
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(x.mean()) < 3e-3


def test_constant_law_rejected_at_construction():
    with pytest.raises(DegenerateLawError):
        dist.discrete([1.0], [1.0])
    with pytest.raises(DegenerateLawError):
        dist.discrete([2.0, 2.0], [0.5, 0.5])


def test_probabilities_must_sum_to_one():
    with pytest.raises(UsageError):
        dist.discrete([0.0, 1.0], [0.5, 0.6])


@pytest.mark.parametrize(
    "law, expected",
    [
        (dist.rademacher(), (0.0, 1.0)),
        (dist.uniform(-1.0, 1.0), (0.0, 1.0 / 3.0)),
        (dist.gaussian(2.0, 3.0), (2.0, 9.0)),
    ],
)
def test_moments(law, expected):
    mean, var = dist.moments(law)
    assert mean == pytest.approx(expected[0], abs=1e-15)
    assert var == pytest.approx(expected[1], rel=1e-14)


def test_discrete_moments_exact():
    law = dist.discrete([-1.0, 0.0, 2.0], [0.5, 0.25, 0.25])
    assert law.mean == pytest.approx(0.0, abs=1e-12)
    assert law.variance == pytest.approx(0.5 + 1.0, abs=1e-12)
    assert law.fourth_moment == pytest.approx(0.5 + 4.0, abs=1e-12)


@pytest.mark.parametrize("law", BUILTINS, ids=lambda l: l.name)
def test_monte_carlo_matches_moments(law):
    x = dist.sample(law, replica_rng(5, 0), 10**6)
    mean, var, se_mean, se_var = mean_var_ci(x)
    assert abs(mean - law.mean) <= 4 * se_mean
    assert abs(var - law.variance) <= 4 * se_var
    if law.sup_bound is not None:
        assert np.max(np.abs(x)) <= law.sup_bound + 1e-12


def test_truncate_vacuous_returns_same_law():
    law = dist.rademacher()
    assert dist.truncate(law, 2.0) is law


def test_truncate_uniform_half():
    law = dist.truncate(dist.uniform(-1.0, 1.0), 0.5)
    assert law.mean == 0.0
    assert law.variance == pytest.approx(1.0 / 24.0, rel=1e-14)
    # half the mass uniform on [-1/2, 1/2], half an atom at the (zero) shift
    x = dist.sample(law, replica_rng(3, 0), 200_000)
    assert np.mean(x == 0.0) == pytest.approx(0.5, abs=4 * math.sqrt(0.25 / x.size))
    assert np.max(np.abs(x)) <= 0.5


def test_truncate_rejects_degenerate():
    with pytest.raises(DegenerateLawError):
        dist.truncate(dist.rademacher(), 0.5)
    with pytest.raises(UsageError):
        dist.truncate(dist.uniform(-1.0, 1.0), 0.0)


def test_truncate_gaussian_against_erf_closed_form():
    variances = []
    for b in (1.0, 2.0, 4.0):
        law = dist.truncate(dist.gaussian(0.0, 1.0), b)
        assert law.variance == pytest.approx(std_normal_trunc_second_moment(b), rel=1e-10)
        variances.append(law.variance)
    assert variances[0] < variances[1] < variances[2] < 1.0
    # beyond 4 sigma: erfc(2 sqrt2) + 8 phi(4) ~ 1.134e-3 of the variance is lost
    assert 1.0 - variances[2] == pytest.approx(1.134e-3, rel=1e-3)


def test_truncate_asymmetric_law_is_centered():
    base = dist.discrete([-3.0, -1.0, 2.0], [0.2, 0.5, 0.3])
    law = dist.truncate(base, 2.5)
    # Y = 1{|X|<=2.5} X - E(X 1{|X|<=2.5}); shift = -0.5 + 0.6 = 0.1
    values = np.array([0.0, -1.0, 2.0]) - 0.1
    probs = np.array([0.2, 0.5, 0.3])
    assert law.mean == 0.0
    assert law.variance == pytest.approx(np.dot(probs, values**2), rel=1e-12)
    assert law.fourth_moment == pytest.approx(np.dot(probs, values**4), rel=1e-12)
    x = dist.sample(law, replica_rng(4, 0), 100_000)
    assert np.max(np.abs(x)) <= 2.5 + 0.1 + 1e-12


def test_truncated_uniform_fourth_moment_against_quadrature():
    law = dist.truncate(dist.uniform(-0.5, 1.5), 0.75)
    shift = integrate.quad(lambda x: x / 2.0, -0.5, 0.75)[0]
    inside = integrate.quad(lambda x: (x - shift) ** 4 / 2.0, -0.5, 0.75)[0]
    outside = (1.0 - 1.25 / 2.0) * shift**4
    assert law.fourth_moment == pytest.approx(inside + outside, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(b=st.floats(0.05, 3.0))
def test_truncation_variance_monotone_in_b(b):
    for base in (dist.uniform(-1.0, 1.0), dist.gaussian(0.0, 1.0)):
        lo = dist.truncate(base, b).variance
        hi = dist.truncate(base, b * 1.1).variance
        assert lo <= hi + 1e-12
        assert hi <= base.variance + 1e-12


@settings(max_examples=25, deadline=None)
@given(b=st.floats(0.2, 3.0), seed=st.integers(0, 2**32))
def test_truncated_samples_bounded(b, seed):
    base = dist.discrete([-2.0, 0.5, 1.0], [0.3, 0.3, 0.4])
    try:
        law = dist.truncate(base, b)
    except DegenerateLawError:
        return
    shift = base.interval_moment(1, -b, b)
    x = dist.sample(law, replica_rng(seed, 0), 1000)
    assert np.all(np.abs(x) <= b + abs(shift) + 1e-12)


def test_parse_law():
    assert dist.parse_law("kind=rademacher").name == "rademacher"
    u = dist.parse_law("kind=uniform a=-1 b=1")
    assert u.variance == pytest.approx(1 / 3)
    d = dist.parse_law("kind=discrete values=[-1,2] probs=[0.5,0.5]")
    assert d.mean == pytest.approx(0.5)
    t = dist.parse_law("kind=uniform a=-1 b=1 truncate=0.5")
    assert t.variance == pytest.approx(1 / 24)
    with pytest.raises(UsageError):
        dist.parse_law("kind=cauchy")
    with pytest.raises(UsageError):
        dist.parse_law("kind=uniform a=-1 c=1")
