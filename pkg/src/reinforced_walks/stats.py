"""Estimators and tests that turn Monte Carlo ensembles into verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import UsageError

PASS, FAIL, WARN = "pass", "fail", "warn"


@dataclass(frozen=True)
class StatReport:
    """One checked quantity.

    For moment checks ``tolerance`` is absolute (already multiplied by the
    number of standard errors); for hypothesis tests ``estimate`` is the test
    statistic, ``tolerance`` the p-value threshold, and the verdict passes
    when ``p_value > tolerance``.
    """

    name: str
    estimate: float
    se: float
    p_value: float | None
    target: float
    tolerance: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @classmethod
    def moment(cls, name, estimate, se, target, n_se: float = 4.0) -> "StatReport":
        tol = n_se * se
        ok = abs(estimate - target) <= tol
        return cls(name, float(estimate), float(se), None, float(target), float(tol), PASS if ok else FAIL)

    @classmethod
    def absolute(cls, name, estimate, target, tolerance, se: float = math.nan) -> "StatReport":
        ok = abs(estimate - target) <= tolerance
        return cls(name, float(estimate), float(se), None, float(target), float(tolerance), PASS if ok else FAIL)

    @classmethod
    def test(cls, name, statistic, p_value, threshold: float = 0.01) -> "StatReport":
        ok = p_value > threshold
        return cls(name, float(statistic), math.nan, float(p_value), 0.0, float(threshold), PASS if ok else FAIL)

    @classmethod
    def check(cls, name, ok: bool, estimate: float = math.nan, target: float = math.nan) -> "StatReport":
        """A boolean property (exact identities, monotonicity)."""
        return cls(name, float(estimate), math.nan, None, float(target), 0.0, PASS if ok else FAIL)

    def as_warning(self) -> "StatReport":
        """Downgrade a failure to a warning (qualitative checks)."""
        if self.verdict != FAIL:
            return self
        return StatReport(self.name, self.estimate, self.se, self.p_value, self.target, self.tolerance, WARN)

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x

        return {
            "name": self.name,
            "estimate": clean(self.estimate),
            "se": clean(self.se),
            "p_value": clean(self.p_value),
            "target": clean(self.target),
            "tolerance": clean(self.tolerance),
            "verdict": self.verdict,
        }

    def line(self) -> str:
        tag = self.verdict.upper()
        if self.p_value is not None:
            return f"[{tag}] {self.name}: D={self.estimate:.5g} p={self.p_value:.4g} (threshold {self.tolerance:g})"
        return (
            f"[{tag}] {self.name}: estimate={self.estimate:.6g} target={self.target:.6g} "
            f"tol={self.tolerance:.3g}"
        )


# ---------------------------------------------------------------------------
# moments


def mean_var_ci(samples) -> tuple[float, float, float, float]:
    """Mean, unbiased variance, and their standard errors.

    The variance SE uses Var(s^2) = (mu4 - sigma^4 (N-3)/(N-1)) / N with the
    plug-in central fourth moment.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise UsageError("need at least two samples")
    mean = float(np.mean(x))
    dev = x - mean
    var = float(np.sum(dev**2) / (n - 1))
    m4 = float(np.mean(dev**4))
    var_of_var = (m4 - var**2 * (n - 3) / (n - 1)) / n
    return mean, var, math.sqrt(var / n), math.sqrt(max(var_of_var, 0.0))


def empirical_covariance(x, y=None) -> tuple[float, float]:
    """Unbiased sample covariance and its delta-method standard error.

    Accepts two equal-length sequences, or one sequence of pairs.
    """
    if y is None:
        pairs = np.asarray(x, dtype=float)
        x, y = pairs[:, 0], pairs[:, 1]
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise UsageError("covariance needs equal-length samples")
    n = x.size
    if n < 2:
        raise UsageError("need at least two samples")
    prod = (x - x.mean()) * (y - y.mean())
    cov = float(prod.sum() / (n - 1))
    se = math.sqrt(max(float(np.mean(prod**2)) - float(np.mean(prod)) ** 2, 0.0) / n)
    return cov, se


def correlation(x, y) -> tuple[float, float]:
    """Sample correlation with the large-sample SE (1 - r^2)/sqrt(N)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    r = float(np.corrcoef(x, y)[0, 1])
    return r, (1.0 - r * r) / math.sqrt(x.size)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def kolmogorov_sf(x: float) -> float:
    """P(K > x) for the Kolmogorov distribution.

    Uses 2 sum (-1)^(k-1) exp(-2 k^2 x^2) for x >= 1 and the Jacobi theta
    form 1 - sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)) below it; both
    converge in a handful of terms on their range.
    """
    if x <= 0:
        return 1.0
    if x < 1.0:
        if x < 0.04:
            return 1.0
        w = -(math.pi**2) / (8.0 * x * x)
        s = sum(math.exp(w * (2 * k - 1) ** 2) for k in range(1, 8))
        return min(max(1.0 - math.sqrt(2.0 * math.pi) / x * s, 0.0), 1.0)
    total = 0.0
    for k in range(1, 101):
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < 1e-17:
            break
    return min(max(2.0 * total, 0.0), 1.0)


def _ks_pvalue(d: float, effective_n: float) -> float:
    # Stephens' small-sample adjustment of the asymptotic argument
    root = math.sqrt(effective_n)
    return kolmogorov_sf((root + 0.12 + 0.11 / root) * d)


def normal_cdf(variance: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    if not variance > 0 or not math.isfinite(variance):
        raise UsageError(f"invalid normal variance {variance}")
    scale = math.sqrt(variance)
    return lambda x: ndtr(np.asarray(x) / scale)


def exp_cdf(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -np.expm1(-np.maximum(x, 0.0)), 0.0)


def ks_test(samples, target: str | Callable = "normal", variance: float = 1.0) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value.

    ``target`` is ``"normal"`` (centered, given variance), ``"exp"`` (rate
    one), or a vectorised CDF.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 30:
        raise UsageError("KS test needs at least 30 samples")
    if callable(target):
        cdf = target
    elif target == "normal":
        cdf = normal_cdf(variance)
    elif target in ("exp", "exponential"):
        cdf = exp_cdf
    else:
        raise UsageError(f"unknown KS target {target!r}")
    f = cdf(x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return d, _ks_pvalue(d, n)


def ks_two_sample(a, b) -> tuple[float, float]:
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n, m = a.size, b.size
    if n < 30 or m < 30:
        raise UsageError("two-sample KS needs at least 30 samples on each side")
    pts = np.concatenate((a, b))
    fa = np.searchsorted(a, pts, side="right") / n
    fb = np.searchsorted(b, pts, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    return d, _ks_pvalue(d, n * m / (n + m))


# ---------------------------------------------------------------------------
# walk-specific diagnostics


def scaling_exponent(checkpoints: Sequence[int], ensemble=None, variances=None) -> tuple[float, float]:
    """Least-squares slope of log Var(S(n)) against log n.

    Pass either ``ensemble`` (replicas x checkpoints array of walk values)
    or precomputed ``variances``.  The SE is the regression standard error.
    """
    n = np.asarray(checkpoints, dtype=float)
    if n.size < 3:
        raise UsageError("scaling fit needs at least three checkpoints")
    if variances is None:
        arr = np.asarray(ensemble, dtype=float)
        variances = arr.var(axis=0, ddof=1)
    v = np.asarray(variances, dtype=float)
    if np.any(v <= 0):
        raise UsageError("non-positive variance estimate")
    x, y = np.log(n), np.log(v)
    xc = x - x.mean()
    slope = float(np.sum(xc * (y - y.mean())) / np.sum(xc**2))
    resid = y - y.mean() - slope * xc
    se = math.sqrt(float(np.sum(resid**2)) / (n.size - 2) / float(np.sum(xc**2)))
    return slope, se


def cauchy_l2(p: float, at_n, at_2n, checkpoints: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """d_j = E|n_j^-p S(n_j) - (2 n_j)^-p S(2 n_j)|^2 and its standard error.

    ``at_n`` and ``at_2n`` are replicas x checkpoints arrays evaluated on
    the same paths.
    """
    n = np.asarray(checkpoints, dtype=float)
    a = np.asarray(at_n, dtype=float) * n**-p
    b = np.asarray(at_2n, dtype=float) * (2.0 * n) ** -p
    sq = (a - b) ** 2
    return sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(sq.shape[0])


def lil_statistic(times, values) -> float:
    """sup over the grid of value / sqrt(2 t ln ln t); all times must exceed e."""
    t = np.asarray(times, dtype=float)
    if np.any(t <= math.e):
        raise UsageError("LIL statistic needs grid times > e")
    return float(np.max(np.asarray(values) / np.sqrt(2.0 * t * np.log(np.log(t)))))
