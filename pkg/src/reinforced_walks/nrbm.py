"""Noise reinforced Brownian motion: kernel, samplers, bridge, OU transform.

The NRBM with parameter p in (0, 1/2) is the centered Gaussian process with
covariance ``min(s,t)^(1-p) max(s,t)^p / (1 - 2p)``.  The primary sampler uses
the time change ``t^p B(t^(1-2p)) / sqrt(1-2p)`` of a standard Brownian motion
B; the Cholesky and Euler samplers exist as independent cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .stats import StatReport


@dataclass(frozen=True)
class ProcessPath:
    times: np.ndarray
    values: np.ndarray


def check_p(p: float, allow_zero: bool = False) -> None:
    if allow_zero and p == 0.0:
        return
    if not 0.0 < p < 0.5:
        raise DomainError(f"NRBM needs p in (0, 1/2), got {p}")


# ---------------------------------------------------------------------------
# grids


def make_grid(times: Sequence[float]) -> np.ndarray:
    """Validate a strictly increasing, finite, non-negative time grid."""
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise UsageError("time grid is empty")
    if not np.all(np.isfinite(t)):
        raise UsageError("time grid has non-finite entries")
    if t[0] < 0:
        raise UsageError("time grid must be non-negative")
    if np.any(np.diff(t) <= 0):
        raise UsageError("time grid must be strictly increasing")
    return t


def uniform_grid(count: int, start: float, stop: float) -> np.ndarray:
    return make_grid(np.linspace(start, stop, count))


def log_grid(count: int, start: float, stop: float) -> np.ndarray:
    if start <= 0:
        raise UsageError("log-spaced grid needs a positive start")
    return make_grid(np.geomspace(start, stop, count))


def exponential_grid(u: Sequence[float]) -> np.ndarray:
    """Grid ``e^u`` for a uniform grid ``u``, as expected by :func:`ou_transform`."""
    return make_grid(np.exp(np.asarray(u, dtype=float)))


# ---------------------------------------------------------------------------
# kernel


def covariance(p: float, s, t):
    """E(B(s) B(t)); broadcasts over array arguments."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(lo > 0, lo ** (1.0 - p) * hi**p, 0.0) / (1.0 - 2.0 * p)
    return float(val) if val.ndim == 0 else val


def kernel_matrix(p: float, times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return covariance(p, t[:, None], t[None, :])


@lru_cache(maxsize=64)
def _cholesky(p: float, times: tuple) -> np.ndarray:
    k = kernel_matrix(p, np.array(times))
    try:
        return np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        pass
    jittered = k + 1e-12 * np.max(np.diag(k)) * np.eye(len(times))
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError as exc:
        eig = np.linalg.eigvalsh(k)
        raise NumericalError(
            f"kernel matrix not positive definite after jitter: n={len(times)}, "
            f"min eigenvalue={eig[0]:.3e}, max eigenvalue={eig[-1]:.3e}, "
            f"min spacing={np.min(np.diff(times)) if len(times) > 1 else float('nan'):.3e}"
        ) from exc


# ---------------------------------------------------------------------------
# samplers


def sample_exact(p: float, times, rng: np.random.Generator, *, allow_zero: bool = False) -> ProcessPath:
    """Exact sampler through the Brownian time change."""
    check_p(p, allow_zero)
    t = make_grid(times)
    clock = t ** (1.0 - 2.0 * p)
    if t[0] == 0.0:
        clock[0] = 0.0
    dclock = np.diff(clock, prepend=0.0)
    bm = np.cumsum(np.sqrt(dclock) * rng.standard_normal(t.size))
    values = t**p * bm / math.sqrt(1.0 - 2.0 * p)
    return ProcessPath(t, values)


def sample_cholesky(p: float, times, rng: np.random.Generator) -> ProcessPath:
    """Oracle sampler: lower Cholesky factor of the kernel matrix times white noise.

    A leading time 0 gets the deterministic value 0.
    """
    check_p(p)
    t = make_grid(times)
    positive = t[t > 0]
    values = np.zeros(t.size)
    if positive.size:
        factor = _cholesky(p, tuple(positive.tolist()))
        values[t > 0] = factor @ rng.standard_normal(positive.size)
    return ProcessPath(t, values)


def sample_euler(
    p: float,
    times,
    rng: np.random.Generator,
    t0: float = 1e-4,
    substeps: int = 1000,
    *,
    allow_zero: bool = False,
) -> ProcessPath:
    """Euler-Maruyama for dB = dW + (p/t) B dt started from an exact draw at t0.

    Each grid interval (and the initial interval from t0 to the first
    positive grid time) is split into ``substeps`` equal Euler steps.  The
    scheme has weak order one, so the bias shrinks like 1/substeps.
    """
    check_p(p, allow_zero)
    if not t0 > 0:
        raise DomainError("Euler sampler needs t0 > 0 (the drift p/t is singular at 0)")
    if substeps < 1:
        raise UsageError("substeps must be >= 1")
    t = make_grid(times)
    positive = t[t > 0]
    values = np.zeros(t.size)
    if positive.size == 0:
        return ProcessPath(t, values)
    if t0 > positive[0]:
        raise UsageError(f"t0={t0} exceeds the first positive grid time {positive[0]}")
    fine, growth, keep = _euler_plan(p, t0, substeps, tuple(positive.tolist()))
    h = np.diff(fine)
    start = math.sqrt(t0 / (1.0 - 2.0 * p)) * rng.standard_normal()
    noise = np.sqrt(h) * rng.standard_normal(h.size)
    path = growth * (start + np.concatenate(([0.0], np.cumsum(noise / growth[1:]))))
    values[t > 0] = path[keep]
    return ProcessPath(t, values)


@lru_cache(maxsize=16)
def _euler_plan(p: float, t0: float, substeps: int, positive: tuple):
    knots = np.concatenate(([t0], positive))
    fine = np.concatenate(
        [np.linspace(a, b, substeps + 1)[:-1] for a, b in zip(knots[:-1], knots[1:])] + [knots[-1:]]
    )
    # B_{k+1} = a_k B_k + w_k with a_k = 1 + p h_k / t_k, solved by a cumulative product
    growth = np.cumprod(np.concatenate(([1.0], 1.0 + p * np.diff(fine) / fine[:-1])))
    keep = np.arange(1, knots.size) * substeps
    return fine, growth, keep


# ---------------------------------------------------------------------------
# bridge and OU transform


def bridge_sample(p: float, times, x: float, rng: np.random.Generator, *, with_endpoint: bool = False):
    """NRBM bridge from 0 to ``x`` on ``times`` (a subset of [0, 1]).

    The bridge is ``B(t) + t^(1-p) (x - B(1))``.  With ``with_endpoint`` the
    unpinned value B(1) used in the construction is returned as well.
    """
    check_p(p)
    t = make_grid(times)
    if t[-1] > 1.0:
        raise UsageError("bridge times must lie in [0, 1]")
    full = t if t[-1] == 1.0 else np.append(t, 1.0)
    free = sample_exact(p, full, rng)
    b1 = free.values[-1]
    values = free.values + full ** (1.0 - p) * (x - b1)
    values[-1] = x
    out = ProcessPath(t, values[: t.size])
    return (out, float(b1)) if with_endpoint else out


def ou_transform(path: ProcessPath, *, rtol: float = 1e-9) -> ProcessPath:
    """``U(u) = e^(-u/2) B(e^u)`` on the log-time grid ``u = ln t``."""
    t = path.times
    if np.any(t <= 0):
        raise UsageError("OU transform needs positive times")
    u = np.log(t)
    if u.size > 1:
        du = np.diff(u)
        if np.max(np.abs(du - du[0])) > rtol * max(1.0, abs(du[0])):
            raise UsageError("grid is not the exponential image of a uniform grid")
    return ProcessPath(u, np.exp(-u / 2.0) * path.values)


# ---------------------------------------------------------------------------
# algebraic kernel identities


def kernel_invariance_checks(p: float, triples=None, tol: float = 1e-12) -> list[StatReport]:
    """Scaling and time-inversion identities of the kernel, as reports.

    ``estimate`` is the largest relative error over the (s, t, c) triples.
    """
    if triples is None:
        triples = [(1.0, 2.0, 3.0), (0.5, 0.25, 1.0), (2.0, 7.0, 0.1), (3.0, 3.0, 10.0)]
    tri = np.asarray(triples, dtype=float)
    s, t, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ref = covariance(p, s, t)
    scaled = c**-2 * covariance(p, c**2 * s, c**2 * t)
    inverted = s * t * covariance(p, 1.0 / t, 1.0 / s)
    out = []
    for name, val in (("kernel_scaling", scaled), ("kernel_time_inversion", inverted)):
        err = float(np.max(np.abs(val - ref) / np.abs(ref)))
        out.append(StatReport.absolute(f"{name}[p={p}]", err, 0.0, tol))
    return out
