"""Step-reinforced random walks.

At each time i >= 2 the walk repeats, with probability p, a uniformly chosen
earlier step; otherwise it takes a fresh independent step X_i.  Indices in
this module are 0-based: ``steps[0]`` is the first step and ``sums[k]`` is
the partial sum of the first ``k + 1`` steps.

Generation is vectorised by resolving each step's *origin* (the fresh
variable it ultimately copies) with pointer jumping instead of a Python
loop over time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import distributions
from .distributions import StepLaw
from .errors import DomainError, UsageError
from .rng import map_replicas, replica_rng


@dataclass(frozen=True)
class WalkParams:
    p: float
    n: int
    law: StepLaw
    seed: int = 0
    track_origins: bool = True
    test_mode: bool = False

    def __post_init__(self):
        check_reinforcement(self.p, self.test_mode)
        if self.n < 1:
            raise UsageError(f"walk length must be >= 1, got {self.n}")


def check_reinforcement(p: float, test_mode: bool = False) -> None:
    if test_mode:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {p}")
    elif not 0.0 < p < 1.0:
        raise DomainError(f"reinforcement parameter must lie in (0, 1), got {p}")


@dataclass(frozen=True)
class WalkPath:
    """One realisation of a step-reinforced walk.

    ``eps[i - 1]`` is the repeat flag of step ``i`` (step 0 is always fresh).
    ``fresh`` holds the i.i.d. draws X_1..X_n, including those never used.
    ``origin`` is None unless origins were tracked.
    """

    p: float
    law: StepLaw
    steps: np.ndarray
    sums: np.ndarray
    eps: np.ndarray
    fresh: np.ndarray
    origin: np.ndarray | None

    @property
    def n(self) -> int:
        return len(self.steps)


class WalkGrower:
    """Builds a walk incrementally; earlier steps never change.

    The generator is consumed chunk by chunk, so extending by the same
    sequence of chunk sizes always reproduces the same walk.
    """

    def __init__(self, p: float, law: StepLaw, rng: np.random.Generator, capacity: int = 64):
        self.p = p
        self.law = law
        self.rng = rng
        self.size = 0
        self._steps = np.empty(capacity)
        self._fresh = np.empty(capacity)
        self._origin = np.empty(capacity, dtype=np.int64)
        self._eps = np.zeros(capacity, dtype=bool)

    def _reserve(self, total: int) -> None:
        cap = len(self._steps)
        if total <= cap:
            return
        while cap < total:
            cap *= 2
        for name in ("_steps", "_fresh", "_origin", "_eps"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: self.size] = old[: self.size]
            setattr(self, name, new)

    def extend(self, m: int) -> None:
        if m <= 0:
            return
        start, stop = self.size, self.size + m
        self._reserve(stop)
        rng = self.rng
        index = np.arange(start, stop)
        fresh = distributions.sample(self.law, rng, m)
        eps = rng.random(m) < self.p
        pick = rng.integers(0, np.maximum(index, 1))
        if start == 0:
            eps[0] = False
        ptr = np.where(eps, pick, index)
        # pointer jumping: chase pointers that still land inside this chunk
        # until each one reaches an older step or a fresh step of the chunk
        while True:
            inside = ptr >= start
            nxt = ptr.copy()
            nxt[inside] = ptr[ptr[inside] - start]
            if np.array_equal(nxt, ptr):
                break
            ptr = nxt
        old = ptr < start
        origin = ptr.copy()
        origin[old] = self._origin[ptr[old]]
        steps = fresh[ptr - start]
        steps[old] = self._steps[ptr[old]]
        self._fresh[start:stop] = fresh
        self._eps[start:stop] = eps
        self._origin[start:stop] = origin
        self._steps[start:stop] = steps
        self.size = stop

    @property
    def steps(self) -> np.ndarray:
        return self._steps[: self.size]

    @property
    def origin(self) -> np.ndarray:
        return self._origin[: self.size]

    def path(self, track_origins: bool = True) -> WalkPath:
        n = self.size
        steps = self._steps[:n].copy()
        return WalkPath(
            p=self.p,
            law=self.law,
            steps=steps,
            sums=np.cumsum(steps),
            eps=self._eps[1:n].copy(),
            fresh=self._fresh[:n].copy(),
            origin=self._origin[:n].copy() if track_origins else None,
        )


def simulate_walk(params: WalkParams, rng: np.random.Generator | None = None) -> WalkPath:
    """Generate a walk; ``rng`` defaults to the stream of ``params.seed``."""
    if rng is None:
        rng = replica_rng(params.seed, 0)
    grower = WalkGrower(params.p, params.law, rng, capacity=params.n)
    grower.extend(params.n)
    return grower.path(params.track_origins)


def elephant_walk(q: float, n: int, seed: int = 0) -> WalkPath:
    """Elephant random walk with memory parameter q, i.e. p = 2q - 1."""
    if not 0.5 < q < 1.0:
        raise DomainError(f"elephant memory parameter must lie in (1/2, 1), got {q}")
    return simulate_walk(WalkParams(p=2.0 * q - 1.0, n=n, law=distributions.rademacher(), seed=seed))


def repetition_counts(path: WalkPath) -> np.ndarray:
    """``r[i]``: number of copies of fresh variable i among all steps."""
    if path.origin is None:
        raise UsageError("repetition counts need a path built with track_origins=True")
    return np.bincount(path.origin, minlength=path.n)


def truncated_decomposition(path: WalkPath, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Split the centered walk into its truncated part and the remainder.

    The truncated part uses the same repeat flags and picks as ``path``, so
    it is itself a reinforced walk with step law ``truncate(law, b)``.
    """
    if not b > 0:
        raise UsageError(f"truncation level must be positive, got {b}")
    shift = path.law.interval_moment(1, -b, b)
    steps = path.steps
    sums_b = np.cumsum(np.where(np.abs(steps) <= b, steps, 0.0) - shift)
    k = np.arange(1, path.n + 1)
    residual = path.sums - k * path.law.mean - sums_b
    return sums_b, residual


def conditional_step_mean(prefix_sum: float, n: int, p: float, law: StepLaw) -> float:
    """E(next step | first n steps) = (1 - p) E(X) + p * S(n) / n."""
    if n < 1:
        raise UsageError("conditional step mean needs at least one past step")
    return (1.0 - p) * law.mean + p * prefix_sum / n


def next_step_samples(prefix: np.ndarray, p: float, law: StepLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    """Independent draws of the step following a fixed ``prefix``."""
    prefix = np.asarray(prefix, dtype=float)
    repeat = rng.random(size) < p
    picked = prefix[rng.integers(0, len(prefix), size)]
    return np.where(repeat, picked, distributions.sample(law, rng, size))


def exact_variance(p: float, n: int, variance: float = 1.0) -> np.ndarray:
    """Var(S(k)) for k = 1..n, exactly, for any p.

    Uses E(S(k+1)^2 | past) = (1 + 2p/k) S(k)^2 + p V(k)/k + (1 - p) var
    with E V(k) = k var.
    """
    out = np.empty(n)
    out[0] = variance
    for k in range(1, n):
        out[k] = out[k - 1] * (1.0 + 2.0 * p / k) + variance
    return out


def exact_covariance(p: float, m: int, n: int, variance: float = 1.0) -> float:
    """Cov(S(m), S(n)) for m <= n, from E(S(k+1) | past) = (1 + p/k) S(k)."""
    if m > n:
        m, n = n, m
    factor = math.exp(np.sum(np.log1p(p / np.arange(m, n)))) if n > m else 1.0
    return float(exact_variance(p, m, variance)[-1] * factor)


def walk_ensemble(
    p: float,
    n: int,
    law: StepLaw,
    replicas: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    threads: int | None = 1,
    test_mode: bool = False,
) -> dict[str, np.ndarray]:
    """S(n_j) and max_{k<=n_j}|S(k)| at each checkpoint, one row per replica.

    Replica r uses the stream ``replica_rng(seed, r)``, so row r equals
    ``simulate_walk`` driven by that stream.
    """
    check_reinforcement(p, test_mode)
    cps = np.sort(np.asarray(checkpoints if checkpoints is not None else [n], dtype=np.int64))
    if cps.size == 0 or cps[0] < 1 or cps[-1] > n:
        raise UsageError(f"checkpoints must lie in [1, {n}]")

    def one(rng, _r):
        grower = WalkGrower(p, law, rng, capacity=n)
        grower.extend(n)
        sums = np.cumsum(grower.steps)
        running = np.maximum.accumulate(np.abs(sums))
        return sums[cps - 1], running[cps - 1]

    rows = map_replicas(one, seed, replicas, threads)
    return {
        "checkpoints": cps,
        "S_hat": np.array([r[0] for r in rows]),
        "max_abs_S": np.array([r[1] for r in rows]),
    }
