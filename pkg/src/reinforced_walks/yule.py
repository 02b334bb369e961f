"""Yule-process embedding of a reinforced walk and the associated martingale.

A standard Yule process Y starts from one ancestor at time 0 and jumps from n
to n + 1 at rate n.  Giving the n-th individual the n-th reinforced step,
``M(t) = exp(-p t) S(Y_t)`` is a martingale for centered steps.  The ancestor
is present at time 0, so ``M(0) = X_1`` and the brackets only collect the
jumps in (0, t].

Trajectories are generated in chunks of doubling size from two independent
child streams (clock and steps), so a longer horizon on the same generator
extends the same path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .distributions import StepLaw
from .errors import HorizonError, UsageError
from .nrbm import ProcessPath
from .walk import WalkGrower

POP_CAP = 10**7
_FIRST_CHUNK = 64


@dataclass(frozen=True)
class YuleTrajectory:
    jump_times: np.ndarray  # birth times, jump_times[0] = 0 for the ancestor
    horizon: float
    truncated: bool = False

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.jump_times.size + 1)

    @property
    def final_size(self) -> int:
        return int(self.jump_times.size)

    def population(self, t):
        """Y(t), right-continuous; valid for t <= horizon."""
        return np.searchsorted(self.jump_times, t, side="right")


def _birth_chunks(rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Successive blocks of birth times; holding time from size k is Exp(k)."""
    size, last, m = 1, 0.0, _FIRST_CHUNK
    while True:
        rates = np.arange(size, size + m, dtype=float)
        times = last + np.cumsum(rng.standard_exponential(m) / rates)
        yield times
        size += m
        last = float(times[-1])
        m *= 2


def simulate_yule(
    rng: np.random.Generator,
    horizon: float | None = None,
    max_pop: int | None = None,
    pop_cap: int = POP_CAP,
) -> YuleTrajectory:
    """Run a Yule process until ``horizon`` or until it holds ``max_pop`` individuals.

    If ``pop_cap`` is hit first the trajectory stops there and is flagged
    ``truncated``.
    """
    if horizon is None and max_pop is None:
        raise UsageError("give a horizon, a population bound, or both")
    if horizon is not None and not horizon >= 0:
        raise UsageError(f"horizon must be non-negative, got {horizon}")
    if max_pop is not None and max_pop < 1:
        raise UsageError("max_pop must be >= 1")
    limit = min(max_pop, pop_cap) if max_pop is not None else pop_cap
    cap_binds = max_pop is None or max_pop > pop_cap
    end = math.inf if horizon is None else float(horizon)
    chunks = _birth_chunks(rng)
    pieces = [np.zeros(1)]
    total = 1
    while total < limit and pieces[-1][-1] <= end:
        pieces.append(next(chunks))
        total += pieces[-1].size
    times = np.concatenate(pieces)[:limit]
    truncated = False
    if times.size == limit and times[-1] <= end:
        end = float(times[-1])
        truncated = cap_binds
    times = times[times <= end]
    return YuleTrajectory(times, end, bool(truncated))


# ---------------------------------------------------------------------------
# the embedded martingale


@dataclass(frozen=True)
class MartingalePath:
    """M, [M], <M>, Y and V on ``times`` (the birth times followed by the horizon).

    ``steps[k]`` is the reinforced step carried by individual k + 1.
    """

    p: float
    sigma2: float
    jump_times: np.ndarray
    steps: np.ndarray
    horizon: float
    times: np.ndarray
    M: np.ndarray
    sq_bracket: np.ndarray
    angle_bracket: np.ndarray
    Y: np.ndarray
    vhat: np.ndarray

    @property
    def tau_hat(self) -> float:
        return math.exp(-self.horizon) * self.jump_times.size

    @property
    def sums(self) -> np.ndarray:
        return np.cumsum(self.steps)

    def _segment_rates(self) -> np.ndarray:
        # <M> grows at rate c_j exp(-2ps) on [t_j, t_{j+1})
        v = np.cumsum(self.steps**2)
        pop = np.arange(1, self.jump_times.size + 1)
        return self.p * v + (1.0 - self.p) * self.sigma2 * pop

    def state_at(self, t) -> dict[str, np.ndarray]:
        """M(t), [M](t), <M>(t) and Y(t) for arbitrary ``0 <= t <= horizon``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon):
            raise HorizonError(f"times must lie in [0, {self.horizon}]")
        j = np.searchsorted(self.jump_times, t, side="right") - 1
        p = self.p
        rates = self._segment_rates()
        tj = self.jump_times[j]
        angle = self.angle_bracket[j] + rates[j] * np.exp(-2 * p * tj) * -np.expm1(-2 * p * (t - tj)) / (2 * p)
        return {
            "M": np.exp(-p * t) * self.sums[j],
            "sq_bracket": self.sq_bracket[j],
            "angle_bracket": angle,
            "Y": j + 1,
        }


def square_bracket_values(p: float, jump_times: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """[M] at each birth time: sum over births s in (0, t] of exp(-2ps) X(Y_s)^2."""
    contrib = np.exp(-2.0 * p * jump_times) * steps[: jump_times.size] ** 2
    contrib[0] = 0.0  # the ancestor is not a jump in (0, t]
    return np.cumsum(contrib)


def angle_bracket_values(p: float, sigma2: float, jump_times: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """<M> at each birth time, integrating each constant-population piece exactly."""
    k = jump_times.size
    v = np.cumsum(steps[:k] ** 2)
    rates = p * v + (1.0 - p) * sigma2 * np.arange(1, k + 1)
    dt = np.diff(jump_times)
    pieces = rates[:-1] * np.exp(-2.0 * p * jump_times[:-1]) * -np.expm1(-2.0 * p * dt) / (2.0 * p)
    return np.concatenate(([0.0], np.cumsum(pieces)))


def square_bracket(mp: MartingalePath) -> np.ndarray:
    return mp.sq_bracket


def angle_bracket(mp: MartingalePath) -> np.ndarray:
    return mp.angle_bracket


def _assemble(p, sigma2, jump_times, steps, horizon) -> MartingalePath:
    k = jump_times.size
    steps = steps[:k].copy()
    sums = np.cumsum(steps)
    sq = square_bracket_values(p, jump_times, steps)
    ang = angle_bracket_values(p, sigma2, jump_times, steps)
    v = np.cumsum(steps**2)
    # extend every series to the horizon
    last_rate = p * v[-1] + (1.0 - p) * sigma2 * k
    tail = last_rate * math.exp(-2.0 * p * jump_times[-1]) * -math.expm1(-2.0 * p * (horizon - jump_times[-1])) / (2 * p)
    times = np.append(jump_times, horizon)
    pop = np.append(np.arange(1, k + 1), k)
    return MartingalePath(
        p=p,
        sigma2=sigma2,
        jump_times=jump_times,
        steps=steps,
        horizon=float(horizon),
        times=times,
        M=np.exp(-p * times) * np.append(sums, sums[-1]),
        sq_bracket=np.append(sq, sq[-1]),
        angle_bracket=np.append(ang, ang[-1] + tail),
        Y=pop,
        vhat=np.append(v, v[-1]),
    )


def embed_martingale(
    p: float,
    law: StepLaw,
    horizon: float,
    rng: np.random.Generator,
    bracket_stop: float | None = None,
    pop_cap: int = POP_CAP,
) -> MartingalePath:
    """Couple a Yule clock with a reinforced walk and record the martingale.

    With ``bracket_stop`` the run ends at the first birth after which <M>
    reaches that level (or at ``horizon``, whichever is earlier).  Exceeding
    ``pop_cap`` raises instead of silently truncating.
    """
    if not 0.0 < p < 0.5:
        raise UsageError(f"the embedded martingale needs p in (0, 1/2), got {p}")
    if not law.is_centered:
        raise UsageError(f"step law {law.name} is not centered (mean {law.mean})")
    if not horizon >= 0:
        raise UsageError(f"horizon must be non-negative, got {horizon}")
    clock, walk_rng = rng.spawn(2)
    grower = WalkGrower(p, law, walk_rng)
    grower.extend(1)
    chunks = _birth_chunks(clock)
    pieces = [np.zeros(1)]
    total = 1
    stop = float(horizon)
    while pieces[-1][-1] <= stop:
        if total >= pop_cap:
            raise HorizonError(
                f"population cap {pop_cap} reached at t={pieces[-1][-1]:.3f} before the horizon {stop}"
            )
        pieces.append(next(chunks))
        total += pieces[-1].size
        grower.extend(pieces[-1].size)
        if bracket_stop is not None:
            times = np.concatenate(pieces)
            ang = angle_bracket_values(p, law.variance, times, grower.steps)
            hit = np.flatnonzero(ang >= bracket_stop)
            if hit.size:
                stop = min(stop, float(times[hit[0]]))
    times = np.concatenate(pieces)
    times = times[times <= stop]
    if times.size > pop_cap:
        raise HorizonError(f"population cap {pop_cap} exceeded before the horizon {stop}")
    return _assemble(p, law.variance, times, grower.steps, stop)


def invert_time_change(mp: MartingalePath, target):
    """T = <M>^{-1}, evaluated in closed form on the constant-population pieces."""
    a = np.asarray(target, dtype=float)
    top = mp.angle_bracket[-1]
    if np.any(a < 0):
        raise UsageError("time-change targets must be non-negative")
    if np.any(a > top):
        raise HorizonError(
            f"target {np.max(a):.6g} exceeds <M>(horizon) = {top:.6g}",
            required_horizon=_required_horizon(mp, float(np.max(a))),
        )
    p = mp.p
    nodes = mp.angle_bracket[:-1]  # values at birth times
    j = np.clip(np.searchsorted(nodes, a, side="right") - 1, 0, nodes.size - 1)
    tj = mp.jump_times[j]
    rates = mp._segment_rates()[j]
    frac = 2.0 * p * (a - nodes[j]) * np.exp(2.0 * p * tj) / rates
    t = tj - np.log1p(-np.minimum(frac, 1.0)) / (2.0 * p)
    upper = np.append(mp.jump_times[1:], mp.horizon)[j]
    t = np.clip(t, tj, upper)
    return float(t) if t.ndim == 0 else t


def _required_horizon(mp: MartingalePath, level: float) -> float:
    p = mp.p
    tau = max(mp.tau_hat, 1e-12)
    return math.log(max((1.0 - 2.0 * p) * level / tau, 1.0)) / (1.0 - 2.0 * p) + 1.0


def rescaled_martingale(mp: MartingalePath, n: int, t_grid) -> ProcessPath:
    """N_n(t) = M(T(n t)) / sqrt(n) on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    need = n * float(np.max(t))
    if need > mp.angle_bracket[-1]:
        raise HorizonError(
            f"<M>(horizon)={mp.angle_bracket[-1]:.6g} < n*max(t)={need:.6g}; "
            f"rerun with horizon >= {_required_horizon(mp, need):.2f}",
            required_horizon=_required_horizon(mp, need),
        )
    when = np.atleast_1d(invert_time_change(mp, n * t))
    values = mp.state_at(when)["M"] / math.sqrt(n)
    return ProcessPath(t, values)
