"""Deterministic, splittable random streams.

Every Monte Carlo replica owns one Philox (counter-based) stream keyed on
``(master_seed, replica)``.  Streams never overlap, so replicas can be
generated in any order or in parallel and the ensemble is still identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

SEED_ENV = "RW_SEED"


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` and the spawn key ``key``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return stream(seed, replica)


def env_seed(default: int | None = None) -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return default
    return int(raw)


def map_replicas(
    fn: Callable[[np.random.Generator, int], T],
    seed: int,
    replicas: int | Sequence[int],
    threads: int | None = 1,
) -> list[T]:
    """Evaluate ``fn(rng, r)`` for each replica index, results in replica order.

    The output does not depend on ``threads``; each replica only ever sees
    its own stream.
    """
    indices = range(replicas) if isinstance(replicas, int) else list(replicas)

    def run(r: int) -> T:
        return fn(replica_rng(seed, r), r)

    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1:
        return [run(r) for r in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, indices))


def derive_seed(seed: int, *key: int) -> int:
    """A new master seed, independent of ``seed``'s own replica streams."""
    return int(np.random.SeedSequence(seed, spawn_key=(2**32 - 1, *key)).generate_state(2, np.uint64)[0] >> 1)
