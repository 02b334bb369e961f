"""Preset verification suites.

Each preset runs one family of checks on fresh simulations and returns a
list of :class:`StatReport`.  Presets are deterministic in ``seed`` and do
not depend on the number of threads.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import distributions, nrbm, walk, yule
from .errors import HorizonError, UsageError
from .rng import derive_seed, map_replicas, replica_rng, stream
from .stats import (
    StatReport,
    correlation,
    empirical_covariance,
    ks_test,
    ks_two_sample,
    lil_statistic,
    mean_var_ci,
    scaling_exponent,
    cauchy_l2,
)

P_DIFFUSIVE = 0.25
P_SUPER = 0.75


def covariance_target(p: float, s: float, t: float) -> float:
    return nrbm.covariance(p, s, t)


# ---------------------------------------------------------------------------
# presets


def preset_covariance(seed: int, replicas: int = 100_000, threads: int | None = 1) -> list[StatReport]:
    p = P_DIFFUSIVE
    grid = np.array([0.5, 1.0, 2.0])
    paths = np.array(map_replicas(lambda g, r: nrbm.sample_exact(p, grid, g).values, seed, replicas, threads))
    cov, se = empirical_covariance(paths[:, 1], paths[:, 2])
    _, var, _, se_var = mean_var_ci(paths[:, 1])
    reports = [
        StatReport.moment("nrbm_cov(1,2)", cov, se, covariance_target(p, 1.0, 2.0)),
        StatReport.moment("nrbm_var(1)", var, se_var, covariance_target(p, 1.0, 1.0)),
    ]
    cov, se = empirical_covariance(paths[:, 0], paths[:, 1])
    reports.append(StatReport.moment("nrbm_cov(0.5,1)", cov, se, covariance_target(p, 0.5, 1.0)))
    # increments are correlated, unlike Brownian motion
    cov, se = empirical_covariance(paths[:, 2] - paths[:, 1], paths[:, 1])
    target = covariance_target(p, 1.0, 2.0) - covariance_target(p, 1.0, 1.0)
    reports.append(StatReport.moment("nrbm_increment_cov", cov, se, target))
    rng = replica_rng(derive_seed(seed, 99), 0)
    for q in (0.1, 0.3, 0.45):
        triples = np.column_stack([rng.uniform(0.01, 10, 100), rng.uniform(0.01, 10, 100), rng.uniform(0.1, 10, 100)])
        reports.extend(nrbm.kernel_invariance_checks(q, triples))
    return reports


def preset_samplers(seed: int, replicas: int = 5000, threads: int | None = 1, n_seeds: int = 5) -> list[StatReport]:
    p = P_DIFFUSIVE
    grid = np.array([1.0])
    samplers = {
        "exact": lambda g: nrbm.sample_exact(p, grid, g).values[0],
        "cholesky": lambda g: nrbm.sample_cholesky(p, grid, g).values[0],
        "euler": lambda g: nrbm.sample_euler(p, grid, g, t0=1e-4, substeps=10_000).values[0],
    }
    reports = []
    for k in range(n_seeds):
        draws = {
            name: np.array(map_replicas(lambda g, r, f=fn: f(g), derive_seed(seed, k, i), replicas, threads))
            for i, (name, fn) in enumerate(samplers.items())
        }
        for a, b in (("exact", "cholesky"), ("exact", "euler"), ("cholesky", "euler")):
            d, pv = ks_two_sample(draws[a], draws[b])
            reports.append(StatReport.test(f"ks_{a}_vs_{b}[seed{k}]", d, pv))
    return reports


def _walk_endpoints(law, seed, replicas, threads, n=10_000, p=P_DIFFUSIVE):
    ens = walk.walk_ensemble(p, n, law, replicas, seed, checkpoints=[n // 2, n], threads=threads)
    return ens["S_hat"]


def _fclt_reports(tag: str, sums: np.ndarray, n: int, p: float, sigma2: float) -> list[StatReport]:
    end = sums[:, 1] / math.sqrt(n * sigma2)
    _, var, _, se_var = mean_var_ci(end)
    target = 1.0 / (1.0 - 2.0 * p)
    reports = [StatReport.absolute(f"{tag}_var(S(n)/sqrt(n))", var, target, 0.05 * target, se_var)]
    d, pv = ks_test(end / math.sqrt(target), "normal")
    reports.append(StatReport.test(f"{tag}_ks_normal", d, pv))
    cov, se = empirical_covariance(sums[:, 0] / math.sqrt(n * sigma2), end)
    reports.append(StatReport.moment(f"{tag}_cov(S(n/2),S(n))/n", cov, se, covariance_target(p, 0.5, 1.0)))
    return reports


def preset_fclt(seed: int, replicas: int = 10_000, threads: int | None = 1) -> list[StatReport]:
    n = 10_000
    sums = _walk_endpoints(distributions.rademacher(), seed, replicas, threads, n)
    return _fclt_reports("rademacher", sums, n, P_DIFFUSIVE, 1.0)


def preset_universality(seed: int, replicas: int = 10_000, threads: int | None = 1) -> list[StatReport]:
    n = 10_000
    law = distributions.uniform(-math.sqrt(3.0), math.sqrt(3.0))
    sums_u = _walk_endpoints(law, derive_seed(seed, 1), replicas, threads, n)
    reports = _fclt_reports("uniform", sums_u, n, P_DIFFUSIVE, law.variance)
    sums_r = _walk_endpoints(distributions.rademacher(), derive_seed(seed, 2), replicas, threads, n)
    d, pv = ks_two_sample(sums_r[:, 1] / math.sqrt(n), sums_u[:, 1] / math.sqrt(n * law.variance))
    reports.append(StatReport.test("ks_rademacher_vs_uniform", d, pv))
    return reports


def preset_martingale(seed: int, replicas: int = 20_000, threads: int | None = 1) -> list[StatReport]:
    p, t = P_DIFFUSIVE, 2.0
    law = distributions.rademacher()

    def one(g, _r):
        mp = yule.embed_martingale(p, law, t, g)
        mid = mp.state_at(1.0)["M"]
        return mp.M[-1], mp.sq_bracket[-1], mp.angle_bracket[-1], float(mid)

    rows = np.array(map_replicas(one, seed, replicas, threads))
    m, sq, ang, mid = rows.T
    closed = law.variance / (1.0 - 2.0 * p) * math.expm1((1.0 - 2.0 * p) * t)
    mean_m, _, se_m, _ = mean_var_ci(m)
    reports = [StatReport.moment("E[M(2)]", mean_m, se_m, 0.0)]
    mean_sq, _, se_sq, _ = mean_var_ci(sq)
    reports.append(StatReport.moment("E[[M](2)]", mean_sq, se_sq, closed))
    diff_mean, _, diff_se, _ = mean_var_ci(ang - sq)
    reports.append(StatReport.moment("E[<M>(2)] - E[[M](2)]", diff_mean, diff_se, 0.0))
    mean_ang, _, se_ang, _ = mean_var_ci(ang)
    reports.append(StatReport.moment("E[<M>(2)]", mean_ang, se_ang, closed))
    mean_m2, _, se_m2, _ = mean_var_ci(m**2)
    reports.append(StatReport.moment("E[M(2)^2]", mean_m2, se_m2, closed + law.variance))
    mean_inc, _, se_inc, _ = mean_var_ci((m - mid) * mid)
    reports.append(StatReport.moment("E[(M(2)-M(1)) M(1)]", mean_inc, se_inc, 0.0))
    return reports


def preset_yule(seed: int, replicas: int = 10_000, threads: int | None = 1) -> list[StatReport]:
    def one(g, _r):
        tr = yule.simulate_yule(g, horizon=7.0)
        return tr.final_size * math.exp(-7.0), float(tr.population(3.0))

    rows = np.array(map_replicas(one, seed, replicas, threads))
    d, pv = ks_test(rows[:, 0], "exp")
    mean, _, se, _ = mean_var_ci(rows[:, 1])
    return [StatReport.test("ks_exp(-7)Y_7_vs_Exp(1)", d, pv), StatReport.moment("E[Y_3]", mean, se, math.exp(3.0))]


def preset_superdiffusive(seed: int, replicas: int = 5000, threads: int | None = 1) -> list[StatReport]:
    law = distributions.rademacher()
    fit_cps = [2**k for k in range(10, 15)]
    reports = []
    ensembles = {}
    for i, (p, target) in enumerate(((P_DIFFUSIVE, 1.0), (P_SUPER, 2.0 * P_SUPER))):
        cps = sorted(set(fit_cps) | {2**k for k in range(8, 14)})
        ens = walk.walk_ensemble(p, 2**14, law, replicas, derive_seed(seed, i), checkpoints=cps, threads=threads)
        ensembles[p] = ens
        cols = [cps.index(c) for c in fit_cps]
        slope, se = scaling_exponent(fit_cps, ens["S_hat"][:, cols])
        reports.append(StatReport.absolute(f"scaling_slope[p={p}]", slope, target, 0.1, se))
    ens = ensembles[P_SUPER]
    cps = list(ens["checkpoints"])
    nj = [2**8, 2**10, 2**12]
    a = ens["S_hat"][:, [cps.index(n) for n in nj]]
    b = ens["S_hat"][:, [cps.index(2 * n) for n in nj]]
    d, _ = cauchy_l2(P_SUPER, a, b, nj)
    ok = bool(np.all(np.diff(d) < 0) and d[-1] < d[0] / 2)
    reports.append(StatReport.check("cauchy_L2_decreasing[p=0.75]", ok, float(d[-1] / d[0]), 0.5))
    return reports


def preset_bridge(seed: int, replicas: int = 100_000, threads: int | None = 1) -> list[StatReport]:
    p = P_DIFFUSIVE
    grid = np.array([0.5, 1.0])

    def one(g, _r):
        path, b1 = nrbm.bridge_sample(p, grid, 0.0, g, with_endpoint=True)
        return path.values[0], b1

    rows = np.array(map_replicas(one, seed, replicas, threads))
    r, se = correlation(rows[:, 0], rows[:, 1])
    reports = [StatReport.moment("corr(bridge(1/2), B(1))", r, se, 0.0)]
    x = 1.3
    pinned = map_replicas(lambda g, _r: nrbm.bridge_sample(p, grid, x, g).values[-1], derive_seed(seed, 1), 1000, threads)
    exact = all(v == x for v in pinned)
    reports.append(StatReport.check("bridge_terminal_pinned", exact, float(np.max(np.abs(np.array(pinned) - x))), 0.0))
    return reports


def preset_ou(seed: int, replicas: int = 100_000, threads: int | None = 1) -> list[StatReport]:
    p = P_DIFFUSIVE
    u = np.array([0.0, 1.0, 2.0])
    grid = nrbm.exponential_grid(u)
    rows = np.array(
        map_replicas(lambda g, _r: nrbm.ou_transform(nrbm.sample_exact(p, grid, g)).values, seed, replicas, threads)
    )
    stationary = 1.0 / (1.0 - 2.0 * p)
    reports = []
    for col in (0, 2):
        _, var, _, se = mean_var_ci(rows[:, col])
        reports.append(StatReport.moment(f"var(U({u[col]:g}))", var, se, stationary))
    cov, se = empirical_covariance(rows[:, 0], rows[:, 1])
    reports.append(StatReport.moment("cov(U(0),U(1))", cov, se, math.exp(p - 0.5) / (1.0 - 2.0 * p)))
    return reports


def preset_identities(seed: int, replicas: int = 1000, threads: int | None = 1) -> list[StatReport]:
    law = distributions.rademacher()
    n = 500
    bad_total = bad_sum = 0
    for p in (0.1, 0.25, 0.5, 0.75, 0.9):
        for r in range(replicas):
            path = walk.simulate_walk(walk.WalkParams(p, n, law), replica_rng(derive_seed(seed, 7), r))
            counts = walk.repetition_counts(path)
            bad_total += int(counts.sum() != n)
            bad_sum += int(np.dot(counts, path.fresh) != path.sums[-1])
    reports = [
        StatReport.check("sum_r_equals_n", bad_total == 0, bad_total, 0),
        StatReport.check("S(n)_equals_sum_r_X", bad_sum == 0, bad_sum, 0),
    ]
    # non-lattice steps: the identity holds exactly in rational arithmetic
    ulaw = distributions.uniform(-1.0, 1.0)
    exact_fail = 0
    for r in range(50):
        path = walk.simulate_walk(walk.WalkParams(0.5, 200, ulaw), replica_rng(derive_seed(seed, 8), r))
        counts = walk.repetition_counts(path)
        lhs = sum(Fraction(x) for x in path.steps)
        rhs = sum(int(c) * Fraction(x) for c, x in zip(counts, path.fresh) if c)
        exact_fail += int(lhs != rhs)
    reports.append(StatReport.check("S(n)_equals_sum_r_X[uniform,rational]", exact_fail == 0, exact_fail, 0))
    worst = 0.0
    for r in range(replicas):
        path = walk.simulate_walk(walk.WalkParams(0.25, n, ulaw), replica_rng(derive_seed(seed, 9), r))
        sums_b, residual = walk.truncated_decomposition(path, 0.5)
        centered = path.sums - np.arange(1, n + 1) * ulaw.mean
        worst = max(worst, float(np.max(np.abs(centered - (sums_b + residual)))))
    # one rounding in forming the residual, at most half an ulp of |S| <= n
    reports.append(StatReport.absolute("truncated_decomposition_error", worst, 0.0, 2 * n * np.finfo(float).eps))
    return reports


def preset_lil(seed: int, replicas: int = 100, threads: int | None = 1) -> list[StatReport]:
    p = P_DIFFUSIVE
    grid = nrbm.log_grid(200, 10.0, 1e6)
    stats_ = map_replicas(lambda g, _r: lil_statistic(grid, nrbm.sample_exact(p, grid, g).values), seed, replicas, threads)
    med = float(np.median(stats_))
    const = 1.0 / math.sqrt(1.0 - 2.0 * p)
    centre = 0.9 * const  # band [0.5, 1.3] * const
    report = StatReport.absolute("lil_median_sup", med, centre, 0.4 * const)
    return [report.as_warning()]


@dataclass(frozen=True)
class Preset:
    run: Callable[..., list[StatReport]]
    replicas: int
    min_replicas: int = 100
    warn_only: bool = False


PRESETS: dict[str, Preset] = {
    "covariance": Preset(preset_covariance, 100_000),
    "samplers": Preset(preset_samplers, 5000),
    "fclt": Preset(preset_fclt, 10_000),
    "universality": Preset(preset_universality, 10_000),
    "martingale": Preset(preset_martingale, 20_000),
    "yule": Preset(preset_yule, 10_000),
    "superdiffusive": Preset(preset_superdiffusive, 5000),
    "bridge": Preset(preset_bridge, 100_000),
    "ou": Preset(preset_ou, 100_000),
    "identities": Preset(preset_identities, 1000, min_replicas=1),
    "lil": Preset(preset_lil, 100, min_replicas=30, warn_only=True),
}


def run_preset(name: str, seed: int, replicas: int | None = None, threads: int | None = 1) -> tuple[list[StatReport], float]:
    """Run one preset (or ``"all"``); returns the reports and elapsed seconds."""
    if name == "all":
        reports, elapsed = [], 0.0
        for key in PRESETS:
            rep, sec = run_preset(key, seed, replicas, threads)
            reports.extend(rep)
            elapsed += sec
        return reports, elapsed
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; expected one of {sorted(PRESETS) + ['all']}")
    preset = PRESETS[name]
    n = preset.replicas if replicas is None else int(replicas)
    if n < preset.min_replicas:
        raise UsageError(f"preset {name} needs at least {preset.min_replicas} replicas, got {n}")
    start = time.perf_counter()
    reports = preset.run(seed, n, threads)
    if preset.warn_only:
        reports = [r.as_warning() for r in reports]
    return reports, time.perf_counter() - start


def rescaled_martingale_samples(
    p: float, law, n: int, t_grid, seed: int, replicas: int, horizon: float = 14.0, threads: int | None = 1
) -> np.ndarray:
    """N_n on ``t_grid`` for each replica.

    A replica whose horizon is too short is rerun on the same streams with
    the suggested longer horizon, which extends the same trajectory.  A
    replica that would outgrow the Yule population cap first (a clock with
    a very late first birth) is redrawn from the derived stream
    ``(seed, r, k)`` and a RuntimeWarning reports it.
    """
    t = np.asarray(t_grid, dtype=float)
    level = n * float(np.max(t))

    def one(_g, r):
        h, attempt = horizon, 0
        while True:
            rng = stream(seed, r, attempt) if attempt else replica_rng(seed, r)
            try:
                mp = yule.embed_martingale(p, law, h, rng, bracket_stop=level)
                return yule.rescaled_martingale(mp, n, t).values
            except HorizonError as exc:
                if exc.required_horizon is None:
                    attempt += 1
                    h = horizon
                    warnings.warn(
                        f"replica {r} exceeded the Yule population cap; redrawn (attempt {attempt})",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                else:
                    h = max(exc.required_horizon, h + 1.0)

    return np.array(map_replicas(one, seed, replicas, threads))
