"""Command-line experiment runner.

Configs are flat ``key = value`` files with optional ``[section]`` headers
(sections only group keys; all keys share one namespace)::

    [run]
    experiment = walk-ensemble
    seed = 3
    replicas = 500

    [walk]
    p = 0.25
    n = 1000
    law = kind=uniform a=-1 b=1
    checkpoints = [100, 500, 1000]

Exit codes: 0 all verdicts pass, 1 a statistical check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import distributions, nrbm, verify, walk, yule
from .errors import DomainError, UsageError
from .rng import env_seed, map_replicas
from .stats import FAIL, StatReport, empirical_covariance, mean_var_ci

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COMMON_KEYS = {"experiment", "seed", "replicas", "output_dir", "threads"}
EXPERIMENT_KEYS = {
    "walk-ensemble": {"p", "n", "law", "checkpoints"},
    "nrbm-paths": {"process", "p", "grid", "sampler", "t0", "substeps"},
    "yule-martingale": {"process", "p", "law", "horizon", "points"},
    "verify": {"preset"},
}
DEFAULT_REPLICAS = {"walk-ensemble": 1000, "nrbm-paths": 1000, "yule-martingale": 1000}


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# config parsing


def read_config(path: str | os.PathLike) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    flat: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in flat:
                raise UsageError(f"config key {key!r} defined twice")
            flat[key] = value
    return flat


def _list(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("["):
        return [float(v) for v in json.loads(text)]
    return [float(v) for v in text.replace(",", " ").split()]


def parse_grid(text: str) -> np.ndarray:
    """``uniform COUNT START STOP``, ``log COUNT START STOP``, ``list a,b,...`` or ``[a, b]``."""
    parts = text.split(None, 1)
    kind = parts[0].lower() if parts else ""
    try:
        if kind in ("uniform", "log"):
            count, start, stop = parts[1].split()
            build = nrbm.uniform_grid if kind == "uniform" else nrbm.log_grid
            return build(int(count), float(start), float(stop))
        if kind == "list":
            return nrbm.make_grid(_list(parts[1]))
        return nrbm.make_grid(_list(text))
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad grid spec {text!r}: {exc}") from exc


class Config:
    """Validated experiment settings."""

    def __init__(self, raw: dict[str, str], overrides: dict[str, object] | None = None):
        raw = dict(raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                raw[key] = str(value)
        self.experiment = raw.get("experiment", "verify" if "preset" in raw else None)
        if self.experiment not in EXPERIMENT_KEYS:
            raise UsageError(f"unknown or missing experiment {self.experiment!r}; expected one of {sorted(EXPERIMENT_KEYS)}")
        allowed = COMMON_KEYS | EXPERIMENT_KEYS[self.experiment]
        for key in raw:
            if key not in allowed:
                raise UsageError(f"unknown config key {key!r} for experiment {self.experiment}")
        self.raw = raw
        try:
            self.seed = int(raw.get("seed", 0))
            self.replicas = int(raw["replicas"]) if "replicas" in raw else None
            self.threads = int(raw["threads"]) if "threads" in raw else None
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if self.seed < 0:
            raise UsageError("seed must be non-negative")
        self.output_dir = Path(raw.get("output_dir", "out"))
        self._validate()

    def _float(self, key, default=None) -> float:
        if key not in self.raw:
            if default is None:
                raise UsageError(f"missing config key {key!r}")
            return default
        try:
            return float(self.raw[key])
        except ValueError as exc:
            raise UsageError(f"{key} must be a number, got {self.raw[key]!r}") from exc

    def _validate(self) -> None:
        exp, raw = self.experiment, self.raw
        if exp == "verify":
            self.preset = raw.get("preset", "all")
            if self.preset != "all" and self.preset not in verify.PRESETS:
                raise UsageError(f"unknown preset {self.preset!r}")
            if self.replicas is not None:
                names = verify.PRESETS if self.preset == "all" else [self.preset]
                for name in names:
                    need = verify.PRESETS[name].min_replicas
                    if self.replicas < need:
                        raise UsageError(f"preset {name} needs at least {need} replicas, got {self.replicas}")
            return
        if self.replicas is None:
            self.replicas = DEFAULT_REPLICAS[exp]
        if self.replicas < 2:
            raise UsageError("replicas must be >= 2")
        self.p = self._float("p")
        if exp == "walk-ensemble":
            walk.check_reinforcement(self.p)
            self.n = int(self._float("n"))
            if self.n < 1:
                raise UsageError("n must be >= 1")
            self.law = distributions.parse_law(raw.get("law", "kind=rademacher"))
            cps = [int(c) for c in _list(raw["checkpoints"])] if "checkpoints" in raw else [self.n]
            if any(c < 1 or c > self.n for c in cps):
                raise UsageError(f"checkpoints must lie in [1, n={self.n}]")
            self.checkpoints = sorted(set(cps))
        elif exp == "nrbm-paths":
            if raw.get("process", "nrbm") != "nrbm":
                raise UsageError("nrbm-paths needs process=nrbm")
            nrbm.check_p(self.p)
            self.grid = parse_grid(raw.get("grid", "uniform 11 0 1"))
            self.sampler = raw.get("sampler", "exact")
            if self.sampler not in ("exact", "cholesky", "euler"):
                raise UsageError(f"unknown sampler {self.sampler!r}")
            self.t0 = self._float("t0", 1e-4)
            self.substeps = int(self._float("substeps", 1000))
            if self.sampler == "euler":
                if not self.t0 > 0:
                    raise DomainError("t0 must be positive")
                positive = self.grid[self.grid > 0]
                if positive.size and self.t0 > positive[0]:
                    raise UsageError("t0 exceeds the first positive grid time")
                if self.substeps < 1:
                    raise UsageError("substeps must be >= 1")
        elif exp == "yule-martingale":
            if raw.get("process", "yule-martingale") != "yule-martingale":
                raise UsageError("yule-martingale needs process=yule-martingale")
            if not 0.0 < self.p < 0.5:
                raise DomainError(f"the embedded martingale needs p in (0, 1/2), got {self.p}")
            self.law = distributions.parse_law(raw.get("law", "kind=rademacher"))
            if not self.law.is_centered:
                raise UsageError("yule-martingale needs a centered step law")
            self.horizon = self._float("horizon")
            if not self.horizon > 0:
                raise UsageError("horizon must be positive")
            self.points = int(self._float("points", 11))
            if self.points < 2:
                raise UsageError("points must be >= 2")


# ---------------------------------------------------------------------------
# experiments


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def run_walk_ensemble(cfg: Config) -> list[StatReport]:
    ens = walk.walk_ensemble(cfg.p, cfg.n, cfg.law, cfg.replicas, cfg.seed, cfg.checkpoints, cfg.threads)
    cps, s, mx = ens["checkpoints"], ens["S_hat"], ens["max_abs_S"]
    rows = ((r, c, s[r, j], mx[r, j]) for r in range(s.shape[0]) for j, c in enumerate(cps))
    _write_csv(cfg.output_dir / "walk_ensemble.csv", ["replica", "checkpoint_n", "S_hat", "max_abs_S"], rows)
    n = int(cps[-1])
    centered = s[:, -1] - n * cfg.law.mean
    mean, var, se_mean, se_var = mean_var_ci(centered)
    exact = walk.exact_variance(cfg.p, n, cfg.law.variance)[-1]
    return [
        StatReport.moment(f"E[S({n}) - n E(X)]", mean, se_mean, 0.0),
        StatReport.moment(f"Var(S({n}))", var, se_var, exact),
    ]


def run_nrbm_paths(cfg: Config) -> list[StatReport]:
    grid = cfg.grid
    if cfg.sampler == "exact":
        fn = lambda g, _r: nrbm.sample_exact(cfg.p, grid, g).values
    elif cfg.sampler == "cholesky":
        fn = lambda g, _r: nrbm.sample_cholesky(cfg.p, grid, g).values
    else:
        fn = lambda g, _r: nrbm.sample_euler(cfg.p, grid, g, cfg.t0, cfg.substeps).values
    vals = np.array(map_replicas(fn, cfg.seed, cfg.replicas, cfg.threads))
    rows = ((r, t, vals[r, j]) for r in range(vals.shape[0]) for j, t in enumerate(grid))
    _write_csv(cfg.output_dir / "nrbm_paths.csv", ["replica", "t", "value"], rows)
    reports = []
    for j, t in enumerate(grid):
        if t > 0:
            _, var, _, se = mean_var_ci(vals[:, j])
            reports.append(StatReport.moment(f"Var(B({t:g}))", var, se, nrbm.covariance(cfg.p, t, t)))
    positive = np.flatnonzero(grid > 0)
    if positive.size >= 2:
        i, j = positive[0], positive[-1]
        cov, se = empirical_covariance(vals[:, i], vals[:, j])
        reports.append(
            StatReport.moment(f"Cov(B({grid[i]:g}),B({grid[j]:g}))", cov, se, nrbm.covariance(cfg.p, grid[i], grid[j]))
        )
    return reports


def run_yule_martingale(cfg: Config) -> list[StatReport]:
    ts = np.linspace(0.0, cfg.horizon, cfg.points)

    def one(g, _r):
        mp = yule.embed_martingale(cfg.p, cfg.law, cfg.horizon, g)
        st = mp.state_at(ts)
        return st["M"], st["sq_bracket"], st["angle_bracket"], st["Y"], mp.tau_hat

    runs = map_replicas(one, cfg.seed, cfg.replicas, cfg.threads)
    rows = (
        (r, t, run[0][k], run[1][k], run[2][k], run[3][k], run[4])
        for r, run in enumerate(runs)
        for k, t in enumerate(ts)
    )
    _write_csv(
        cfg.output_dir / "yule_martingale.csv",
        ["replica", "t", "M", "sq_bracket", "angle_bracket", "Y", "tau_hat"],
        rows,
    )
    m = np.array([run[0][-1] for run in runs])
    sq = np.array([run[1][-1] for run in runs])
    ang = np.array([run[2][-1] for run in runs])
    p, h, s2 = cfg.p, cfg.horizon, cfg.law.variance
    closed = s2 / (1 - 2 * p) * math.expm1((1 - 2 * p) * h)
    reports = []
    for name, data, target in (("E[M(h)]", m, 0.0), ("E[[M](h)]", sq, closed), ("E[<M>(h)-[M](h)]", ang - sq, 0.0)):
        mean, _, se, _ = mean_var_ci(data)
        reports.append(StatReport.moment(name, mean, se, target))
    return reports


def run_verify(cfg: Config) -> list[StatReport]:
    names = list(verify.PRESETS) if cfg.preset == "all" else [cfg.preset]
    reports = []
    for name in names:
        rep, sec = verify.run_preset(name, cfg.seed, cfg.replicas, cfg.threads)
        print(f"== {name} ({sec:.1f} s)")
        for r in rep:
            print("  " + r.line())
        reports.extend(rep)
    return reports


RUNNERS = {
    "walk-ensemble": run_walk_ensemble,
    "nrbm-paths": run_nrbm_paths,
    "yule-martingale": run_yule_martingale,
    "verify": run_verify,
}


def run_experiment(cfg: Config) -> int:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    reports = RUNNERS[cfg.experiment](cfg)
    failed = any(r.verdict == FAIL for r in reports)
    summary = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "passed": not failed,
        "reports": [r.to_dict() for r in reports],
    }
    (cfg.output_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if cfg.experiment != "verify":
        for r in reports:
            print(r.line())
    print(f"{'FAIL' if failed else 'PASS'}: {len(reports)} reports in {time.perf_counter() - start:.1f} s -> {cfg.output_dir}")
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reinforced-walks", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="experiment config file")
    ap.add_argument("--preset", help="run a verification preset (or 'all')")
    ap.add_argument("--seed", type=int, help="master seed (overrides RW_SEED and the config)")
    ap.add_argument("--replicas", type=int, help="override the number of replicas")
    ap.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    ap.add_argument("--out", help="output directory")
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if not args.config and not args.preset:
            raise UsageError("give --config or --preset")
        raw = read_config(args.config) if args.config else {}
        if args.preset:
            if raw.get("experiment", "verify") != "verify":
                raise UsageError("--preset cannot be combined with a non-verify config")
            raw["experiment"] = "verify"
            raw["preset"] = args.preset
        seed = args.seed if args.seed is not None else env_seed()
        threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
        cfg = Config(raw, {"seed": seed, "replicas": args.replicas, "threads": threads, "output_dir": args.out})
        return run_experiment(cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
