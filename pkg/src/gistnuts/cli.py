"""Command-line front end.

    python -m gistnuts sample  --model funnel --dim 10 --mode adaptive --h 0.5 --M 10 --a-min 0.7 --out run/
    python -m gistnuts scaling --dims 64 256 1024 4096 --chains 200 --out scaling/

Options given in a ``--config`` JSON file take precedence over flags.
Exit codes: 0 success, 1 configuration error, 2 runtime failure.

Output files and column order
-----------------------------
sample:
    draws.csv         chain, draw, x0, ..., x{d-1}          (x0 is omega for the funnel)
    transitions.csv   chain, draw, accepted, k_used, k_tilde, k_tilde_star, orbit_len, dh_gap
    summary.json      see ``summarize``
scaling:
    scaling.csv       d, regime, mean_step, step_of_mean_k, n_chains, n_transitions
    scaling_fit.json  per-regime log-log slope and intercept of mean_step against d

Seeding: chain i of an n-chain sample run uses ``chain_rng(seed, i, n)``.  A
scaling cell (d, regime) spawns its chains from ``SeedSequence([seed, d, r])``
with r = 0 for the mode, 1 for stationary and 2 for burn-in.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .model import MODELS, get_model, std_normal
from .sampler import AdaptiveConfig, ChainResult, FixedConfig, chain_rng, run_chain

logger = logging.getLogger(__name__)

DRAW_FMT = "%.17g"
TRANSITION_COLUMNS = ("accepted", "k_used", "k_tilde", "k_tilde_star", "orbit_len", "dh_gap")
SCALING_COLUMNS = ("d", "regime", "mean_step", "step_of_mean_k", "n_chains", "n_transitions")
REGIMES = ("mode", "stationary", "burnin")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    model: str = "std_normal"
    dim: int = 1
    mode: str = "adaptive"
    h: float = 0.5
    R: int = 1
    M: int = 10
    a_min: float | None = 0.7
    k_cap: int = 10
    draws: int = 1000
    chains: int = 1
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if self.mode not in ("fixed", "adaptive"):
            raise ConfigError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.mode == "adaptive" and self.a_min is None:
            raise ConfigError("adaptive mode requires a_min")
        for name in ("dim", "draws", "chains", "workers", "R"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.M < 0:
            raise ConfigError("M must be >= 0")
        try:
            self.sampler_config()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def sampler_config(self) -> AdaptiveConfig | FixedConfig:
        if self.mode == "adaptive":
            return AdaptiveConfig(self.h, self.M, self.a_min, self.k_cap)
        return FixedConfig(self.h, self.M, self.R)


PRESETS = {
    "funnel-fixed": dict(model="funnel", dim=10, mode="fixed", h=0.25, M=10, R=1, draws=250_000),
    "funnel-adaptive": dict(model="funnel", dim=10, mode="adaptive", h=0.5, M=10, a_min=0.7, draws=250_000),
}


# --- sample ----------------------------------------------------------------------


def _map(fn, items, workers):
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sample_chains(cfg: ChainConfig) -> list[ChainResult]:
    model = get_model(cfg.model, cfg.dim)
    scfg = cfg.sampler_config()

    def one(i):
        return run_chain(model, scfg, cfg.draws, chain_rng(cfg.seed, i, cfg.chains), mode=cfg.mode)

    return _map(one, range(cfg.chains), cfg.workers)


def summarize(cfg: ChainConfig, results: list[ChainResult], wall_time: float) -> dict:
    records = np.concatenate([r.records for r in results])
    lengths, counts = np.unique(records["orbit_len"], return_counts=True)
    return {
        "config": asdict(cfg),
        "n_draws": int(records.size),
        "acceptance_rate": float(records["accepted"].mean()),
        "mean_k_used": float(records["k_used"].mean()),
        "orbit_length_histogram": {str(int(n)): int(c) for n, c in zip(lengths, counts)},
        "wall_time_s": wall_time,
    }


def write_draws(path: Path, results: list[ChainResult]) -> None:
    dim = results[0].draws.shape[1]
    header = ",".join(["chain", "draw"] + [f"x{j}" for j in range(dim)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for c, res in enumerate(results):
            idx = np.arange(res.draws.shape[0])
            block = np.column_stack([np.full_like(idx, c), idx, res.draws])
            np.savetxt(fh, block, fmt=["%d", "%d"] + [DRAW_FMT] * dim, delimiter=",")


def write_transitions(path: Path, results: list[ChainResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("chain", "draw") + TRANSITION_COLUMNS)
        for c, res in enumerate(results):
            for n, rec in enumerate(res.records):
                w.writerow([c, n, int(rec["accepted"]), *(int(rec[k]) for k in TRANSITION_COLUMNS[1:5]),
                            repr(float(rec["dh_gap"]))])


def read_draws(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``draws.csv`` into (chain index array, draw matrix)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(int), data[:, 2:]


def read_summary(path) -> dict:
    with open(path) as fh:
        summary = json.load(fh)
    missing = {"acceptance_rate", "mean_k_used", "orbit_length_histogram", "wall_time_s"} - set(summary)
    if missing:
        raise ValueError(f"summary is missing {sorted(missing)}")
    summary["orbit_length_histogram"] = {int(k): v for k, v in summary["orbit_length_histogram"].items()}
    return summary


def cmd_sample(cfg: ChainConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = sample_chains(cfg)
    summary = summarize(cfg, results, time.perf_counter() - t0)
    write_draws(out / "draws.csv", results)
    write_transitions(out / "transitions.csv", results)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


# --- scaling ----------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingConfig:
    dims: tuple[int, ...] = (64, 256, 1024, 4096)
    h: float = 0.5
    M: int = 10
    a_min: float = 0.7
    k_cap: int = 10
    chains: int = 200
    window: int = 3
    burnin: int = 50
    regimes: tuple[str, ...] = ("mode", "stationary")
    seed: int = 0
    workers: int = 1
    out: str = "scaling"

    def __post_init__(self):
        if not self.dims or any(d < 1 for d in self.dims):
            raise ConfigError("dims must be a nonempty list of positive integers")
        bad = set(self.regimes) - set(REGIMES)
        if bad or not self.regimes:
            raise ConfigError(f"regimes must be drawn from {REGIMES}, got {list(self.regimes)}")
        for name in ("chains", "window", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.burnin < 0:
            raise ConfigError("burnin must be >= 0")
        try:
            AdaptiveConfig(self.h, self.M, self.a_min, self.k_cap)
        except ValueError as err:
            raise ConfigError(str(err)) from err


def scaling_cell(cfg: ScalingConfig, d: int, regime: str) -> dict:
    """Realized fine step sizes of short adaptive chains on a d-dim normal.

    ``mode`` starts at the origin and ``stationary`` at an exact normal draw;
    both measure the first ``window`` transitions.  ``burnin`` starts at the
    origin and measures the ``window`` transitions after ``burnin`` steps.
    """
    model = std_normal(d)
    acfg = AdaptiveConfig(cfg.h, cfg.M, cfg.a_min, cfg.k_cap)
    seeds = np.random.SeedSequence([cfg.seed, d, REGIMES.index(regime)]).spawn(cfg.chains)
    skip = cfg.burnin if regime == "burnin" else 0

    def one(ss):
        rng = np.random.default_rng(ss)
        theta0 = rng.standard_normal(d) if regime == "stationary" else np.zeros(d)
        res = run_chain(model, acfg, skip + cfg.window, rng, theta0=theta0)
        return res.records["k_used"][skip:]

    k = np.concatenate(_map(one, seeds, cfg.workers)).astype(np.float64)
    return {
        "d": d,
        "regime": regime,
        "mean_step": float(np.mean(cfg.h * np.exp2(-k))),
        "step_of_mean_k": float(cfg.h * np.exp2(-k.mean())),
        "n_chains": cfg.chains,
        "n_transitions": cfg.window,
    }


def fit_slopes(rows: list[dict], column: str = "mean_step") -> dict:
    """Least-squares slope of log(column) on log(d), per regime.  Regimes
    with fewer than two distinct dimensions are skipped."""
    fits = {}
    for regime in dict.fromkeys(r["regime"] for r in rows):
        sel = [r for r in rows if r["regime"] == regime]
        d = np.array([r["d"] for r in sel], dtype=np.float64)
        if np.unique(d).size < 2:
            continue
        slope, intercept = np.polyfit(np.log(d), np.log([r[column] for r in sel]), 1)
        fits[regime] = {"slope": float(slope), "intercept": float(intercept), "column": column}
    return fits


def cmd_scaling(cfg: ScalingConfig) -> tuple[list[dict], dict]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for d in cfg.dims:
        for regime in cfg.regimes:
            t0 = time.perf_counter()
            rows.append(scaling_cell(cfg, d, regime))
            logger.info("d=%d %s: mean_step=%.4g (%.1fs)", d, regime, rows[-1]["mean_step"],
                        time.perf_counter() - t0)
    with open(out / "scaling.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SCALING_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    fits = {"mean_step": fit_slopes(rows, "mean_step"), "step_of_mean_k": fit_slopes(rows, "step_of_mean_k")}
    with open(out / "scaling_fit.json", "w") as fh:
        json.dump({"config": asdict(cfg), "fits": fits}, fh, indent=2)
    return rows, fits


# --- argument handling ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gistnuts", description="Step-size-adaptive NUTS sampler")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="run chains and write draws")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--dim", type=int)
    s.add_argument("--mode", choices=("fixed", "adaptive"))
    s.add_argument("--h", type=float)
    s.add_argument("--R", type=int)
    s.add_argument("--M", type=int)
    s.add_argument("--a-min", dest="a_min", type=float)
    s.add_argument("--k-cap", dest="k_cap", type=int)
    s.add_argument("--draws", type=int)
    s.add_argument("--chains", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.add_argument("--config", help="JSON file whose keys override flags")

    c = sub.add_parser("scaling", help="adaptive step size against dimension on a standard normal")
    c.add_argument("--dims", type=int, nargs="+")
    c.add_argument("--h", type=float)
    c.add_argument("--M", type=int)
    c.add_argument("--a-min", dest="a_min", type=float)
    c.add_argument("--k-cap", dest="k_cap", type=int)
    c.add_argument("--chains", type=int)
    c.add_argument("--window", type=int, help="transitions averaged per chain")
    c.add_argument("--burnin", type=int, help="steps before the window in the burnin regime")
    c.add_argument("--regimes", nargs="+", choices=REGIMES)
    c.add_argument("--seed", type=int)
    c.add_argument("--workers", type=int)
    c.add_argument("--out")
    c.add_argument("--config", help="JSON file whose keys override flags")
    return p


def _merge(cls, args: argparse.Namespace, base: dict | None = None):
    names = {f.name for f in fields(cls)}
    values = dict(base or {})
    values.update({k: v for k, v in vars(args).items() if k in names and v is not None})
    if args.config:
        try:
            with open(args.config) as fh:
                override = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(override, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(override) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(override)
    for key in ("dims", "regimes"):
        if key in values:
            values[key] = tuple(values[key])
    try:
        return replace(cls(), **values)
    except TypeError as err:
        raise ConfigError(str(err)) from err


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sample":
            cfg = _merge(ChainConfig, args, PRESETS.get(args.preset))
        else:
            cfg = _merge(ScalingConfig, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        if args.command == "sample":
            summary = cmd_sample(cfg)
            print(json.dumps({k: summary[k] for k in ("n_draws", "acceptance_rate", "mean_k_used", "wall_time_s")}))
        else:
            _, fits = cmd_scaling(cfg)
            print(json.dumps(fits))
    except Exception as err:  # noqa: BLE001 - report and map to the runtime exit code
        logger.debug("run failed", exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0
