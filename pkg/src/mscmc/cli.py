"""Command-line front end: configuration, orchestration, plot-ready output.

Every command takes one JSON config file as its sole positional argument;
flags exist only to override the seed, worker count, and output directory.
Outputs are plain CSV plus a diagnostics JSON, and every run echoes its
config into the output directory so it can be reproduced exactly.

Exit codes: 0 success, 1 engine or numeric error, 2 input or config error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import bounds
from .ar import ArConfig, ArModel
from .baselines import run_rwm, run_single_chain_gibbs
from .engine import (
    CapExceededError,
    WeightError,
    build_initial_distribution,
    coordinate_functions,
    msc_estimate,
    resolve_workers,
)
from .logit import DataFormatError, LogitModel, LogitPosterior, load_heart_dataset
from .rng import derive_stream, sample_polya_gamma

SCHEMA_VERSION = "msc-output-1"

EXIT_OK = 0
EXIT_ENGINE = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """The run configuration is malformed."""


DEFAULTS = {
    "master_seed": 1,
    "n_atoms": 100_000,
    "n_chains": 10_000,
    "excursion_cap": 1_000_000,
    "workers": None,
    "out_dir": "msc-out",
}


def load_config(path: str, overrides: argparse.Namespace) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    merged = {**DEFAULTS, **cfg}
    if overrides.seed is not None:
        merged["master_seed"] = overrides.seed
    if overrides.workers is not None:
        merged["workers"] = overrides.workers
    if overrides.out is not None:
        merged["out_dir"] = overrides.out
    _validate_numeric(merged, "master_seed", int, low=0)
    _validate_numeric(merged, "n_atoms", int, low=1)
    _validate_numeric(merged, "n_chains", int, low=2)
    _validate_numeric(merged, "excursion_cap", int, low=1)
    if merged["workers"] is not None:
        _validate_numeric(merged, "workers", int, low=1)
    return merged


def _validate_numeric(cfg: dict, key: str, kind, low=None, high=None) -> None:
    val = cfg.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"config key {key!r} must be a number (got {val!r})")
    if kind is int and int(val) != val:
        raise ConfigError(f"config key {key!r} must be an integer (got {val!r})")
    cfg[key] = kind(val)
    if low is not None and cfg[key] < low:
        raise ConfigError(f"config key {key!r} must be >= {low}")
    if high is not None and cfg[key] > high:
        raise ConfigError(f"config key {key!r} must be <= {high}")


def _ar_config(cfg: dict) -> ArConfig:
    block = cfg.get("ar", {})
    if not isinstance(block, dict):
        raise ConfigError("config key 'ar' must be an object")
    try:
        return ArConfig(
            rho=float(block.get("rho", 0.9)),
            d=int(block.get("d", 2)),
            h=float(block.get("h", 0.49)),
            r=float(block.get("r", 1.5)),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad AR parameters: {err}") from None


def _logit_posterior(cfg: dict) -> tuple[LogitPosterior, float]:
    block = cfg.get("logit", {})
    if not isinstance(block, dict):
        raise ConfigError("config key 'logit' must be an object")
    data_path = block.get("data_path")
    if not data_path:
        raise ConfigError("config key 'logit.data_path' is required")
    sigma_scale = float(block.get("sigma_scale", 10.0))
    h = float(block.get("h", 0.49))
    r = float(block.get("r", 1.001))
    standardize = bool(block.get("standardize", False))
    if sigma_scale <= 0:
        raise ConfigError("logit.sigma_scale must be positive")
    try:
        dataset = load_heart_dataset(data_path, standardize=standardize, verbose=True)
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {data_path}") from None
    try:
        posterior = LogitPosterior(dataset, sigma_scale * np.eye(dataset.d), h=h)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return posterior, r


def _ensure_out(cfg: dict) -> str:
    out = cfg["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(cfg: dict, out: str) -> None:
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_diagnostics(out: str, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(os.path.join(out, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_plan(cfg: dict) -> int:
    block = cfg.get("plan", {})
    eps = float(block.get("eps", 0.1))
    delta = float(block.get("delta", 0.1))
    dims = block.get("dims", [1, 5, 10, 15, 20, 25, 30])
    ar = cfg.get("ar", {})
    rho = float(ar.get("rho", 0.9))
    h = float(ar.get("h", 0.49))
    r = float(ar.get("r", 1.5))
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ConfigError("plan.eps and plan.delta must lie in (0, 1)")
    out = _ensure_out(cfg)
    _echo_config(cfg, out)
    header = ["d", "gamma", "K", "R", "gamma_R", "w2", "N_required", "M_required"]
    rows = []
    for d in dims:
        gamma, K, R, w2, sup_v = bounds.ar_drift_constants(rho, int(d), h, r)
        N, M = bounds.plan_sizes(eps, delta, gamma, K, R, w2, sup_v)
        rows.append(
            [int(d), gamma, K, R, bounds.effective_rate(gamma, K, R), w2, N, M]
        )
    path = os.path.join(out, "plan.csv")
    _write_csv(path, header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return EXIT_OK


def _run_model(cfg: dict, model, names: list[str]) -> int:
    out = _ensure_out(cfg)
    _echo_config(cfg, out)
    t0 = time.perf_counter()
    atoms = build_initial_distribution(
        model, cfg["n_atoms"], cfg["master_seed"], workers=cfg["workers"]
    )
    result = msc_estimate(
        model,
        atoms,
        cfg["n_chains"],
        coordinate_functions(len(names)),
        cfg["master_seed"],
        cap=cfg["excursion_cap"],
        workers=cfg["workers"],
    )
    runtime = time.perf_counter() - t0
    _write_csv(
        os.path.join(out, "estimates.csv"),
        ["function", "estimate", "stderr"],
        [
            [names[j], float(result.estimates[j]), float(result.stderrs[j])]
            for j in range(len(names))
        ],
    )
    _write_csv(
        os.path.join(out, "excursions.csv"),
        ["chain", "tau"],
        [[m, int(result.taus[m])] for m in range(result.M)],
    )
    _write_diagnostics(
        out,
        {
            "ess": result.ess,
            "w2_hat": result.w2_hat,
            "skip_fraction": result.skip_fraction,
            "mean_tau": result.mean_tau,
            "p95_tau": result.p95_tau,
            "n_atoms": result.N,
            "n_chains": result.M,
            "runtime_seconds": runtime,
            "workers": resolve_workers(cfg["workers"]),
        },
    )
    print(
        f"wrote {out}/estimates.csv ({len(names)} functions), "
        f"mean_tau={result.mean_tau:.3f}, ess={result.ess:.1f}, "
        f"runtime={runtime:.1f}s"
    )
    return EXIT_OK


def cmd_run_ar(cfg: dict) -> int:
    config = _ar_config(cfg)
    model = ArModel(config)
    names = [f"x{j}" for j in range(config.d)]
    return _run_model(cfg, model, names)


def cmd_run_logit(cfg: dict) -> int:
    posterior, r = _logit_posterior(cfg)
    model = LogitModel(posterior, r)
    code = _run_model(cfg, model, posterior.dataset.column_names)
    _maybe_compare(cfg["out_dir"], posterior.dataset.column_names)
    return code


def _baseline_common(cfg: dict, which: str) -> int:
    posterior, r = _logit_posterior(cfg)
    block = cfg.get("baseline", {})
    steps = int(block.get("steps", 100_000))
    burn_in = int(block.get("burn_in", steps // 10))
    if not steps > burn_in >= 0:
        raise ConfigError("baseline needs steps > burn_in >= 0")
    start_mode = block.get("start", "atoms")
    out = _ensure_out(cfg)
    _echo_config(cfg, out)
    t0 = time.perf_counter()

    model = LogitModel(posterior, r)
    if start_mode == "atoms":
        atoms = build_initial_distribution(
            model, cfg["n_atoms"], cfg["master_seed"], workers=cfg["workers"]
        )
        stream = derive_stream(cfg["master_seed"], "baseline-start", 0)
        from .rng import CategoricalSampler

        start = atoms.atoms[CategoricalSampler(atoms.norm_weights).sample(stream)]
    elif start_mode == "proposal":
        start = model.propose(derive_stream(cfg["master_seed"], "baseline-start", 0))
    else:
        raise ConfigError("baseline.start must be 'atoms' or 'proposal'")

    if which == "gibbs":
        res = run_single_chain_gibbs(posterior, steps, burn_in, start, cfg["master_seed"])
    else:
        override = block.get("rwm_scale_override")
        res = run_rwm(
            posterior,
            steps,
            burn_in,
            start,
            cfg["master_seed"],
            scale_override=None if override is None else float(override),
        )
    runtime = time.perf_counter() - t0
    names = posterior.dataset.column_names
    _write_csv(
        os.path.join(out, f"baseline_{which}.csv"),
        ["coordinate", "mean", "stderr"],
        [[names[j], float(res.mean[j]), float(res.stderr[j])] for j in range(posterior.d)],
    )
    diag = {
        "baseline": which,
        "steps": steps,
        "burn_in": burn_in,
        "runtime_seconds": runtime,
    }
    if res.acceptance_rate is not None:
        diag["acceptance_rate"] = res.acceptance_rate
        print(f"acceptance rate: {res.acceptance_rate:.3f}")
    _write_diagnostics(out, diag)
    _maybe_compare(out, names)
    print(f"wrote {out}/baseline_{which}.csv, runtime={runtime:.1f}s")
    return EXIT_OK


def _maybe_compare(out: str, names: list[str]) -> None:
    """Cross-method report when MSC estimates and baselines share a directory."""
    sources = {}
    for tag, fname in (
        ("msc", "estimates.csv"),
        ("gibbs", "baseline_gibbs.csv"),
        ("rwm", "baseline_rwm.csv"),
    ):
        path = os.path.join(out, fname)
        if os.path.exists(path):
            table = {}
            with open(path, "r", encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    name, mean, se = line.rsplit(",", 2)
                    table[name] = (float(mean), float(se))
            sources[tag] = table
    if len(sources) < 2:
        return
    tags = list(sources)
    header = ["coordinate"]
    for tag in tags:
        header += [f"{tag}_mean", f"{tag}_stderr"]
    rows = []
    for name in names:
        row: list = [name]
        for tag in tags:
            mean, se = sources[tag].get(name, (math.nan, math.nan))
            row += [mean, se]
        rows.append(row)
    _write_csv(os.path.join(out, "compare.csv"), header, rows)
    print(f"comparison across {', '.join(tags)}:")
    print("  coordinate: " + "  ".join(f"{tag} mean+-2se" for tag in tags))
    for row in rows:
        cells = []
        for k in range(len(tags)):
            mean, se = row[1 + 2 * k], row[2 + 2 * k]
            cells.append(f"{mean:+.4f}+-{2 * se:.4f}")
        print(f"  {row[0]}: " + "  ".join(cells))


def cmd_baseline_gibbs(cfg: dict) -> int:
    return _baseline_common(cfg, "gibbs")


def cmd_baseline_rwm(cfg: dict) -> int:
    return _baseline_common(cfg, "rwm")


def cmd_pg_selftest(cfg: dict) -> int:
    """Quick distributional check of the latent-variable sampler."""
    n = 100_000
    stream = derive_stream(cfg["master_seed"], "pg-selftest", 0)
    ok = True
    for b, target in ((0.0, 0.25), (1.0, math.tanh(0.5) / 2.0)):
        draws = np.array([sample_polya_gamma(stream, b) for _ in range(n)])
        err = abs(float(draws.mean()) - target)
        # 5-sigma band on the sample mean
        band = 5.0 * float(draws.std(ddof=1)) / math.sqrt(n)
        status = "ok" if err <= band else "FAIL"
        ok = ok and err <= band
        print(
            f"pg(1, {b:g}): mean={draws.mean():.6f} target={target:.6f} "
            f"tolerance={band:.6f} [{status}]"
        )
    if not ok:
        print("self-test failed")
        return EXIT_ENGINE
    print("self-test passed")
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "run-ar": cmd_run_ar,
    "run-logit": cmd_run_logit,
    "baseline-gibbs": cmd_baseline_gibbs,
    "baseline-rwm": cmd_baseline_rwm,
    "pg-selftest": cmd_pg_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msc",
        description="Parallel many-short-chains Monte Carlo estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--out", default=None, help="override output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, DataFormatError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapExceededError, WeightError) as err:
        print(f"engine error: {err}", file=sys.stderr)
        return EXIT_ENGINE
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
