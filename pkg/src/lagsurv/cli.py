"""Command surface: simulate / train / sweep / evaluate / bootstrap /
export-surface / grad-check.

Every run resolves a RunConfig (YAML config file plus flag overrides,
unknown keys rejected), writes its outputs into --out, and drops a
manifest.json capturing the resolved config, seed, package version, and
SHA-256 digests of the input files. Nothing time-dependent is written, so
reruns with identical manifests produce bit-identical outputs.

Exit statuses: 0 success, 2 usage/config, 3 data, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .data import ExposurePanel, ingest, write_exposures, write_outcomes
from .errors import ConfigError, DataError, NumericError
from .evaluation import ContributionGrid, contribution_grid, default_x_grid, evaluate
from .gradients import grad_check
from .loss import build_masks
from .params import NetConfig, init_params, load_params, save_params
from .simulate import gen_exposures, perm_algo, scenario_functions, simulate_dataset
from .training import TrainConfig, bootstrap_bands, fit, smoothness_sweep, stratified_split
from .model import cumulative_effect
from .evaluation import c_index as c_index_fn
from .loss import total_loss
from .params import EvalMode

USAGE_EXIT = 2
DATA_EXIT = 3
NUMERIC_EXIT = 4


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration shared by all subcommands."""

    scenario: str = "S1"
    n: int = 1000
    horizon: int = 100
    event_rate: float = 0.5
    autocorr: float = 0.0
    seed: int = 0
    lag: int = 20
    hidden: tuple = (32, 32)
    dropout: float = 0.0
    batch_norm: bool = False
    learning_rate: float = 1e-3
    max_epochs: int = 500
    batch_size: int | None = None
    patience: int = 20
    lambdas: tuple = (0.0,)
    val_fraction: float = 0.1
    time_bins: int = 5
    cv_folds: int = 5
    normalize: bool = True
    split_ratio: float = 0.9
    bootstrap_b: int = 100
    x_points: int = 101
    fd_step: float = 1e-5
    fd_tol: float = 1e-4
    n_jobs: int = 1

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            max_epochs=self.max_epochs,
            batch_size=self.batch_size,
            patience=self.patience,
            lambdas=self.lambdas,
            net=NetConfig(
                hidden=tuple(self.hidden),
                lag=self.lag,
                seed=self.seed,
                dropout=self.dropout,
                batch_norm=self.batch_norm,
            ),
            seed=self.seed,
            cv_folds=self.cv_folds,
            val_fraction=self.val_fraction,
            time_bins=self.time_bins,
        )


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge a YAML config file with flag overrides (flags win)."""
    base: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        unknown = set(loaded) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        base.update(loaded)
    base.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("hidden", "lambdas"):
        if key in base and not isinstance(base[key], tuple):
            base[key] = tuple(base[key])
    try:
        return RunConfig(**base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: RunConfig, inputs: dict, extra: dict | None = None):
    doc = {
        "artifact_version": __version__,
        "command": command,
        "seed": config.seed,
        "config": asdict(config),
        "inputs": {name: f"sha256:{_digest(p)}" for name, p in inputs.items()},
    }
    if extra:
        doc.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=list)
        fh.write("\n")


def write_csv(path, header, rows):
    """All numeric cells rendered at 17 significant digits (exact round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])


def write_grid_csv(path, grid: ContributionGrid, scenario_id: str | None = None):
    with open(path, "w", newline="") as fh:
        if scenario_id is not None:
            fh.write(f"# scenario: {scenario_id}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "l", "value"])
        for i, x in enumerate(grid.x_grid):
            for j, lag in enumerate(grid.l_grid):
                writer.writerow(["%.17g" % x, int(lag), "%.17g" % grid.values[i, j]])


def read_grid_csv(path) -> ContributionGrid:
    xs, ls, vals = [], [], []
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != ["x", "l", "value"]:
        raise DataError(f"{path}: expected header 'x,l,value'")
    for row in reader:
        if not row:
            continue
        try:
            xs.append(float(row[0]))
            ls.append(int(row[1]))
            vals.append(float(row[2]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad grid row {row!r}: {exc}") from None
    x_grid = np.unique(xs)
    l_grid = np.unique(ls)
    if len(xs) != x_grid.size * l_grid.size:
        raise DataError(f"{path}: grid is not a full (x, l) product")
    values = np.full((x_grid.size, l_grid.size), np.nan)
    xi = {x: i for i, x in enumerate(x_grid)}
    li = {l: i for i, l in enumerate(l_grid)}
    for x, l, v in zip(xs, ls, vals):
        values[xi[x], li[l]] = v
    if np.any(np.isnan(values)):
        raise DataError(f"{path}: grid has missing cells")
    return ContributionGrid(x_grid=x_grid, l_grid=l_grid, values=values)


def write_metrics(path, metrics: dict):
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    ds = simulate_dataset(
        config.scenario,
        n=config.n,
        horizon=config.horizon,
        event_rate=config.event_rate,
        seed=config.seed,
        lag=config.lag,
        autocorr=config.autocorr,
    )
    write_exposures(out / "exposures.csv", ds.panel)
    write_outcomes(out / "outcomes.csv", ds.panel, ds.outcomes)
    scenario = scenario_functions(config.scenario, lag=config.lag)
    truth = contribution_grid(scenario, default_x_grid(config.x_points))
    write_grid_csv(out / "truth_grid.csv", truth, scenario_id=config.scenario)
    write_manifest(out, "simulate", config, inputs={})
    print(f"simulate: wrote {ds.panel.n_subjects} subjects x {ds.panel.horizon} days to {out}")
    return 0


def _load_data(args, config: RunConfig):
    panel, outcomes, scale = ingest(args.exposures, args.outcomes, normalize=config.normalize)
    return panel, outcomes, scale


def cmd_train(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    panel, outcomes, scale = _load_data(args, config)
    tc = config.train_config()
    strength = config.lambdas[0]
    plan = stratified_split(outcomes, ratio=config.split_ratio, time_bins=config.time_bins, seed=config.seed)
    train_vals = panel.values[plan.train_idx]
    result = fit(tc, train_vals, outcomes.subset(plan.train_idx), strength=strength)
    save_params(out / "model.json", result.params, seed=config.seed)

    write_csv(
        out / "history.csv",
        ["epoch", "train_survival", "train_penalty", "train_total", "val_survival"],
        [
            [

                rec.epoch,
                rec.train.survival_part,
                rec.train.penalty_part,
                rec.train.total,
                rec.val.survival_part if rec.val is not None else float("nan"),
            ]
            for rec in result.history
        ],
    )
    truth = read_grid_csv(args.truth) if args.truth else None
    test_vals = panel.values[plan.test_idx]
    metrics = evaluate(result.params, test_vals, outcomes.subset(plan.test_idx), truth=truth)
    doc = {
        "test_loss": metrics.loss,
        "test_c_index": metrics.c_index,
        "strength": strength,
        "n_train": int(plan.train_idx.size),
        "n_test": int(plan.test_idx.size),
        "best_epoch": result.best_epoch,
        "kernel_reinits": result.kernel_reinits,
    }
    if metrics.gmse is not None:
        doc["gmse"] = metrics.gmse
    write_metrics(out / "metrics.json", doc)
    inputs = {"exposures": args.exposures, "outcomes": args.outcomes}
    if args.truth:
        inputs["truth"] = args.truth
    write_manifest(out, "train", config, inputs, extra={"normalization_scale": scale})
    print(f"train: test loss {metrics.loss:.4f}, C-index {metrics.c_index:.4f} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    panel, outcomes, scale = _load_data(args, config)
    tc = config.train_config()
    truth = read_grid_csv(args.truth) if args.truth else None
    result = smoothness_sweep(tc, panel.values, outcomes)
    rows = []
    for row in result.rows:
        save_params(out / f"model_lambda{row.strength:g}.json", row.params, seed=config.seed)
        entry = [row.strength, row.test_loss, row.test_c_index]
        if truth is not None:
            pred = contribution_grid(row.params, truth.x_grid, truth.l_grid)
            from .evaluation import gmse as gmse_fn

            entry.append(gmse_fn(truth, pred))
        rows.append(entry)
    header = ["lambda", "test_loss", "test_c_index"] + (["gmse"] if truth is not None else [])
    write_csv(out / "sweep.csv", header, rows)
    inputs = {"exposures": args.exposures, "outcomes": args.outcomes}
    if args.truth:
        inputs["truth"] = args.truth
    write_manifest(out, "sweep", config, inputs, extra={"normalization_scale": scale})
    print(f"sweep: {len(rows)} strengths -> {out / 'sweep.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    panel, outcomes, scale = _load_data(args, config)
    params = load_params(args.model)
    truth = read_grid_csv(args.truth) if args.truth else None
    metrics = evaluate(params, panel.values, outcomes, truth=truth)
    doc = {"loss": metrics.loss, "c_index": metrics.c_index, "n_subjects": panel.n_subjects}
    if metrics.gmse is not None:
        doc["gmse"] = metrics.gmse
    write_metrics(out / "metrics.json", doc)
    inputs = {"exposures": args.exposures, "outcomes": args.outcomes, "model": args.model}
    if args.truth:
        inputs["truth"] = args.truth
    write_manifest(out, "evaluate", config, inputs, extra={"normalization_scale": scale})
    print(f"evaluate: loss {metrics.loss:.4f}, C-index {metrics.c_index:.4f} -> {out}")
    return 0


def cmd_bootstrap(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    panel, outcomes, scale = _load_data(args, config)
    tc = config.train_config()
    bands = bootstrap_bands(
        tc,
        panel.values,
        outcomes,
        b=config.bootstrap_b,
        x_grid=default_x_grid(config.x_points),
        strength=config.lambdas[0],
        n_jobs=config.n_jobs,
    )
    write_csv(
        out / "bands_f.csv",
        ["grid", "point", "lo", "hi"],
        [
            [float(x), float(p), float(lo), float(hi)]
            for x, p, lo, hi in zip(bands.x_grid, bands.f_point, bands.f_lo, bands.f_hi)
        ],
    )
    write_csv(
        out / "bands_w.csv",
        ["grid", "point", "lo", "hi"],
        [
            [int(l), float(p), float(lo), float(hi)]
            for l, p, lo, hi in zip(bands.l_grid, bands.w_point, bands.w_lo, bands.w_hi)
        ],
    )
    write_manifest(
        out,
        "bootstrap",
        config,
        {"exposures": args.exposures, "outcomes": args.outcomes},
        extra={"normalization_scale": scale, "n_failed": bands.n_failed},
    )
    print(f"bootstrap: {config.bootstrap_b} replicates ({bands.n_failed} failed) -> {out}")
    return 0


def cmd_export_surface(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    params = load_params(args.model)
    grid = contribution_grid(params, default_x_grid(config.x_points))
    write_grid_csv(out / "surface.csv", grid)
    slices = []
    for j, lag in enumerate(grid.l_grid):
        for i, x in enumerate(grid.x_grid):
            slices.append([int(lag), float(x), float(grid.values[i, j])])
    write_csv(out / "slices.csv", ["l", "x", "value"], slices)
    write_manifest(out, "export-surface", config, {"model": args.model})
    print(f"export-surface: {grid.values.shape[0]}x{grid.values.shape[1]} grid -> {out}")
    return 0


def cmd_grad_check(args) -> int:
    config = load_run_config(args.config, _overrides(args))
    out = _out_dir(args)
    rng = np.random.default_rng(config.seed)
    panel = gen_exposures(config.n, config.horizon, config.seed)
    net = NetConfig(
        hidden=tuple(config.hidden),
        lag=config.lag,
        seed=config.seed,
        dropout=config.dropout,
        batch_norm=config.batch_norm,
    )
    params = init_params(net)
    # random but seeded synthetic batch with a guaranteed event
    times = rng.integers(1, config.horizon + 1, size=config.n)
    events = rng.integers(0, 2, size=config.n)
    events[0] = 1
    field = cumulative_effect(params, panel.values, mode=EvalMode.INFERENCE)
    outcomes = perm_algo(field, times, events, seed=config.seed + 1)
    report = grad_check(
        params,
        panel.values,
        outcomes,
        strength=config.lambdas[0],
        step=config.fd_step,
        tol=config.fd_tol,
    )
    write_metrics(
        out / "grad_report.json",
        {
            "max_rel_error": report.max_rel_error,
            "tol": report.tol,
            "step": config.fd_step,
            "passed": report.passed,
            "per_param_max": report.per_param_max,
        },
    )
    write_manifest(out, "grad-check", config, inputs={})
    print(f"grad-check: max relative error {report.max_rel_error:.3e} (tol {report.tol:g})")
    if not report.passed:
        raise NumericError(f"gradient check failed: {report.max_rel_error:.3e} >= {report.tol:g}")
    return 0


def _overrides(args) -> dict:
    """Flag values that map 1:1 onto RunConfig fields."""
    keep = {}
    for key in _CONFIG_FIELDS:
        if hasattr(args, key):
            keep[key] = getattr(args, key)
    return keep


def _add_config_flags(p: argparse.ArgumentParser, train: bool = False):
    p.add_argument("--config", default=None, help="YAML config file (flags override it)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    if train:
        p.add_argument("--lag", type=int, default=None)
        p.add_argument("--hidden", type=_int_list, default=None, help="comma-separated widths")
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--patience", type=int, default=None)
        p.add_argument("--val-fraction", dest="val_fraction", type=float, default=None)
        p.add_argument("--no-normalize", dest="normalize", action="store_const", const=False, default=None)


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagsurv",
        description="Cumulative lagged-exposure effects in survival data: simulate, fit, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset")
    _add_config_flags(p)
    p.add_argument("--scenario", default=None, choices=["S0", "S1", "S2", "S3", "S4"])
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--event-rate", dest="event_rate", type=float, default=None)
    p.add_argument("--autocorr", type=float, default=None)
    p.add_argument("--lag", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit one model and report test metrics")
    _add_config_flags(p, train=True)
    p.add_argument("--exposures", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--truth", default=None, help="truth grid CSV for grid MSE")
    p.add_argument("--lambda", dest="lambdas", type=_float_list, default=None, help="penalty strength")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="fit one model per penalty strength on a shared split")
    _add_config_flags(p, train=True)
    p.add_argument("--exposures", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--lambdas", type=_float_list, default=None, help="comma-separated strengths")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="evaluate a saved model on a dataset")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--exposures", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bootstrap", help="percentile bands for the fitted curves")
    _add_config_flags(p, train=True)
    p.add_argument("--exposures", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--b", dest="bootstrap_b", type=int, default=None)
    p.add_argument("--lambda", dest="lambdas", type=_float_list, default=None)
    p.add_argument("--n-jobs", dest="n_jobs", type=int, default=None)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("export-surface", help="contribution grid and per-lag slices")
    _add_config_flags(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_export_surface)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    _add_config_flags(p, train=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--fd-step", dest="fd_step", type=float, default=None)
    p.add_argument("--fd-tol", dest="fd_tol", type=float, default=None)
    # small synthetic batch by default: the check is O(parameters x forward)
    p.set_defaults(func=cmd_grad_check, n=8, horizon=12, lag=3, hidden=(8, 6))

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT


def main():
    sys.exit(run())
