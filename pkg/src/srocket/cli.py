"""Command line interface.

Subcommands cover the pipeline stage by stage (transform, train, prune,
eval, montecarlo, benchmark, report). Settings resolve in order: built-in
defaults, then a --config JSON file, then explicit flags. Every command that
writes artifacts also writes a meta.json capturing the resolved settings;
passing that meta.json back as --config reproduces the run bit for bit.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import compute_metrics, fit, predict, predict_masked
from .data import labels_array, split_paths
from .errors import SRocketError
from .optimizer import OptConfig, load_state
from .pipeline import (
    RunConfig,
    derive_seeds,
    load_model_artifact,
    load_run_dataset,
    monte_carlo,
    run_srocket,
    save_model_artifact,
    time_stages,
)
from .transform import init_kernel_bank, save_bank, transform_dataset

ENV_DATA_DIR = "SROCKET_DATA"

CONFIG_ALIASES = {"D": "kernels", "S": "pop", "F": "mutation", "Cr": "crossover"}

_CONFIG_KEYS = (
    "data", "dataset", "out", "seed", "kernels", "pop", "mutation",
    "crossover", "epochs", "runs", "normalize", "threads", "alpha_grid",
)


class UsageError(SRocketError):
    pass


class UnknownConfigKeyError(UsageError):
    pass


class ConfigValueError(UsageError, TypeError):
    """Raised for config values of the wrong type or out of range."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this project reserves 2 for
    # runtime failures, so usage problems are rerouted through UsageError.
    def error(self, message):
        raise UsageError(message)


def _want_int(key, value, minimum=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValueError(f"config key {key!r} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigValueError(f"config key {key!r} must be >= {minimum}, got {value}")
    return value


def _want_rate(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValueError(f"config key {key!r} must be a number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ConfigValueError(f"config key {key!r} must lie in [0, 1], got {value}")
    return float(value)


def _want_str(key, value, allow_none=False):
    if value is None and allow_none:
        return None
    if not isinstance(value, str):
        raise ConfigValueError(f"config key {key!r} must be a string, got {value!r}")
    return value


def _want_bool(key, value):
    if not isinstance(value, bool):
        raise ConfigValueError(f"config key {key!r} must be true or false, got {value!r}")
    return value


def _want_alpha_grid(key, value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigValueError(f"config key {key!r} must be a non-empty list of numbers")
    grid = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigValueError(f"config key {key!r} must contain positive numbers, got {v!r}")
        grid.append(float(v))
    return tuple(grid)


_VALIDATORS = {
    "data": lambda v: _want_str("data", v),
    "dataset": lambda v: _want_str("dataset", v),
    "out": lambda v: _want_str("out", v, allow_none=True),
    "seed": lambda v: _want_int("seed", v, minimum=0),
    "kernels": lambda v: _want_int("kernels", v, minimum=1),
    "pop": lambda v: _want_int("pop", v, minimum=4),
    "mutation": lambda v: _want_rate("mutation", v),
    "crossover": lambda v: _want_rate("crossover", v),
    "epochs": lambda v: _want_int("epochs", v, minimum=0),
    "runs": lambda v: _want_int("runs", v, minimum=1),
    "normalize": lambda v: _want_bool("normalize", v),
    "threads": lambda v: _want_int("threads", v, minimum=1, allow_none=True),
    "alpha_grid": lambda v: _want_alpha_grid("alpha_grid", v),
}


def load_config(path: str | Path) -> dict:
    """Read a config JSON file into canonical keys, validating strictly.

    Accepts either a flat mapping of settings or a meta.json produced by a
    previous run (the settings are then read from its "config" entry). Alias
    keys D, S, F and Cr map to kernels, pop, mutation and crossover.
    """
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigValueError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigValueError(f"config file {path} must contain a JSON object")
    if "config" in payload and isinstance(payload["config"], dict):
        payload = payload["config"]
    resolved = {}
    for key, value in payload.items():
        key = CONFIG_ALIASES.get(key, key)
        if key not in _VALIDATORS:
            raise UnknownConfigKeyError(f"unknown config key {key!r}")
        if key in resolved:
            raise ConfigValueError(f"config key {key!r} given more than once")
        resolved[key] = _VALIDATORS[key](value)
    return resolved


_DEFAULTS = {
    "data": None,
    "dataset": None,
    "out": None,
    "seed": 0,
    "kernels": 10000,
    "pop": 8,
    "mutation": 0.9,
    "crossover": 0.9,
    "epochs": 500,
    "runs": 10,
    "normalize": True,
    "threads": None,
    "alpha_grid": None,
}


def resolve_settings(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    settings = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(load_config(config_path))
    flag_map = {
        "data": "data", "dataset": "dataset", "out": "out", "seed": "seed",
        "kernels": "kernels", "pop": "pop", "mutation": "mutation",
        "crossover": "crossover", "epochs": "epochs", "runs": "runs",
        "threads": "threads",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            settings[key] = _VALIDATORS[key](value)
    if getattr(args, "no_normalize", False):
        settings["normalize"] = False
    if settings["data"] is None:
        settings["data"] = os.environ.get(ENV_DATA_DIR)
    return settings


def build_run_config(args: argparse.Namespace, need_out: bool = False) -> RunConfig:
    settings = resolve_settings(args)
    if not settings["data"]:
        raise UsageError(f"no data directory given (use --data or ${ENV_DATA_DIR})")
    if not settings["dataset"]:
        raise UsageError("no dataset name given (use --dataset)")
    if need_out and not settings["out"]:
        raise UsageError("this command writes artifacts; --out is required")
    opt = OptConfig(
        pop_size=settings["pop"],
        mutation=settings["mutation"],
        crossover=settings["crossover"],
        n_epochs=settings["epochs"],
        seed=settings["seed"],
    )
    kwargs = {}
    if settings["alpha_grid"] is not None:
        kwargs["alpha_grid"] = settings["alpha_grid"]
    return RunConfig(
        data_dir=settings["data"],
        dataset=settings["dataset"],
        out_dir=settings["out"],
        num_kernels=settings["kernels"],
        runs=settings["runs"],
        seed=settings["seed"],
        normalize=settings["normalize"],
        threads=settings["threads"],
        opt=opt,
        **kwargs,
    )


def _apply_threads(threads: int | None) -> None:
    if threads is None:
        return
    import numba

    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_meta(cfg: RunConfig, out_dir: Path, command: str) -> None:
    """Resolved settings plus provenance; no timestamps, so reruns match."""
    try:
        train_path, test_path = split_paths(cfg.data_dir, cfg.dataset)
        checksums = {"train": _sha256(train_path), "test": _sha256(test_path)}
    except SRocketError:
        checksums = None
    meta = {
        "command": command,
        "config": cfg.to_dict(),
        "tool_version": __version__,
        "seeds": {
            "base": cfg.seed,
            "run_seeds": [cfg.seed + r for r in range(cfg.runs)],
        },
        "dataset_checksums": checksums,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _mkout(cfg: RunConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def cmd_transform(args) -> int:
    cfg = build_run_config(args, need_out=True)
    _apply_threads(cfg.threads)
    out_dir = _mkout(cfg)
    dataset = load_run_dataset(cfg)
    bank_seed, _, _ = derive_seeds(cfg.seed)
    bank = init_kernel_bank(cfg.num_kernels, dataset.series_length, bank_seed)
    train_features = transform_dataset(dataset.train, bank)
    test_features = transform_dataset(dataset.test, bank)
    save_bank(bank, out_dir / "bank.json")
    np.savez(out_dir / "features_train.npz",
             features=train_features, labels=labels_array(dataset.train))
    np.savez(out_dir / "features_test.npz",
             features=test_features, labels=labels_array(dataset.test))
    write_meta(cfg, out_dir, "transform")
    print(f"{dataset.name}: {train_features.shape[0]}+{test_features.shape[0]} series "
          f"x {cfg.num_kernels} kernels -> {out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = build_run_config(args, need_out=True)
    _apply_threads(cfg.threads)
    out_dir = _mkout(cfg)
    dataset = load_run_dataset(cfg)
    bank_seed, _, _ = derive_seeds(cfg.seed)
    bank = init_kernel_bank(cfg.num_kernels, dataset.series_length, bank_seed)
    train_features = transform_dataset(dataset.train, bank)
    y_train = labels_array(dataset.train)
    model = fit(train_features, y_train, np.asarray(cfg.alpha_grid))
    train_acc = float(np.mean(predict(model, train_features) == y_train))
    save_bank(bank, out_dir / "bank.json")
    save_model_artifact(model, out_dir / "model_full.json", bank)
    write_meta(cfg, out_dir, "train")
    print(f"{dataset.name}: trained ridge on {cfg.num_kernels} kernels, "
          f"alpha={model.alpha:g}, train acc {train_acc:.3f} -> {out_dir}")
    return 0


def cmd_prune(args) -> int:
    cfg = build_run_config(args, need_out=True)
    _apply_threads(cfg.threads)
    out_dir = _mkout(cfg)
    report = run_srocket(cfg)
    write_meta(cfg, out_dir, "prune")
    avg = report.averages()
    print(f"{report.dataset}: full acc {avg['full_accuracy']:.3f}, "
          f"pruned acc {avg['pruned_accuracy']:.3f} at density {avg['density']:.2f} "
          f"({cfg.runs} runs) -> {out_dir / 'report.json'}")
    return 0


def _load_eval_inputs(args):
    cfg = build_run_config(args)
    _apply_threads(cfg.threads)
    dataset = load_run_dataset(cfg)
    model, bank_ref, active = load_model_artifact(args.model)
    if bank_ref["input_length"] != dataset.series_length:
        raise SRocketError(
            f"model was built for series of length {bank_ref['input_length']}, "
            f"dataset {dataset.name} has length {dataset.series_length}"
        )
    bank = init_kernel_bank(bank_ref["num_kernels"], bank_ref["input_length"], bank_ref["seed"])
    return cfg, dataset, model, bank, active


def cmd_eval(args) -> int:
    cfg, dataset, model, bank, active = _load_eval_inputs(args)
    y_test = labels_array(dataset.test)
    state = None
    if args.state is not None:
        if active is not None:
            raise UsageError("--state only applies to full-width models")
        state = load_state(args.state)
    test_features = transform_dataset(dataset.test, bank, active=active)
    if state is not None:
        predictions = predict_masked(model, test_features, state)
        density = float(np.mean(state))
    else:
        predictions = predict(model, test_features)
        density = 1.0 if active is None else active.size / bank.num_kernels
    metrics = compute_metrics(predictions, y_test, dataset.num_classes)
    payload = {
        "dataset": dataset.name,
        "accuracy": metrics.accuracy,
        "mcc": metrics.mcc,
        "density": density,
    }
    if cfg.out_dir:
        out_dir = _mkout(cfg)
        (out_dir / "eval.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{dataset.name}: acc {metrics.accuracy:.4f}, mcc {metrics.mcc:.4f}, "
          f"density {density:.3f}")
    return 0


def _parse_densities(raw: str) -> list[float]:
    try:
        densities = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--densities must be a comma-separated list of numbers: {raw!r}")
    if not densities:
        raise UsageError("--densities is empty")
    return densities


def cmd_montecarlo(args) -> int:
    cfg, dataset, model, bank, active = _load_eval_inputs(args)
    if active is not None:
        raise UsageError("montecarlo needs a full-width model (no active_indices)")
    densities = _parse_densities(args.densities)
    y_test = labels_array(dataset.test)
    test_features = transform_dataset(dataset.test, bank)
    summaries = monte_carlo(densities, args.trials, test_features, y_test,
                            model, seed=cfg.seed)
    if cfg.out_dir:
        out_dir = _mkout(cfg)
        payload = {"dataset": dataset.name, "trials": args.trials,
                   "summaries": [s.to_dict() for s in summaries]}
        (out_dir / "montecarlo.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        write_meta(cfg, out_dir, "montecarlo")
    print(f"{dataset.name}: {args.trials} random masks per density")
    for s in summaries:
        print(f"  density {s.density:.3f}: median {s.median:.4f} "
              f"(q1 {s.q1:.4f}, q3 {s.q3:.4f}, mean {s.mean:.4f}, "
              f"{len(s.outliers)} outliers)")
    return 0


def cmd_benchmark(args) -> int:
    cfg = build_run_config(args)
    _apply_threads(cfg.threads)
    table = time_stages(cfg)
    if cfg.out_dir:
        out_dir = _mkout(cfg)
        (out_dir / "timings.json").write_text(
            json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n")
        write_meta(cfg, out_dir, "benchmark")
    print(f"{table.dataset}: D={table.num_kernels}, pruned to {table.active_kernels} "
          f"(density {table.density:.2f})")
    for stage in ("init_convolution", "pretrain", "optimization_total",
                  "optimization_per_epoch", "posttrain", "inference_full",
                  "inference_pruned"):
        print(f"  {stage:24s} {getattr(table, stage):.4f}s")
    return 0


def cmd_report(args) -> int:
    try:
        payload = json.loads(Path(args.report).read_text())
    except FileNotFoundError:
        raise SRocketError(f"report file not found: {args.report}") from None
    avg = payload["averages"]
    print(f"{payload['dataset']}: {len(payload['runs'])} runs, "
          f"{payload['num_classes']} classes, "
          f"{payload['train_size']}+{payload['test_size']} series "
          f"of length {payload['series_length']}")
    print(f"  full:   acc {avg['full_accuracy']:.4f}, mcc {avg['full_mcc']:.4f}, "
          f"ofv {avg['full_ofv']:.4f}")
    print(f"  pruned: acc {avg['pruned_accuracy']:.4f}, mcc {avg['pruned_mcc']:.4f}, "
          f"ofv {avg['pruned_ofv']:.4f}, density {avg['density']:.4f}")
    print(f"  random baseline: acc {avg['random_accuracy']:.4f}; "
          f"l1 baseline: acc {avg['l1_accuracy']:.4f}")
    return 0


def _add_common_flags(parser, with_out=True):
    parser.add_argument("--data", help=f"dataset root directory (default ${ENV_DATA_DIR})")
    parser.add_argument("--dataset", help="dataset name under the data directory")
    if with_out:
        parser.add_argument("--out", help="output directory for artifacts")
    parser.add_argument("--seed", type=int, help="base random seed (default 0)")
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip per-series z-normalization")
    parser.add_argument("--threads", type=int, help="thread count for the transform")
    parser.add_argument("--config", help="JSON config file (flags override it)")


def _add_kernel_flag(parser):
    parser.add_argument("--kernels", type=int, help="number of random kernels (default 10000)")


def _add_opt_flags(parser):
    parser.add_argument("--pop", type=int, help="optimizer pool size (default 8)")
    parser.add_argument("--mutation", type=float, help="mutation factor in [0,1] (default 0.9)")
    parser.add_argument("--crossover", type=float, help="crossover rate in [0,1] (default 0.9)")
    parser.add_argument("--epochs", type=int, help="optimizer epoch budget (default 500)")


def build_parser() -> _Parser:
    parser = _Parser(prog="srocket",
                     description="Random-kernel time series classification with kernel pruning")
    parser.add_argument("--version", action="version", version=f"srocket {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("transform", help="extract PPV features to .npz files")
    _add_common_flags(p)
    _add_kernel_flag(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train", help="extract features and fit the full classifier")
    _add_common_flags(p)
    _add_kernel_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="run the full pipeline with kernel pruning")
    _add_common_flags(p)
    _add_kernel_flag(p)
    _add_opt_flags(p)
    p.add_argument("--runs", type=int, help="independent repetitions (default 10)")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("eval", help="score a saved model on the test split")
    p.add_argument("--model", required=True, help="model artifact JSON")
    p.add_argument("--state", help="optional 0/1 activation state file")
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("montecarlo", help="accuracy of random masks at fixed densities")
    p.add_argument("--model", required=True, help="full-width model artifact JSON")
    p.add_argument("--densities", required=True,
                   help="comma-separated densities, e.g. 0.1,0.2,0.5")
    p.add_argument("--trials", type=int, default=1000, help="masks per density (default 1000)")
    _add_common_flags(p)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("benchmark", help="time each pipeline stage for one run")
    _add_common_flags(p)
    _add_kernel_flag(p)
    _add_opt_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="summarize an existing report.json")
    p.add_argument("--report", required=True, help="path to report.json")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"srocket: error: {exc}", file=sys.stderr)
        return 1
    except SRocketError as exc:
        print(f"srocket: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"srocket: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
