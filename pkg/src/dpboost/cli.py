"""Command line interface: train, predict, evaluate, sweep, budget, synth.

Configuration is a flat JSON file (--config) whose keys mirror the
training parameters; every key can also be given as a same-named flag,
and flags win. Budgets are either ``epsilon_per_tree`` or a user-facing
``total_epsilon`` from which the per-tree budget is derived by
inverting subsampling amplification. Infinity is spelled "inf" and
marks the run as non-private.

Reports are single-line JSON on stdout; logs go to stderr. Exit codes:
0 success, 1 usage/config error, 2 data error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from .data import (
    DataError,
    Dataset,
    generate_synthetic,
    load_bounds,
    load_csv,
    load_feature_matrix,
)
from .model import Ensemble
from .privacy import required_base_epsilon, subsampled_epsilon
from .trainer import LEAF_MODES, TrainParams, simulate_tree_ledger, train

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Bad usage or configuration (exit code 1)."""


_PARAM_INT_KEYS = ("trees", "max_depth", "min_child_samples", "bins", "candidates")
_PARAM_FLOAT_KEYS = (
    "reg_lambda",
    "learning_rate",
    "subsample",
    "sketch_fraction",
    "leaf_fraction",
    "split_fraction",
    "g_star",
)
_KNOWN_KEYS = frozenset(
    _PARAM_INT_KEYS
    + _PARAM_FLOAT_KEYS
    + (
        "leaf_mode",
        "epsilon_per_tree",
        "total_epsilon",
        "epsilons",
        "seed",
        "trials",
        "metric",
        "label_column",
        "train_csv",
        "test_csv",
        "bounds",
        "model",
        "model_out",
        "predictions_out",
        "sweep_out",
        "kind",
        "rows",
        "num_features",
        "data_out",
        "bounds_out",
    )
)


def _parse_epsilon_value(value, key: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() == "inf":
            return math.inf
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number or 'inf', got {value!r}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"{key}: expected a number or 'inf', got {value!r}")


def _format_epsilon(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    for key in obj:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"config {path}: unknown key {key!r}")
    return obj


def _merge_config(args: argparse.Namespace) -> dict:
    """Config file first, then any flag that was actually set."""
    cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    return cfg


def _require(cfg: dict, key: str) -> object:
    if key not in cfg:
        raise ConfigError(f"{key}: required but not set")
    return cfg[key]


def _cfg_int(cfg: dict, key: str, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"{key}: required but not set")
        return default
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def params_from_config(cfg: dict) -> TrainParams:
    """Build TrainParams from flat config keys (shared with the bindings).

    Exactly one of epsilon_per_tree / total_epsilon must be present for
    a private run; a finite total is divided over the trees by inverting
    subsampling amplification.
    """
    kwargs: dict = {}
    for key in _PARAM_INT_KEYS:
        if key in cfg:
            kwargs[key] = _cfg_int(cfg, key)
    for key in _PARAM_FLOAT_KEYS:
        if key in cfg:
            value = cfg[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {value!r}")
            kwargs[key] = float(value)
    if "leaf_mode" in cfg:
        kwargs["leaf_mode"] = cfg["leaf_mode"]

    trees = kwargs.get("trees", TrainParams.trees)
    gamma = kwargs.get("subsample", TrainParams.subsample)
    has_per_tree = "epsilon_per_tree" in cfg
    has_total = "total_epsilon" in cfg
    if has_per_tree and has_total:
        raise ConfigError("epsilon_per_tree: set either this or total_epsilon, not both")
    if has_per_tree:
        kwargs["epsilon_per_tree"] = _parse_epsilon_value(cfg["epsilon_per_tree"], "epsilon_per_tree")
    elif has_total:
        total = _parse_epsilon_value(cfg["total_epsilon"], "total_epsilon")
        if math.isinf(total):
            kwargs["epsilon_per_tree"] = math.inf
        else:
            if trees == 0:
                raise ConfigError("total_epsilon: cannot split a finite budget over 0 trees")
            kwargs["epsilon_per_tree"] = required_base_epsilon(total / trees, gamma)
    elif trees != 0:
        raise ConfigError("epsilon_per_tree: set this or total_epsilon ('inf' for non-private)")
    try:
        return TrainParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_dataset(cfg: dict, csv_key: str) -> Dataset:
    bounds = load_bounds(str(_require(cfg, "bounds")))
    label_column = str(cfg.get("label_column", "label"))
    return load_csv(str(_require(cfg, csv_key)), bounds, label_column)


def _write_dataset_csv(path: str, dataset: Dataset) -> None:
    names = dataset.bounds.names
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + ",label\n")
        for row, label in zip(dataset.features, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{float(label)!r}\n")


def _print_report(report: dict) -> None:
    print(json.dumps(report, sort_keys=True))


def _evaluate(ensemble: Ensemble, dataset: Dataset, metric: str) -> float:
    predictions = ensemble.predict(dataset.features)
    if metric == "rmse":
        bounds = dataset.bounds
        diff = bounds.denormalize_labels(predictions) - bounds.denormalize_labels(dataset.labels)
        return float(np.sqrt(np.mean(diff**2)))
    if metric == "accuracy":
        if not np.isin(dataset.labels, (-1.0, 1.0)).all():
            raise DataError("accuracy: labels are not all in {-1, +1}")
        predicted = np.where(predictions >= 0.0, 1.0, -1.0)
        return float(np.mean(predicted == dataset.labels))
    raise ConfigError(f"metric: expected 'rmse' or 'accuracy', got {metric!r}")


def cmd_train(cfg: dict) -> int:
    params = params_from_config(cfg)
    dataset = _load_dataset(cfg, "train_csv")
    model_out = str(_require(cfg, "model_out"))
    seed = _cfg_int(cfg, "seed", 0)
    start = time.perf_counter()
    ensemble, report = train(dataset, params, seed)
    elapsed = time.perf_counter() - start
    ensemble.save(model_out)
    logger.info("trained %d tree(s) on %d rows in %.3fs", params.trees, dataset.n, elapsed)
    out = report.to_json_obj()
    out["model_out"] = model_out
    out["train_seconds"] = round(elapsed, 6)
    _print_report(out)
    return 0


def cmd_predict(cfg: dict) -> int:
    ensemble = Ensemble.load(str(_require(cfg, "model")))
    bounds = load_bounds(str(_require(cfg, "bounds")))
    features = load_feature_matrix(
        str(_require(cfg, "test_csv")), bounds, str(cfg.get("label_column", "label"))
    )
    predictions_out = str(_require(cfg, "predictions_out"))
    predictions = ensemble.predict(features)
    with open(predictions_out, "w", encoding="utf-8") as fh:
        for value in predictions:
            fh.write(f"{float(value)!r}\n")
    _print_report({"rows": int(predictions.size), "predictions_out": predictions_out})
    return 0


def cmd_evaluate(cfg: dict) -> int:
    ensemble = Ensemble.load(str(_require(cfg, "model")))
    dataset = _load_dataset(cfg, "test_csv")
    metric = str(cfg.get("metric", "rmse"))
    value = _evaluate(ensemble, dataset, metric)
    _print_report({"metric": metric, "rows": dataset.n, "value": value})
    return 0


def cmd_sweep(cfg: dict) -> int:
    raw_epsilons = _require(cfg, "epsilons")
    if isinstance(raw_epsilons, str):
        raw_epsilons = [tok for tok in raw_epsilons.split(",") if tok.strip()]
    if not isinstance(raw_epsilons, list) or not raw_epsilons:
        raise ConfigError("epsilons: expected a non-empty list")
    epsilons = [_parse_epsilon_value(v, "epsilons") for v in raw_epsilons]
    trials = _cfg_int(cfg, "trials", 1)
    if trials < 1:
        raise ConfigError(f"trials: must be >= 1, got {trials}")
    seed = _cfg_int(cfg, "seed", 0)
    metric = str(cfg.get("metric", "rmse"))
    train_set = _load_dataset(cfg, "train_csv")
    test_set = _load_dataset(cfg, "test_csv")

    lines = ["epsilon,trial,metric,value"]
    base_cfg = dict(cfg)
    base_cfg.pop("epsilon_per_tree", None)
    for total_eps in epsilons:
        run_cfg = dict(base_cfg)
        run_cfg["total_epsilon"] = "inf" if math.isinf(total_eps) else total_eps
        params = params_from_config(run_cfg)
        for trial in range(trials):
            ensemble, _ = train(train_set, params, seed + trial)
            value = _evaluate(ensemble, test_set, metric)
            lines.append(f"{_format_epsilon(total_eps)},{trial},{metric},{value!r}")
            logger.info(
                "sweep eps=%s trial=%d %s=%.6f", _format_epsilon(total_eps), trial, metric, value
            )
    text = "\n".join(lines) + "\n"
    if "sweep_out" in cfg:
        with open(str(cfg["sweep_out"]), "w", encoding="utf-8") as fh:
            fh.write(text)
        _print_report({"rows": len(lines) - 1, "sweep_out": str(cfg["sweep_out"])})
    else:
        sys.stdout.write(text)
    return 0


def cmd_budget(cfg: dict) -> int:
    params = params_from_config(cfg)
    if "bounds" in cfg:
        num_features = load_bounds(str(cfg["bounds"])).num_features
    else:
        num_features = _cfg_int(cfg, "num_features", 1)
        if num_features < 1:
            raise ConfigError(f"num_features: must be >= 1, got {num_features}")
    ledger_total = simulate_tree_ledger(params, num_features).total()
    amplified = subsampled_epsilon(ledger_total, params.subsample)
    total = math.fsum([amplified] * params.trees)
    eps = params.epsilon_per_tree
    enc = lambda v: "inf" if math.isinf(v) else v  # noqa: E731
    _print_report(
        {
            "per_tree_eps": enc(eps),
            "sketch_eps": enc(eps * params.sketch_fraction),
            "leaf_eps": enc(eps * params.leaf_fraction),
            "split_eps_per_level": enc(
                eps * params.split_fraction / params.max_depth
                if params.max_depth
                else eps * params.split_fraction
            ),
            "max_depth": params.max_depth,
            "gamma": params.subsample,
            "amplified_per_tree_eps": enc(amplified),
            "trees": params.trees,
            "total_eps": enc(total),
            "non_private": math.isinf(eps),
        }
    )
    return 0


def cmd_synth(cfg: dict) -> int:
    kind = str(_require(cfg, "kind"))
    rows = _cfg_int(cfg, "rows")
    num_features = _cfg_int(cfg, "num_features", 5)
    seed = _cfg_int(cfg, "seed", 0)
    data_out = str(_require(cfg, "data_out"))
    bounds_out = str(_require(cfg, "bounds_out"))
    try:
        dataset = generate_synthetic(kind, rows, num_features, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_dataset_csv(data_out, dataset)
    with open(bounds_out, "w", encoding="utf-8") as fh:
        json.dump(dataset.bounds.to_json_obj(), fh, sort_keys=True)
        fh.write("\n")
    _print_report(
        {"rows": dataset.n, "features": dataset.m, "data_out": data_out, "bounds_out": bounds_out}
    )
    return 0


_COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "budget": cmd_budget,
    "synth": cmd_synth,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to exit code 1, not argparse's 2
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpboost", description="Differentially private boosted trees")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.error = parser.error  # type: ignore[method-assign]
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--seed", type=int)
        return p

    def add_param_flags(p: argparse.ArgumentParser) -> None:
        for key in _PARAM_INT_KEYS:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
        for key in _PARAM_FLOAT_KEYS:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
        p.add_argument("--leaf-mode", dest="leaf_mode", choices=LEAF_MODES)
        p.add_argument("--epsilon-per-tree", dest="epsilon_per_tree")
        p.add_argument("--total-epsilon", dest="total_epsilon")

    p = add("train", "fit a model and write it as JSON")
    add_param_flags(p)
    p.add_argument("--train-csv", dest="train_csv")
    p.add_argument("--bounds", dest="bounds")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--model-out", dest="model_out")

    p = add("predict", "write one raw score per row of a CSV")
    p.add_argument("--model", dest="model")
    p.add_argument("--test-csv", dest="test_csv")
    p.add_argument("--bounds", dest="bounds")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--predictions-out", dest="predictions_out")

    p = add("evaluate", "score a model on a labeled CSV")
    p.add_argument("--model", dest="model")
    p.add_argument("--test-csv", dest="test_csv")
    p.add_argument("--bounds", dest="bounds")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--metric", dest="metric", choices=("rmse", "accuracy"))

    p = add("sweep", "train/evaluate across a list of total budgets; emit CSV")
    add_param_flags(p)
    p.add_argument("--train-csv", dest="train_csv")
    p.add_argument("--test-csv", dest="test_csv")
    p.add_argument("--bounds", dest="bounds")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--metric", dest="metric", choices=("rmse", "accuracy"))
    p.add_argument("--epsilons", dest="epsilons", help="comma-separated totals, e.g. 1,10,inf")
    p.add_argument("--trials", dest="trials", type=int)
    p.add_argument("--sweep-out", dest="sweep_out")

    p = add("budget", "privacy accounting preview without training")
    add_param_flags(p)
    p.add_argument("--bounds", dest="bounds")
    p.add_argument("--num-features", dest="num_features", type=int)

    p = add("synth", "generate a synthetic dataset CSV plus its bounds file")
    p.add_argument("--kind", dest="kind", choices=("classification", "regression"))
    p.add_argument("--rows", dest="rows", type=int)
    p.add_argument("--num-features", dest="num_features", type=int)
    p.add_argument("--data-out", dest="data_out")
    p.add_argument("--bounds-out", dest="bounds_out")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - invariant violations surface as exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
