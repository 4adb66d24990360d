"""Command-line surface: train k folds, rank features, predict from checkpoints."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import nn
from .datasets import (
    SYNTH_TEST_N,
    SYNTH_TRAIN_N,
    Dataset,
    gen_binary_hypersphere,
    gen_nonlinear_regression,
    gen_xor4,
    kfold,
    load_csv,
    standardize,
)
from .deploy import FirReport, extract, predict_masked
from .errors import ConfigError, DataError, NumericError
from .masks import Mask
from .training import TrainConfig, train, write_history_csv

log = logging.getLogger("dualfir")

CONFIG_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# built-in synthetic experiments; architectures and search hyperparameters
# follow the reference configuration for each task
PRESETS = {
    "xor4": {
        "generator": gen_xor4,
        "task": "multiclass",
        "train": dict(d=10, s=5, n_classes=4, operator_hidden=(60, 30, 20),
                      selector_hidden=(100, 50, 10), e1=6000, candidate_count=32,
                      exploit_fraction=0.5, s_p=2, full_train_eval=True),
    },
    "nonlinreg": {
        "generator": gen_nonlinear_regression,
        "task": "regression",
        "train": dict(d=10, s=5, operator_hidden=(100, 50, 25),
                      selector_hidden=(100, 50, 10), e1=6000, candidate_count=32,
                      exploit_fraction=0.5, s_p=2, full_train_eval=True,
                      patience=100),
    },
    "binhyper": {
        "generator": gen_binary_hypersphere,
        "task": "binary",
        "train": dict(d=10, s=5, n_classes=2, operator_hidden=(60, 30, 20),
                      selector_hidden=(100, 50, 10), e1=6000, candidate_count=32,
                      exploit_fraction=0.5, s_p=2, full_train_eval=True),
    },
}


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("FIR_LOG_LEVEL", "info").lower(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {CONFIG_SCHEMA_VERSION}")
    if "dataset" not in doc:
        raise ConfigError("config needs a 'dataset' section")
    src = doc["dataset"]
    if ("preset" in src) == ("csv" in src):
        raise ConfigError("dataset must name exactly one of 'preset' or 'csv'")
    if "preset" in src and src["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {src['preset']!r}; choose from {sorted(PRESETS)}")
    if "csv" in src and ("target" not in src or "task" not in src):
        raise ConfigError("csv dataset needs 'target' and 'task'")
    return doc


def _fold_seed(master_seed, fold):
    return int(np.random.SeedSequence([master_seed, fold]).generate_state(1)[0])


def _fold_data(doc, fold, folds, master_seed):
    """Resolve (train Dataset, test Dataset, mean, std) for one fold.

    Synthetic presets regenerate fresh train/test sets per fold; CSV datasets
    are k-fold split, with standardization statistics from the training part.
    """
    src = doc["dataset"]
    if "preset" in src:
        preset = PRESETS[src["preset"]]
        rng = np.random.default_rng(np.random.SeedSequence([master_seed, fold, 997]))
        n_train = src.get("train_n", SYNTH_TRAIN_N)
        n_test = src.get("test_n", SYNTH_TEST_N)
        train_ds = preset["generator"](n_train, rng)
        test_ds = preset["generator"](n_test, rng)
        d = train_ds.d
        return train_ds, test_ds, np.zeros(d), np.ones(d)
    full = load_csv(src["csv"], src["target"], src["task"])
    labels = None if full.task == "regression" else full.targets
    plan = kfold(full.n, folds, labels, seed=master_seed)
    train_ds = full.subset(plan.train_rows(fold))
    test_ds = full.subset(plan.test_rows(fold))
    if src.get("standardize", True):
        train_ds, (test_ds,), mean, std = standardize(train_ds, [test_ds])
    else:
        mean, std = np.zeros(full.d), np.ones(full.d)
    return train_ds, test_ds, mean, std


def _train_config(doc, train_ds: Dataset, fold_seed):
    src = doc["dataset"]
    base = dict(PRESETS[src["preset"]]["train"]) if "preset" in src else {}
    base.update(doc.get("train", {}))
    base.setdefault("d", train_ds.d)
    base.setdefault("s", max(1, train_ds.d // 2))
    base["task"] = train_ds.task
    base["n_classes"] = train_ds.n_classes
    base["seed"] = fold_seed
    for key in ("operator_hidden", "selector_hidden"):
        if key in base:
            base[key] = tuple(base[key])
    try:
        config = TrainConfig(**base)
    except TypeError as exc:
        raise ConfigError(f"bad train config: {exc}") from exc
    config.validate()
    return config


def _test_metric(model, test_ds: Dataset, m_star):
    if test_ds.task == "regression":
        preds = predict_masked(model.operator, test_ds.features, m_star)
        return "mse", float(np.mean((preds - test_ds.targets) ** 2))
    _, labels = predict_masked(model.operator, test_ds.features, m_star)
    return "accuracy", float(np.mean(labels == test_ds.targets))


def run_fold(doc, fold, folds, master_seed, out_dir):
    """Train one fold end to end and write its artifact directory."""
    fold_dir = Path(out_dir) / f"fold_{fold}"
    fold_dir.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds, mean, std = _fold_data(doc, fold, folds, master_seed)
    config = _train_config(doc, train_ds, _fold_seed(master_seed, fold))
    log.info("fold %d: training (d=%d, s=%d, task=%s)", fold, config.d, config.s, config.task)
    t0 = time.time()
    model = train(config, train_ds)
    report = extract(model.selector, config.s, fold_id=fold,
                     feature_names=train_ds.feature_names)
    metric_name, metric = _test_metric(model, test_ds, report.m_star)
    log.info("fold %d: %s=%.4f mask=%s (%.1fs)", fold, metric_name, metric,
             report.m_star.to_bitstring(), time.time() - t0)

    report.save(fold_dir / "report.json")
    report.write_scores_csv(fold_dir / "scores.csv")
    write_history_csv(model.history, fold_dir / "history.csv")
    nn.save_network(model.operator.net, fold_dir / "operator.json")
    nn.save_network(model.selector.net, fold_dir / "selector.json")
    meta = {
        "format_version": 1,
        "fold_id": fold,
        "d": config.d,
        "s": config.s,
        "task": config.task,
        "n_classes": train_ds.n_classes,
        "feature_names": train_ds.feature_names,
        "label_names": train_ds.label_names,
        "mask": report.m_star.to_bitstring(),
        "feature_mean": [float(v) for v in mean],
        "feature_std": [float(v) for v in std],
        "metric_name": metric_name,
        "metric": metric,
    }
    with open(fold_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return {"fold": fold, "metric": metric, "metric_name": metric_name,
            "mask": report.m_star.to_bitstring()}


def _run_fold_args(args):
    return run_fold(*args)


def cmd_train(args):
    doc = _load_config(args.config)
    folds = args.folds or doc.get("folds", 5)
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    out_dir = Path(args.out or doc.get("out", "fir_run"))
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(doc, fold, folds, seed, str(out_dir)) for fold in range(folds)]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_run_fold_args, jobs))
    else:
        results = [_run_fold_args(job) for job in jobs]

    metrics = np.array([r["metric"] for r in results])
    d = len(results[0]["mask"])
    counts = np.zeros(d, dtype=int)
    for r in results:
        counts += np.array([c == "1" for c in r["mask"]], dtype=int)
    summary = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "metric_name": results[0]["metric_name"],
        "metric_mean": float(metrics.mean()),
        "metric_std": float(metrics.std()),
        "selected_feature_counts": counts.tolist(),
        "folds": results,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{summary['metric_name']}: {summary['metric_mean']:.4f} "
          f"± {summary['metric_std']:.4f} over {folds} folds -> {out_dir}")
    return EXIT_OK


def _load_meta(model_dir):
    path = Path(model_dir) / "meta.json"
    if not path.exists():
        raise ConfigError(f"no checkpoint at {model_dir}: missing {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_rank(args):
    meta = _load_meta(args.model_dir)
    selector_path = Path(args.model_dir) / "selector.json"
    if not selector_path.exists():
        raise ConfigError(f"no checkpoint at {args.model_dir}: missing {selector_path}")
    from .selector_net import SelectorModel

    selector = SelectorModel(nn.load_network(selector_path), nn.AdamState(1e-3))
    report = extract(selector, meta["s"], fold_id=meta.get("fold_id", 0),
                     feature_names=meta.get("feature_names", []))
    names = report.feature_names or [f"x{i}" for i in range(selector.d)]
    print(f"optimal mask: {report.m_star.to_bitstring()}")
    for rank, idx in enumerate(report.ranking, start=1):
        print(f"{rank:3d}  {idx:4d}  {names[idx]:<20s}  {report.normalized_scores[idx]:+.6f}")
    report.write_scores_csv(Path(args.model_dir) / "scores.csv")
    return EXIT_OK


def _read_feature_csv(path, feature_names):
    ds_like = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path} is empty")
        if len(header) != len(feature_names):
            raise ConfigError(
                f"{path} has {len(header)} columns, model expects {len(feature_names)}")
        for row_idx, row in enumerate(reader):
            try:
                ds_like.append([float(c) for c in row])
            except ValueError:
                raise DataError(f"non-numeric cell in row {row_idx + 1} of {path}") from None
    if not ds_like:
        raise DataError(f"{path} has no data rows")
    return np.asarray(ds_like, dtype=float)


def cmd_predict(args):
    meta = _load_meta(args.model_dir)
    operator_path = Path(args.model_dir) / "operator.json"
    if not operator_path.exists():
        raise ConfigError(f"no checkpoint at {args.model_dir}: missing {operator_path}")
    from .operator_net import OperatorModel
    from .training import _loss_kind

    operator = OperatorModel(nn.load_network(operator_path),
                             _loss_kind(meta["task"]), nn.AdamState(1e-3))
    mask = Mask.from_bitstring(meta["mask"])
    x = _read_feature_csv(args.csv, meta["feature_names"])
    x = (x - np.array(meta["feature_mean"])) / np.array(meta["feature_std"])
    out_path = Path(args.out or (Path(args.model_dir) / "predictions.csv"))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if meta["task"] == "regression":
            writer.writerow(["prediction"])
            for v in predict_masked(operator, x, mask):
                writer.writerow([repr(float(v))])
        else:
            label_names = meta.get("label_names") or [str(i) for i in range(meta["n_classes"])]
            writer.writerow(["label"] + [f"p_{name}" for name in label_names])
            probs, labels = predict_masked(operator, x, mask)
            for lbl, row in zip(labels, probs):
                writer.writerow([label_names[lbl]] + [repr(float(p)) for p in row])
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fir",
                                     description="Dual-net feature importance ranking")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="k-fold training run from a JSON config")
    p_train.add_argument("--config", required=True, help="path to JSON run config")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--folds", type=int, default=None)
    p_train.add_argument("--parallel", type=int, default=1, help="fold worker processes")
    p_train.set_defaults(func=cmd_train)

    p_rank = sub.add_parser("rank", help="rank features from a trained fold directory")
    p_rank.add_argument("model_dir")
    p_rank.set_defaults(func=cmd_rank)

    p_predict = sub.add_parser("predict", help="predict a feature CSV with a trained fold")
    p_predict.add_argument("model_dir")
    p_predict.add_argument("csv")
    p_predict.add_argument("--out", default=None, help="predictions CSV path")
    p_predict.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
