"""Command-line front end: synthetic data generation, training runs,
checkpoint evaluation and a gradient self-check.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or numeric
failure (diverged training, failed gradient check).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .augment import AugmentSpec
from .data import (
    BlobsConfig,
    generate_blobs,
    load_cifar10_binary,
    load_dataset_csv,
    save_dataset_csv,
)
from .grads import model_loss_gradcheck
from .linalg import save_matrix_csv
from .metrics import METRICS_HEADER, format_metrics_row
from .model import Model, ModelConfig
from .train import TrainConfig, TrainingDivergedError, evaluate, export_affinity, train

GRADCHECK_THRESHOLD = 1e-4
_GRADCHECK_MAX_PARAMS = 10_000


class UsageError(Exception):
    """Bad flags, bad config file, or unusable input files (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_TRAIN_KEYS = {
    "dataset": str,
    "out": str,
    "tau": float,
    "batch_size": int,
    "repeat": int,
    "epochs": int,
    "lr": float,
    "over_cluster_weight": float,
    "sample_weight": float,
    "class_weight": float,
    "augment_both": bool,
    "seed": int,
    "clusters": int,
    "over_clusters": int,
    "hidden_dims": str,
    "mode": str,
    "noise_sigma": float,
    "scale_lo": float,
    "scale_hi": float,
    "crop_padding": int,
    "flip_prob": float,
    "jitter_strength": float,
    "grayscale_prob": float,
}

# None marks values derived from the dataset or from other keys at run time.
_TRAIN_DEFAULTS = {
    "dataset": None,
    "out": None,
    "tau": 0.5,
    "batch_size": None,
    "repeat": 3,
    "epochs": 200,
    "lr": 1e-3,
    "over_cluster_weight": 1.0,
    "sample_weight": 1.0,
    "class_weight": 1.0,
    "augment_both": False,
    "seed": 0,
    "clusters": None,
    "over_clusters": None,
    "hidden_dims": "64",
    "mode": None,
    "noise_sigma": 0.4,
    "scale_lo": 0.9,
    "scale_hi": 1.1,
    "crop_padding": 4,
    "flip_prob": 0.5,
    "jitter_strength": 0.4,
    "grayscale_prob": 0.2,
}


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise UsageError(f"key '{key}': expected a boolean, got '{raw}'")


def _parse_value(key: str, raw: str):
    kind = _TRAIN_KEYS[key]
    if kind is bool:
        return _parse_bool(key, raw)
    if kind is str:
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise UsageError(f"key '{key}': expected {kind.__name__}, got '{raw}'") from None


def _parse_hidden_dims(raw: str) -> tuple[int, ...]:
    text = raw.strip().lower()
    if text in ("", "none"):
        return ()
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"hidden_dims: expected comma-separated integers, got '{raw}'") from None
    if any(d < 1 for d in dims):
        raise UsageError("hidden_dims: all sizes must be >= 1")
    return dims


def read_config_file(path: str) -> dict:
    """key=value lines; blank lines and # comments ignored; unknown keys rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    entries: dict = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _TRAIN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key '{key}'")
        if key in entries:
            raise UsageError(f"{path}:{lineno}: duplicate key '{key}'")
        entries[key] = _parse_value(key, value)
    return entries


def _load_dataset(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"dataset not found: {path}")
    try:
        if path.endswith(".bin"):
            return load_cifar10_binary(path)
        return load_dataset_csv(path)
    except (ValueError, OSError) as exc:
        raise UsageError(f"failed to load dataset {path}: {exc}") from None


def _snapshot_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_gen_data(args) -> int:
    try:
        config = BlobsConfig(k=args.k, dim=args.dim, n_per_cluster=args.n_per_cluster,
                             center_scale=args.center_scale, sigma=args.sigma,
                             seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset = generate_blobs(config)
    meta = {"k": config.k, "dim": config.dim, "n_per_cluster": config.n_per_cluster,
            "center_scale": config.center_scale, "sigma": config.sigma,
            "seed": config.seed}
    try:
        save_dataset_csv(args.out, dataset, meta=meta)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from None
    print(f"wrote {len(dataset)} samples ({config.k} clusters, dim {config.dim}) to {args.out}")
    return 0


def resolve_train_settings(args) -> tuple[dict, list]:
    """Merge defaults, config file and flags (in that order of precedence)."""
    settings = dict(_TRAIN_DEFAULTS)
    provided = set()
    if args.config is not None:
        for key, value in read_config_file(args.config).items():
            settings[key] = value
            provided.add(key)
    for key in _TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
            provided.add(key)
    if getattr(args, "sample_only", False):
        settings["class_weight"] = 0.0
        provided.add("class_weight")
    if getattr(args, "class_only", False):
        settings["sample_weight"] = 0.0
        provided.add("sample_weight")
    defaulted = sorted(k for k in _TRAIN_KEYS
                       if k not in provided and k not in ("dataset", "out"))
    return settings, defaulted


def cmd_train(args) -> int:
    settings, defaulted = resolve_train_settings(args)
    if settings["dataset"] is None:
        raise UsageError("dataset path required (--dataset or config key 'dataset')")
    if settings["out"] is None:
        raise UsageError("output directory required (--out or config key 'out')")

    dataset = _load_dataset(settings["dataset"])
    clusters = settings["clusters"] if settings["clusters"] is not None else dataset.num_classes
    over = settings["over_clusters"] if settings["over_clusters"] is not None else 7 * clusters
    mode = settings["mode"]
    if mode is None:
        mode = "image" if dataset.is_image else "vector"
    if mode not in ("vector", "image"):
        raise UsageError(f"mode must be 'vector' or 'image', got '{mode}'")
    if (mode == "image") != dataset.is_image:
        raise UsageError(f"augment mode '{mode}' does not match the dataset type")
    hidden = _parse_hidden_dims(settings["hidden_dims"])

    try:
        augment = AugmentSpec(
            mode=mode, noise_sigma=settings["noise_sigma"],
            scale_range=(settings["scale_lo"], settings["scale_hi"]),
            crop_padding=settings["crop_padding"], flip_prob=settings["flip_prob"],
            jitter_strength=settings["jitter_strength"],
            grayscale_prob=settings["grayscale_prob"], repeat=settings["repeat"])
        model_config = ModelConfig(
            input_dim=dataset.feature_dim, hidden_dims=hidden, num_clusters=clusters,
            over_clusters=over, seed=settings["seed"])
        config = TrainConfig(
            model=model_config, augment=augment, tau=settings["tau"],
            batch_size=settings["batch_size"], epochs=settings["epochs"],
            lr=settings["lr"], over_cluster_weight=settings["over_cluster_weight"],
            sample_weight=settings["sample_weight"], class_weight=settings["class_weight"],
            augment_both=settings["augment_both"], seed=settings["seed"])
        if config.distinct_per_batch > len(dataset):
            raise ValueError(
                f"batch needs {config.distinct_per_batch} distinct samples, "
                f"dataset has {len(dataset)}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if defaulted:
        print(f"notice: using defaults for: {', '.join(defaulted)}", file=sys.stderr)

    out = settings["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create run directory {out}: {exc}") from None

    resolved = dict(settings)
    resolved.update({
        "batch_size": config.batch_size, "repeat": config.repeat,
        "clusters": clusters, "over_clusters": over, "mode": mode,
        "hidden_dims": ",".join(str(d) for d in hidden),
    })
    with open(os.path.join(out, "config.snapshot"), "w", encoding="utf-8") as fh:
        for key in sorted(resolved):
            fh.write(f"{key}={_snapshot_value(resolved[key])}\n")

    model, history = train(config, dataset)

    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(METRICS_HEADER + "\n")
        for rec in history.records:
            fh.write(format_metrics_row(rec.epoch, rec.sample_loss, rec.class_loss,
                                        rec.total_loss, rec.report) + "\n")
    model.save(os.path.join(out, "model.ckpt"))

    export = export_affinity(model, dataset, min(config.batch_size, len(dataset)),
                             augment=augment, sort_by_truth=True,
                             rng=np.random.default_rng(config.seed),
                             augment_both=config.augment_both)
    save_matrix_csv(os.path.join(out, "affinity_M.csv"), export.m)
    save_matrix_csv(os.path.join(out, "affinity_N.csv"), export.n)

    final = history.final
    print(f"run complete: {out}")
    print(f"final epoch {final.epoch}: total_loss={final.total_loss:.6g} "
          f"acc_dominating={final.report.acc_dominating:.4f} "
          f"acc_optimal={final.report.acc_optimal:.4f} "
          f"nmi={final.report.nmi:.4f} ari={final.report.ari:.4f}")
    return 0


def cmd_eval(args) -> int:
    if not os.path.isfile(args.checkpoint):
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    try:
        model = Model.load(args.checkpoint)
    except ValueError as exc:
        raise UsageError(f"bad checkpoint: {exc}") from None
    dataset = _load_dataset(args.dataset)
    if model.config.input_dim != dataset.feature_dim:
        raise UsageError(
            f"checkpoint input_dim {model.config.input_dim} does not match "
            f"dataset feature dim {dataset.feature_dim}")
    report = evaluate(model, dataset)
    print("acc_dominating,acc_optimal,nmi,ari")
    print(",".join(f"{v:.9g}" for v in (report.acc_dominating, report.acc_optimal,
                                        report.nmi, report.ari)))
    return 0


def cmd_gradcheck(args) -> int:
    hidden = _parse_hidden_dims(args.hidden_dims)
    over = args.over_clusters if args.over_clusters is not None else 2 * args.clusters
    try:
        config = ModelConfig(input_dim=args.input_dim, hidden_dims=hidden,
                             num_clusters=args.clusters, over_clusters=over,
                             seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dims = [config.input_dim, *config.hidden_dims]
    n_params = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    n_params += dims[-1] * config.num_clusters + config.num_clusters
    n_params += dims[-1] * config.over_clusters + config.over_clusters
    if n_params > _GRADCHECK_MAX_PARAMS:
        raise UsageError(f"model too large for finite differences "
                         f"({n_params} > {_GRADCHECK_MAX_PARAMS} parameters)")
    if args.seeds < 1:
        raise UsageError("need at least one seed")

    worst = 0.0
    for s in range(args.seed, args.seed + args.seeds):
        err = model_loss_gradcheck(replace(config, seed=s), args.batch_size,
                                   tau=args.tau, seed=s, step=args.step)
        print(f"seed {s}: max_rel_err={err:.3e}")
        worst = max(worst, err)
    print(f"max relative error over {args.seeds} seed(s): {worst:.3e}")
    if worst >= GRADCHECK_THRESHOLD:
        print(f"error: gradient check failed (>= {GRADCHECK_THRESHOLD:g})", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="duoclust",
                     description="Dual contrastive clustering: train, evaluate, inspect.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic Gaussian-blobs dataset")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--k", type=int, default=4, help="number of clusters")
    gen.add_argument("--dim", type=int, default=16, help="feature dimension")
    gen.add_argument("--n-per-cluster", type=int, default=50)
    gen.add_argument("--center-scale", type=float, default=5.0)
    gen.add_argument("--sigma", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", help="train a model and write a run directory")
    tr.add_argument("--config", help="key=value config file; flags override it")
    tr.add_argument("--dataset", help="dataset CSV (or .bin image batch)")
    tr.add_argument("--out", help="run directory")
    tr.add_argument("--tau", type=float)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--repeat", type=int, help="consecutive copies of each sample in a batch")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--over-cluster-weight", type=float)
    tr.add_argument("--sample-weight", type=float)
    tr.add_argument("--class-weight", type=float)
    only = tr.add_mutually_exclusive_group()
    only.add_argument("--sample-only", action="store_true",
                      help="disable the class-wise loss term")
    only.add_argument("--class-only", action="store_true",
                      help="disable the sample-wise loss term")
    tr.add_argument("--augment-both", action="store_const", const=True,
                    help="augment the first view too instead of using raw features")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--clusters", type=int, help="main head size (default: dataset classes)")
    tr.add_argument("--over-clusters", type=int, help="auxiliary head size (default: 7x clusters)")
    tr.add_argument("--hidden-dims", help="comma-separated hidden layer sizes ('' for none)")
    tr.add_argument("--mode", choices=("vector", "image"))
    tr.add_argument("--noise-sigma", type=float)
    tr.add_argument("--scale-lo", type=float)
    tr.add_argument("--scale-hi", type=float)
    tr.add_argument("--crop-padding", type=int)
    tr.add_argument("--flip-prob", type=float)
    tr.add_argument("--jitter-strength", type=float)
    tr.add_argument("--grayscale-prob", type=float)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a labeled dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck",
                        help="verify analytic gradients against finite differences")
    gc.add_argument("--batch-size", type=int, default=8)
    gc.add_argument("--input-dim", type=int, default=6)
    gc.add_argument("--hidden-dims", default="8")
    gc.add_argument("--clusters", type=int, default=5)
    gc.add_argument("--over-clusters", type=int)
    gc.add_argument("--tau", type=float, default=0.5)
    gc.add_argument("--seeds", type=int, default=5, help="number of consecutive seeds")
    gc.add_argument("--seed", type=int, default=0, help="first seed")
    gc.add_argument("--step", type=float, default=1e-5)
    gc.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
