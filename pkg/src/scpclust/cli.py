"""Command-line interface: train, eval, kmeans, blobs, export-logits.

Exit codes are stable: 0 success, 2 configuration problem, 3 data or format
problem, 4 numeric abort (non-finite loss or gradient).  Error text goes to
standard error; success output and logs go to standard out, so reruns with
the same seed are reproducible byte-for-byte.

A config file (INI, key = value under a section named after the subcommand)
can predefine any flag; explicit command-line flags win.  Unknown keys are
rejected rather than ignored.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseline, data, trainer
from .errors import ConfigError, NonFiniteError, ScpError
from .head import AssignmentBatch
from .metrics import cluster_report
from .trainer import TrainConfig

log = logging.getLogger(__name__)

# Entropy-weight presets mirroring the per-dataset schedule from the
# experiments this package reproduces.
ALPHA_PRESETS = {
    "cifar20": 2.0,
    "cifar100": 3.0,
    "imagenet-dogs": 2.0,
}

_TRAIN_KEYS = {
    "features", "mix", "out", "k", "alpha", "epochs", "batch_size", "lr",
    "seed", "activation", "symmetrize_le", "l2_normalize", "clip_norm",
    "log_every", "eval_every_epochs", "preset",
}
_SECTION_KEYS = {
    "train": _TRAIN_KEYS,
    "eval": {"checkpoint", "features", "json"},
    "kmeans": {"features", "k", "seed", "n_init", "max_iter", "tol", "l2_normalize", "json"},
    "blobs": {"out", "clusters", "per_cluster", "dim", "center_sep", "view_noise", "views", "seed"},
    "export-logits": {"checkpoint", "features", "out"},
}

_BOOL_KEYS = {"symmetrize_le", "l2_normalize", "json"}
_INT_KEYS = {
    "k", "epochs", "batch_size", "seed", "log_every", "eval_every_epochs",
    "n_init", "max_iter", "clusters", "per_cluster", "dim", "views",
}
_FLOAT_KEYS = {"alpha", "lr", "clip_norm", "tol", "center_sep", "view_noise"}


def _load_config_file(path: str, section: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for sec in parser.sections():
        if sec not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{sec}] in {path}")
        unknown = set(parser[sec]) - _SECTION_KEYS[sec]
        if unknown:
            raise ConfigError(
                f"unknown key(s) {sorted(unknown)} in section [{sec}] of {path}"
            )
    if section not in parser:
        return {}
    out = {}
    for key, raw in parser[section].items():
        if key in _BOOL_KEYS:
            out[key] = parser[section].getboolean(key)
        elif key in _INT_KEYS:
            out[key] = int(raw)
        elif key in _FLOAT_KEYS:
            out[key] = float(raw)
        else:
            out[key] = raw
    return out


def _merge(args: argparse.Namespace, file_values: dict, key: str, default):
    """Explicit flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_values:
        return file_values[key]
    return default


def _write_resolved_config(path: Path, section: str, values: dict) -> None:
    lines = [f"[{section}]"]
    for key, value in sorted(values.items()):
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")


def _print_report(report, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    else:
        for line in report.lines():
            print(line)


def cmd_train(args: argparse.Namespace) -> int:
    file_values = _load_config_file(args.config, "train") if args.config else {}
    features = _merge(args, file_values, "features", None)
    if not features:
        raise ConfigError("--features is required for train")
    out_dir = Path(_merge(args, file_values, "out", "."))
    preset = _merge(args, file_values, "preset", None)
    if preset is not None and preset not in ALPHA_PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; choose from {sorted(ALPHA_PRESETS)}"
        )
    alpha = _merge(args, file_values, "alpha", None)
    if alpha is None:
        alpha = ALPHA_PRESETS[preset] if preset else 1.0
    if alpha < 0:
        raise ConfigError(f"--alpha must be nonnegative, got {alpha}")

    ds = data.load_scpf(features)
    mix = _merge(args, file_values, "mix", None)
    if mix:
        ds = data.concat_features(ds, data.load_scpf(mix))

    k = _merge(args, file_values, "k", None)
    if k is None:
        if ds.n_classes is None:
            raise ConfigError("--k is required when the dataset carries no labels")
        k = ds.n_classes
    cfg = TrainConfig(
        k=int(k),
        alpha=float(alpha),
        epochs=int(_merge(args, file_values, "epochs", 30)),
        batch_size=int(_merge(args, file_values, "batch_size", 512)),
        lr_init=float(_merge(args, file_values, "lr", 1e-3)),
        seed=int(_merge(args, file_values, "seed", 0)),
        activation=str(_merge(args, file_values, "activation", "relu")),
        symmetrize_le=bool(_merge(args, file_values, "symmetrize_le", False)),
        l2_normalize=bool(_merge(args, file_values, "l2_normalize", False)),
        clip_norm=float(_merge(args, file_values, "clip_norm", 0.0)),
        log_every=int(_merge(args, file_values, "log_every", 50)),
        eval_every_epochs=int(_merge(args, file_values, "eval_every_epochs", 1)),
    )
    cfg.validate()

    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"features": features, "out": str(out_dir)}
    if mix:
        resolved["mix"] = mix
    resolved.update(
        k=cfg.k, alpha=cfg.alpha, epochs=cfg.epochs, batch_size=cfg.batch_size,
        lr=cfg.lr_init, seed=cfg.seed, activation=cfg.activation,
        symmetrize_le=cfg.symmetrize_le, l2_normalize=cfg.l2_normalize,
        clip_norm=cfg.clip_norm, log_every=cfg.log_every,
        eval_every_epochs=cfg.eval_every_epochs,
    )
    _write_resolved_config(out_dir / "config.resolved.ini", "train", resolved)

    head, trace, report = trainer.train(ds, cfg, checkpoint_path=str(out_dir / "checkpoint.scph"))
    (out_dir / "trace.log").write_text("\n".join(trace.lines()) + "\n")
    (out_dir / "report.txt").write_text("\n".join(report.lines()) + "\n")
    (out_dir / "report.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    )
    _print_report(report, as_json=False)
    print(f"checkpoint={out_dir / 'checkpoint.scph'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    file_values = _load_config_file(args.config, "eval") if args.config else {}
    ckpt_path = _merge(args, file_values, "checkpoint", None)
    features = _merge(args, file_values, "features", None)
    if not ckpt_path or not features:
        raise ConfigError("eval needs --checkpoint and --features")
    head, tcfg = trainer.load_run_checkpoint(ckpt_path)
    ds = data.load_scpf(features)

    trained_l2 = bool(tcfg.get("dataset_l2_normalized")) if tcfg else False
    if ds.l2_normalized and not trained_l2:
        raise ConfigError(
            "dataset is l2-normalized but the checkpoint was trained on raw features"
        )
    if trained_l2 and not ds.l2_normalized:
        ds = trainer._maybe_normalize(ds, True)

    report = trainer.evaluate(head, ds)
    _print_report(report, as_json=bool(_merge(args, file_values, "json", False)))
    return 0


def cmd_kmeans(args: argparse.Namespace) -> int:
    file_values = _load_config_file(args.config, "kmeans") if args.config else {}
    features = _merge(args, file_values, "features", None)
    if not features:
        raise ConfigError("--features is required for kmeans")
    ds = data.load_scpf(features)
    k = _merge(args, file_values, "k", None)
    if k is None:
        if ds.n_classes is None:
            raise ConfigError("--k is required when the dataset carries no labels")
        k = ds.n_classes
    result = baseline.kmeans(
        ds,
        int(k),
        max_iter=int(_merge(args, file_values, "max_iter", baseline.DEFAULT_MAX_ITER)),
        tol=float(_merge(args, file_values, "tol", baseline.DEFAULT_TOL)),
        n_init=int(_merge(args, file_values, "n_init", baseline.DEFAULT_N_INIT)),
        seed=int(_merge(args, file_values, "seed", 0)),
        l2_normalize=bool(_merge(args, file_values, "l2_normalize", False)),
    )
    assign = AssignmentBatch.from_labels(result.assignments, int(k))
    report = cluster_report(assign, ds.labels, losses={"inertia": result.inertia})
    _print_report(report, as_json=bool(_merge(args, file_values, "json", False)))
    return 0


def cmd_blobs(args: argparse.Namespace) -> int:
    file_values = _load_config_file(args.config, "blobs") if args.config else {}
    out = _merge(args, file_values, "out", None)
    if not out:
        raise ConfigError("--out is required for blobs")
    ds = data.make_blobs(
        n_clusters=int(_merge(args, file_values, "clusters", 5)),
        per_cluster=int(_merge(args, file_values, "per_cluster", 400)),
        dim=int(_merge(args, file_values, "dim", 32)),
        center_sep=float(_merge(args, file_values, "center_sep", 10.0)),
        view_noise=float(_merge(args, file_values, "view_noise", 0.5)),
        n_views=int(_merge(args, file_values, "views", 3)),
        seed=int(_merge(args, file_values, "seed", 0)),
    )
    data.save_scpf(ds, out)
    print(
        f"wrote {out}: n_items={ds.n_items} n_views={ds.n_views} dim={ds.dim} "
        f"n_classes={ds.n_classes}"
    )
    return 0


def cmd_export_logits(args: argparse.Namespace) -> int:
    file_values = _load_config_file(args.config, "export-logits") if args.config else {}
    ckpt_path = _merge(args, file_values, "checkpoint", None)
    features = _merge(args, file_values, "features", None)
    out = _merge(args, file_values, "out", None)
    if not ckpt_path or not features or not out:
        raise ConfigError("export-logits needs --checkpoint, --features and --out")
    head, _ = trainer.load_run_checkpoint(ckpt_path)
    ds = data.load_scpf(features)
    trainer.export_logits(head, ds, out)
    print(f"wrote {out}: n_items={ds.n_items} n_clusters={head.n_clusters}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scpclust",
        description="Cluster-head training and evaluation on precomputed embeddings",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a cluster head on an embedding file")
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--features", help="input SCPF embedding file")
    p.add_argument("--mix", help="second SCPF file to concatenate feature-wise")
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--k", type=int, help="number of clusters (default: dataset classes)")
    p.add_argument("--alpha", type=float, help="entropy regularization weight")
    p.add_argument("--preset", choices=sorted(ALPHA_PRESETS), help="named alpha preset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--activation", choices=["relu", "gelu", "tanh"])
    p.add_argument("--symmetrize-le", action="store_const", const=True, dest="symmetrize_le")
    p.add_argument("--l2-normalize", action="store_const", const=True, dest="l2_normalize")
    p.add_argument("--clip-norm", type=float, dest="clip_norm")
    p.add_argument("--log-every", type=int, dest="log_every")
    p.add_argument("--eval-every-epochs", type=int, dest="eval_every_epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an embedding file")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--features")
    p.add_argument("--json", action="store_const", const=True, help="machine-readable output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kmeans", help="k-means baseline on the clean view")
    p.add_argument("--config")
    p.add_argument("--features")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-init", type=int, dest="n_init")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--tol", type=float)
    p.add_argument("--l2-normalize", action="store_const", const=True, dest="l2_normalize")
    p.add_argument("--json", action="store_const", const=True)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("blobs", help="generate a synthetic labeled embedding file")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--clusters", type=int)
    p.add_argument("--per-cluster", type=int, dest="per_cluster")
    p.add_argument("--dim", type=int)
    p.add_argument("--center-sep", type=float, dest="center_sep")
    p.add_argument("--view-noise", type=float, dest="view_noise")
    p.add_argument("--views", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_blobs)

    p = sub.add_parser("export-logits", help="dump pre-softmax outputs for a dataset")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--features")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_logits)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stdout,
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ScpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
