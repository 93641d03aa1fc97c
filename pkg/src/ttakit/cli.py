"""Command-line driver for reproducible TTA experiments.

Subcommands: augment (materialize policy views), learn (fit aggregation
weights), eval (score a method and write a report with figures), and
simulate (emit synthetic-world fixtures).

Exit codes: 0 success, 2 invalid arguments, 3 I/O failure, 4 dimension
mismatch, 5 file-format error. A RunManifest JSON describing the run is
written next to each command's outputs. TTA_THREADS caps the augment
command's worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aggregate import Aggregator, TrainConfig, gps_search, predict, select_mode, train
from .augment import (
    apply_policy,
    expanded_policy,
    flips_policy,
    read_manifest,
    read_png,
    standard_policy,
    write_manifest,
    write_png,
)
from .core import WeightMode
from .errors import (
    BadMagic,
    DegenerateVariance,
    DimensionMismatch,
    EmptySet,
    InvariantViolation,
    LabelOutOfRange,
    LengthMismatch,
    ManifestError,
    NegativeWeight,
    TruncatedFile,
    TTAError,
    UnsupportedMode,
    UnsupportedVersion,
    WrongKind,
)
from .io import (
    FORMAT_VERSION,
    read_labels,
    read_predictions,
    read_weights,
    subsample_training,
    write_labels,
    write_predictions,
    write_weights,
)
from .metrics import (
    accuracy,
    agreement,
    corrections_corruptions,
    paired_t_test,
    subsample_eval,
)
from .report import (
    REPORT_SCHEMA_VERSION,
    build_report,
    render_figures,
    write_report_csv,
    write_report_json,
)
from .simulate import (
    ToyTrainConfig,
    bayes_weights,
    blob_world,
    emit,
    invariant_world,
    planted_class_asymmetry,
    toy_logits,
    train_toy,
    uniform_world,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIMENSION = 4
EXIT_FORMAT = 5

_FORMAT_ERRORS = (
    BadMagic,
    UnsupportedVersion,
    UnsupportedMode,
    TruncatedFile,
    InvariantViolation,
    LabelOutOfRange,
    NegativeWeight,
    EmptySet,
    ManifestError,
)
_DIMENSION_ERRORS = (DimensionMismatch, WrongKind, LengthMismatch)


@dataclass
class RunManifest:
    """Everything needed to reproduce a command run, plus timing."""

    command: str
    config: dict
    seeds: dict
    inputs: list
    outputs: list
    format_versions: dict = field(
        default_factory=lambda: {
            "ttap": FORMAT_VERSION,
            "ttal": FORMAT_VERSION,
            "ttaw": FORMAT_VERSION,
            "report": REPORT_SCHEMA_VERSION,
        }
    )
    duration_seconds: float = 0.0
    toolkit_version: str = __version__

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def _thread_count() -> int:
    raw = os.environ.get("TTA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_config_defaults(path) -> dict:
    """key=value lines; '#' starts a comment; keys use flag spelling."""
    defaults = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"bad config line {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        defaults[key.replace("-", "_")] = value
    return defaults


# --- augment ----------------------------------------------------------------

def _resolve_policy(name: str, crop_size: int):
    if name == "standard":
        return standard_policy(crop_size)
    if name == "expanded":
        return expanded_policy()
    path = Path(name)
    if not path.exists():
        raise _Usage(f"--policy must be standard, expanded, or a manifest path; got {name!r}")
    return read_manifest(path)


class _Usage(Exception):
    pass


def cmd_augment(args) -> int:
    policy = _resolve_policy(args.policy, args.crop_size)
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise OSError(f"image directory {images_dir} does not exist")
    sources = sorted(images_dir.glob("*.png"))
    if not sources:
        raise OSError(f"no .png images under {images_dir}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir / "policy.tsv", policy)

    def run_one(src: Path) -> list:
        img = read_png(src)
        views = apply_policy(policy, img)
        written = []
        view_dir = out_dir / src.stem
        view_dir.mkdir(parents=True, exist_ok=True)
        for i, view in enumerate(views):
            p = view_dir / f"view_{i:03d}.png"
            write_png(p, view)
            written.append(str(p))
        return written

    outputs = [str(out_dir / "policy.tsv")]
    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for written in pool.map(run_one, sources):
                outputs.extend(written)
    else:
        for src in sources:
            outputs.extend(run_one(src))
    return _finish(args, inputs=[str(s) for s in sources], outputs=outputs,
                   seeds={}, manifest_path=out_dir / "run_manifest.json")


# --- learn -------------------------------------------------------------------

_MODE_FLAGS = {"class": WeightMode.PER_AUGMENTATION_CLASS, "aug": WeightMode.PER_AUGMENTATION}


def cmd_learn(args) -> int:
    tr = read_predictions(args.preds)
    tr_y = read_labels(args.labels)
    va = read_predictions(args.val_preds)
    va_y = read_labels(args.val_labels)
    cfg = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    chosen_mode = args.mode
    if args.mode == "auto":
        class_agg = train(tr, tr_y, va, va_y, WeightMode.PER_AUGMENTATION_CLASS, cfg)
        aug_agg = train(tr, tr_y, va, va_y, WeightMode.PER_AUGMENTATION, cfg)
        agg = select_mode(class_agg, aug_agg, va, va_y)
        chosen_mode = (
            "class" if agg.weights.mode is WeightMode.PER_AUGMENTATION_CLASS else "aug"
        )
    else:
        agg = train(tr, tr_y, va, va_y, _MODE_FLAGS[args.mode], cfg)
    write_weights(args.out, agg.weights)
    val_acc = accuracy(predict(agg, va), va_y)
    return _finish(
        args,
        inputs=[args.preds, args.labels, args.val_preds, args.val_labels],
        outputs=[args.out],
        seeds={"train": args.seed},
        manifest_path=Path(args.out).with_suffix(Path(args.out).suffix + ".manifest.json"),
        extra={"mode_selected": chosen_mode, "validation_accuracy": val_acc},
    )


# --- eval ---------------------------------------------------------------------

def _build_aggregator(args, preds, labels) -> Aggregator:
    m, c = preds.m, preds.c
    if args.method == "raw":
        return Aggregator.raw(m, c)
    if args.method == "mean":
        return Aggregator.mean(m, c)
    if args.method == "gps":
        return gps_search(preds, labels, size=args.gps_size)
    if args.weights is None:
        raise _Usage("--method learned requires --weights")
    return Aggregator.learned(read_weights(args.weights))


def cmd_eval(args) -> int:
    preds = read_predictions(args.preds)
    labels = read_labels(args.labels)
    agg = _build_aggregator(args, preds, labels)
    raw_labels = predict(Aggregator.raw(preds.m, preds.c), preds)
    method_labels = predict(agg, preds)

    accs = {
        "raw": accuracy(raw_labels, labels),
        args.method: accuracy(method_labels, labels),
    }
    changes = corrections_corruptions(raw_labels, method_labels, labels)
    agree = agreement(preds)
    subs = subsample_eval(
        {"raw": raw_labels, args.method: method_labels},
        labels,
        k=args.subsample_k,
        frac=args.subsample_frac,
        seed=args.seed,
    )
    try:
        sig = paired_t_test(subs.accuracies[args.method], subs.accuracies["raw"])
    except DegenerateVariance:
        sig = None

    extra = {"gps_indices": list(agg.indices)} if agg.indices else None
    doc = build_report(args.method, accs, changes, agree, subs, sig, extra)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    write_report_json(report_path, doc)
    csv_path = report_path.with_suffix(".csv")
    write_report_csv(csv_path, doc)
    figures_dir = Path(args.figures) if args.figures else report_path.parent / (
        report_path.stem + "_figures"
    )
    figure_paths = render_figures(doc, figures_dir)
    outputs = [str(report_path), str(csv_path)] + [str(p) for p in figure_paths]
    inputs = [args.preds, args.labels] + ([args.weights] if args.weights else [])
    return _finish(
        args,
        inputs=inputs,
        outputs=outputs,
        seeds={"subsample": args.seed},
        manifest_path=report_path.with_suffix(".manifest.json"),
    )


# --- simulate -------------------------------------------------------------------

def _simulate_invariant(args, out: Path) -> dict:
    world = invariant_world(uniform_world(seed=args.seed))
    tensor, labels = emit(world, args.n)
    write_predictions(out / "preds.ttap", tensor)
    write_labels(out / "labels.ttal", labels)
    expected = {
        "scenario": "invariant",
        "property": "all views are identical; every aggregation method must "
                    "match the raw predictions with zero corrections and "
                    "zero corruptions",
        "n": args.n,
        "m": world.m,
        "c": world.c,
    }
    return expected


def _simulate_planted(args, out: Path) -> dict:
    world = planted_class_asymmetry(seed=args.seed)
    tensor, labels = emit(world, args.n)
    write_predictions(out / "preds.ttap", tensor)
    write_labels(out / "labels.ttal", labels)
    weights, rule, expected_acc = bayes_weights(world)
    write_weights(out / "bayes_theta.ttaw", weights)
    from .simulate import _monotone_rule_accuracies

    expected = {
        "scenario": "planted",
        "optimal_rule": rule,
        "expected_accuracy": expected_acc,
        "rule_accuracies": _monotone_rule_accuracies(world),
        "correct_prob": world.correct_prob.tolist(),
        "property": "class-weighted aggregation with the sidecar weights "
                    "reaches the optimal rule; shared weights cannot beat "
                    "the better of raw and mean",
    }
    return expected


_DATASIZE_FRACTIONS = (0.1, 0.25, 0.5, 1.0)


def _simulate_datasize(args, out: Path) -> dict:
    world = blob_world(seed=args.seed)
    pool_images, pool_labels = world.sample(args.n, seed=args.seed + 1)
    test_images, test_labels = world.sample(max(args.n // 2, 10), seed=args.seed + 2)
    policy = flips_policy()
    nested = subsample_training(np.arange(len(pool_images)), _DATASIZE_FRACTIONS, args.seed)
    write_labels(out / "test_labels.ttal", test_labels)
    tensors = []
    for frac, idx in zip(_DATASIZE_FRACTIONS, nested):
        subset_images = [pool_images[i] for i in idx]
        subset_labels = pool_labels.take(idx)
        clf = train_toy(subset_images, subset_labels, 1.0, ToyTrainConfig(seed=args.seed))
        tensor = toy_logits(clf, test_images, policy)
        name = f"preds_frac{int(frac * 100):03d}.ttap"
        write_predictions(out / name, tensor)
        tensors.append(name)
    (out / "nested_splits.json").write_text(
        json.dumps(
            {
                "fractions": list(_DATASIZE_FRACTIONS),
                "indices": [[int(i) for i in idx] for idx in nested],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return {
        "scenario": "datasize",
        "fractions": list(_DATASIZE_FRACTIONS),
        "tensors": tensors,
        "property": "net improvement of mean TTA over raw is nonincreasing "
                    "in the training fraction",
    }


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    builder = {
        "invariant": _simulate_invariant,
        "planted": _simulate_planted,
        "datasize": _simulate_datasize,
    }[args.scenario]
    expected = builder(args, out)
    (out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")
    outputs = sorted(str(p) for p in out.iterdir())
    return _finish(args, inputs=[], outputs=outputs, seeds={"world": args.seed},
                   manifest_path=out / "run_manifest.json")


# --- plumbing --------------------------------------------------------------------

def _finish(args, inputs, outputs, seeds, manifest_path, extra=None) -> int:
    config = {
        k: v for k, v in vars(args).items() if k not in ("func", "config") and v is not None
    }
    if extra:
        config.update(extra)
    manifest = RunManifest(
        command=args.command,
        config=config,
        seeds=seeds,
        inputs=list(inputs),
        outputs=[str(o) for o in outputs],
        duration_seconds=round(time.monotonic() - args._t0, 6),
    )
    manifest.write(manifest_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttakit",
        description="Test-time augmentation: views, learned aggregation, reports.",
    )
    parser.add_argument("--config", help="key=value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="write policy views for a directory of PNGs")
    p.add_argument("--images", required=True)
    p.add_argument("--policy", required=True, help="standard | expanded | manifest path")
    p.add_argument("--crop-size", type=int, default=224)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("learn", help="train aggregation weights")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--val-preds", required=True)
    p.add_argument("--val-labels", required=True)
    p.add_argument("--mode", choices=("class", "aug", "auto"), default="auto")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="score a method and write report + figures")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--method", choices=("raw", "mean", "gps", "learned"), required=True)
    p.add_argument("--weights")
    p.add_argument("--gps-size", type=int, default=3)
    p.add_argument("--report", required=True)
    p.add_argument("--figures", help="figure directory (default: <report>_figures)")
    p.add_argument("--subsample-k", type=int, default=5)
    p.add_argument("--subsample-frac", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="emit synthetic-world fixtures")
    p.add_argument("--scenario", choices=("invariant", "planted", "datasize"), required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def _subparsers(parser):
    for group_action in parser._subparsers._group_actions:
        yield from group_action.choices.values()


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        cfg_index = argv.index("--config")
        try:
            defaults = _load_config_defaults(argv[cfg_index + 1])
        except (OSError, IndexError, ManifestError) as exc:
            print(f"error: bad config file: {exc}", file=sys.stderr)
            return EXIT_USAGE
        known = {
            action.dest for sp in _subparsers(parser) for action in sp._actions
        }
        bogus = set(defaults) - known
        if bogus:
            print(f"error: unknown config keys {sorted(bogus)}", file=sys.stderr)
            return EXIT_USAGE
        for sp in _subparsers(parser):
            applicable = {
                k: _coerce_default(sp, k, v)
                for k, v in defaults.items()
                if any(action.dest == k for action in sp._actions)
            }
            sp.set_defaults(**applicable)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._t0 = time.monotonic()
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DIMENSION_ERRORS as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except _FORMAT_ERRORS as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    except TTAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _coerce_default(subparser, key: str, value: str):
    for action in subparser._actions:
        if action.dest == key and action.type is not None:
            return action.type(value)
    return value


if __name__ == "__main__":
    sys.exit(main())
