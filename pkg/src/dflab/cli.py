"""Command-line front end: ingest, train, evaluate, report.

All artifacts land under ``--out DIR`` with fixed names (manifest.csv,
model.dfl, history.csv, confusion.csv, metrics.csv, roc.csv, roc.svg,
precision_recall.svg, accuracy.svg) so downstream tooling needs no
discovery logic. Flags override an optional ``key = value`` config file.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .datasets import (
    LABEL_NAMES,
    batch_iter,
    read_manifest,
    scan_dataset,
    stratified_split,
    write_manifest,
)
from .errors import DflError, FormatError
from .imaging import PreprocessConfig
from .metrics import (
    auc,
    confusion,
    confusion_to_csv,
    metrics_from_confusion,
    metrics_to_csv,
    roc_curve,
    roc_to_csv,
)
from .models import ModelSpec, forward, load_checkpoint, predict_label, save_checkpoint
from .reporting import REFERENCE_BASELINES, bar_chart_svg, roc_svg, write_text
from .training import TrainConfig, history_to_csv, train_loop

__all__ = ["main", "entry"]


def _load_config_file(path: str | None) -> dict[str, str]:
    """Parse a flat ``key = value`` config file; '#' starts a comment."""
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read config {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


class _Options:
    """Flag values with config-file fallback and per-key defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = _load_config_file(getattr(args, "config", None))

    def get(self, key: str, default, conv):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.cfg:
            raw = self.cfg[key]
            try:
                return conv(raw)
            except ValueError as e:
                raise FormatError(f"config key {key!r}: bad value {raw!r}") from e
        return default

    def str(self, key: str, default: str | None = None) -> str | None:
        return self.get(key, default, str)

    def int(self, key: str, default: int) -> int:
        return self.get(key, default, int)

    def float(self, key: str, default: float) -> float:
        return self.get(key, default, float)

    def size(self, key: str, default: tuple[int, int]) -> tuple[int, int]:
        return self.get(key, default, _parse_size)


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"expected HxW, got {text!r}")
    h, w = (int(p) for p in parts)
    if h < 1 or w < 1:
        raise ValueError("extents must be >= 1")
    return h, w


def _out_dir(opts: _Options) -> Path:
    out = Path(opts.str("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _preprocess_config(opts: _Options, size: tuple[int, int]) -> PreprocessConfig:
    return PreprocessConfig(
        zoom=opts.float("zoom", 0.2),
        out_h=size[0],
        out_w=size[1],
        method=opts.str("resize_method", "bilinear"),
    )


def _model_spec(opts: _Options, size: tuple[int, int]) -> ModelSpec:
    return ModelSpec(
        kind=opts.str("model", "mlp"),
        input_h=size[0],
        input_w=size[1],
        mlp_units=opts.int("units", 128),
        lstm_hidden=opts.int("hidden", 64),
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    opts = _Options(args)
    data = opts.str("data")
    if data is None:
        print("error: --data DIR is required for ingest", file=sys.stderr)
        return 2
    manifest = scan_dataset(data, opts.str("real_dir", "real"), opts.str("fake_dir", "fake"))
    manifest = stratified_split(
        manifest, opts.float("split_fraction", 0.75), opts.int("seed", 0)
    )
    out = _out_dir(opts)
    write_manifest(manifest, out / "manifest.csv")
    counts = manifest.counts()
    totals = {"train": 0, "test": 0}
    for label in sorted(LABEL_NAMES):
        per = {s: counts.get((label, s), 0) for s in ("train", "test")}
        totals["train"] += per["train"]
        totals["test"] += per["test"]
        print(
            f"{LABEL_NAMES[label]}: train={per['train']} test={per['test']} "
            f"total={per['train'] + per['test']}"
        )
    print(
        f"total: train={totals['train']} test={totals['test']} "
        f"total={totals['train'] + totals['test']}"
    )
    print(f"wrote {out / 'manifest.csv'}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    opts = _Options(args)
    out = _out_dir(opts)
    manifest = read_manifest(opts.str("manifest", str(out / "manifest.csv")))
    size = opts.size("size", (64, 64))
    spec = _model_spec(opts, size)
    pp = _preprocess_config(opts, size)
    cfg = TrainConfig(
        learning_rate=opts.float("lr", 0.05),
        epochs=opts.int("epochs", 10),
        batch_size=opts.int("batch", 32),
        seed=opts.int("seed", 0),
    )
    params, history = train_loop(
        spec, cfg, manifest, pp, cache_dir=opts.str("cache_dir"), eval_test=args.eval_test
    )
    save_checkpoint(spec, params, out / "model.dfl")
    history_to_csv(history, out / "history.csv")
    last = history[-1]
    line = f"epoch {last.epoch}: train_loss={last.train_loss:.6f} train_acc={last.train_acc:.4f}"
    if last.test_acc is not None:
        line += f" test_acc={last.test_acc:.4f}"
    print(line)
    print(f"wrote {out / 'model.dfl'} and {out / 'history.csv'}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts = _Options(args)
    out = _out_dir(opts)
    spec, params = load_checkpoint(opts.str("checkpoint", str(out / "model.dfl")))
    manifest = read_manifest(opts.str("manifest", str(out / "manifest.csv")))
    pp = _preprocess_config(opts, (spec.input_h, spec.input_w))
    positive = opts.str("positive_class", "fake")

    probs_parts = []
    labels_parts = []
    for batch in batch_iter(
        manifest, "test", opts.int("batch", 32), 0, pp, cache_dir=opts.str("cache_dir")
    ):
        probs_parts.append(forward(spec, params, batch))
        labels_parts.append(batch.labels)
    probs = np.concatenate(probs_parts)
    labels = np.concatenate(labels_parts)

    cm = confusion(labels, predict_label(probs), positive)
    report = metrics_from_confusion(cm)
    # Scores must rank the chosen positive class; the model scores fakeness.
    pos_scores = probs if positive != "real" else 1.0 - probs
    curve = roc_curve(labels, pos_scores, positive)
    area = auc(curve)

    confusion_to_csv(cm, out / "confusion.csv")
    metrics_to_csv(replace(report, auc=area), out / "metrics.csv")
    roc_to_csv(curve, out / "roc.csv")
    write_text(roc_svg(curve, title=f"ROC ({spec.kind}, positive={positive})"), out / "roc.svg")

    def show(v):
        return "undefined" if v is None else f"{v:.4f}"

    print(
        f"accuracy={show(report.accuracy)} precision={show(report.precision)} "
        f"recall={show(report.recall)} f1={show(report.f1)} auc={area:.4f}"
    )
    print(f"wrote confusion.csv, metrics.csv, roc.csv, roc.svg under {out}")
    return 0


def _read_metrics_csv(path: Path) -> dict[str, float | None]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise FormatError(f"cannot read metrics file {path}: {e}") from e
    if not lines or lines[0] != "metric,value":
        raise FormatError(f"{path}: not a metrics.csv file")
    values: dict[str, float | None] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        name, _, raw = line.partition(",")
        values[name] = None if raw == "undefined" else float(raw)
    return values


def cmd_report(args: argparse.Namespace) -> int:
    opts = _Options(args)
    out = _out_dir(opts)
    labels = args.labels.split(",") if args.labels else None
    if labels is not None and len(labels) != len(args.metrics_files):
        print("error: --labels must name every metrics file", file=sys.stderr)
        return 2
    groups: list[tuple[str, dict[str, float | None]]] = []
    for i, raw in enumerate(args.metrics_files):
        path = Path(raw)
        label = labels[i] if labels else (path.parent.name or path.stem)
        groups.append((label, _read_metrics_csv(path)))
    if args.include_paper_baselines:
        for name, rep in REFERENCE_BASELINES.items():
            groups.append(
                (
                    f"{name} (published)",
                    {
                        "accuracy": rep.accuracy,
                        "precision": rep.precision,
                        "recall": rep.recall,
                        "f1": rep.f1,
                    },
                )
            )
    write_text(
        bar_chart_svg("Precision and recall", groups, ["precision", "recall"]),
        out / "precision_recall.svg",
    )
    write_text(bar_chart_svg("Accuracy", groups, ["accuracy"]), out / "accuracy.svg")
    print(f"wrote {out / 'precision_recall.svg'} and {out / 'accuracy.svg'}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags take precedence")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="master seed (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfl", description="Deepfake-image classifier lab: ingest, train, evaluate, report."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="catalog a real/fake image tree and split it")
    _add_common(p)
    p.add_argument("--data", help="dataset root containing the class directories")
    p.add_argument("--real-dir", dest="real_dir", help="real-class subdirectory (default: real)")
    p.add_argument("--fake-dir", dest="fake_dir", help="fake-class subdirectory (default: fake)")
    p.add_argument(
        "--split-fraction",
        dest="split_fraction",
        type=float,
        help="train fraction per class (default: 0.75)",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a model from a manifest")
    _add_common(p)
    p.add_argument("--manifest", help="manifest.csv path (default: OUT/manifest.csv)")
    p.add_argument("--model", choices=("mlp", "lstm"), help="architecture (default: mlp)")
    p.add_argument("--units", type=int, help="first MLP dense width (default: 128)")
    p.add_argument("--hidden", type=int, help="LSTM hidden units (default: 64)")
    p.add_argument("--size", type=_parse_size, help="preprocess target HxW (default: 64x64)")
    p.add_argument("--zoom", type=float, help="central zoom fraction (default: 0.2)")
    p.add_argument("--lr", type=float, help="learning rate (default: 0.05)")
    p.add_argument("--epochs", type=int, help="training epochs (default: 10)")
    p.add_argument("--batch", type=int, help="batch size (default: 32)")
    p.add_argument("--cache-dir", dest="cache_dir", help="on-disk preprocessed-tensor cache")
    p.add_argument("--eval-test", action="store_true", help="record test accuracy per epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the metric suite on the test split")
    _add_common(p)
    p.add_argument("--manifest", help="manifest.csv path (default: OUT/manifest.csv)")
    p.add_argument("--checkpoint", help="model checkpoint (default: OUT/model.dfl)")
    p.add_argument("--batch", type=int, help="evaluation batch size (default: 32)")
    p.add_argument("--zoom", type=float, help="central zoom fraction (default: 0.2)")
    p.add_argument(
        "--positive-class",
        dest="positive_class",
        choices=("real", "fake"),
        help="metric positive class (default: fake)",
    )
    p.add_argument("--cache-dir", dest="cache_dir", help="on-disk preprocessed-tensor cache")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="bar-chart comparison of metric files")
    _add_common(p)
    p.add_argument("metrics_files", nargs="+", help="one or more metrics.csv files")
    p.add_argument("--labels", help="comma-separated group labels, one per file")
    p.add_argument(
        "--include-paper-baselines",
        dest="include_paper_baselines",
        action="store_true",
        help="add published CNN/SVM reference bars, labeled as external",
    )
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DflError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
