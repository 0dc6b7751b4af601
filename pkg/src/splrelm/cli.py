"""Command-line entry point: train/eval/compare/cycles/bench subcommands.

Every subcommand appends line-delimited JSON records to <out>/reports.jsonl,
renders its figures as PNG files next to them, and prints an aligned text
table. Exit status is 0 only when the run completed with every internal
invariant check passing; any module error becomes a diagnostic on stderr
and a nonzero exit.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import cyclemodel, figures
from .datasets import (Dataset, add_gaussian_noise, load_idx, make_long_tailed,
                       subsample, synthetic_blobs)
from .models import (DEFAULT_EPOCHS, DEFAULT_LAMBDA, DEFAULT_W_MAX,
                     ElmClassifier, OsElmClassifier, SplrClassifier, evaluate,
                     load_checkpoint, save_checkpoint, train_epochs)
from .opcount import OpCounter, count_ops
from .prng import DEFAULT_BASE_SEED
from .reports import append_record, format_table

DATA_DIR_ENV = "SPLRELM_DATA_DIR"

IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class RunConfig:
    """Everything a run depends on; defaults make every field optional and
    a run is reproducible from this record plus the input files."""

    model: str = "splr"              # elm | oselm | splr
    backend: str = "real"            # real | fxp16 (splr only)
    m: int = 512                     # hidden nodes
    epochs: int = DEFAULT_EPOCHS
    eta: float | None = None         # None: backend default step size
    w_max: float = DEFAULT_W_MAX
    threshold: float | None = None   # None: calibrate on the training head
    lam: float = DEFAULT_LAMBDA
    seed: int = DEFAULT_BASE_SEED    # weight-stream base seed + shuffle root
    dataset: str = "synthetic"       # synthetic | mnist | fashion-mnist
    data_dir: str | None = None      # None: $SPLRELM_DATA_DIR
    train_images: str | None = None  # explicit IDX paths override discovery
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_count: int = 5000
    test_count: int = 1000
    stratified: bool = True
    data_seed: int | None = None     # None: reuse the run seed
    noise_sigma: float = 0.0
    noise_split: str = "both"        # train | test | both
    long_tail: bool = False
    synth_dim: int = 64              # feature count for the synthetic set
    out: str = "runs"

    def validate(self) -> "RunConfig":
        checks = {
            "model": self.model in ("elm", "oselm", "splr"),
            "backend": self.backend in ("real", "fxp16"),
            "dataset": self.dataset in ("synthetic", "mnist", "fashion-mnist"),
            "noise_split": self.noise_split in ("train", "test", "both"),
            "m": self.m > 0, "epochs": self.epochs > 0,
            "train_count": self.train_count > 0,
            "test_count": self.test_count > 0,
            "noise_sigma": self.noise_sigma >= 0,
            "synth_dim": self.synth_dim > 0,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            values = ", ".join(f"{n}={getattr(self, n)!r}" for n in bad)
            raise ValueError(f"invalid configuration: {values}")
        return self


_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(convert):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else convert(text)
    return parse


_CONFIG_PARSERS = {
    "model": str, "backend": str, "m": int, "epochs": int,
    "eta": _optional(float), "w_max": float, "threshold": _optional(float),
    "lam": float, "seed": int, "dataset": str, "data_dir": _optional(str),
    "train_images": _optional(str), "train_labels": _optional(str),
    "test_images": _optional(str), "test_labels": _optional(str),
    "train_count": int, "test_count": int, "stratified": _parse_bool,
    "data_seed": _optional(int), "noise_sigma": float, "noise_split": str,
    "long_tail": _parse_bool, "synth_dim": int, "out": str,
}


def parse_config_file(path) -> dict:
    """Line-oriented key=value config; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, "
                                 f"got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _CONFIG_PARSERS[key](value.strip())
    return values


def make_run_config(args) -> RunConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    return RunConfig(**merged).validate()


# -- data loading --------------------------------------------------------------

def _resolve_data_dir(cfg: RunConfig) -> Path:
    root = cfg.data_dir or os.environ.get(DATA_DIR_ENV)
    if not root:
        raise ValueError(f"dataset {cfg.dataset!r} needs a data directory; "
                         f"pass --data-dir or set {DATA_DIR_ENV}")
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"data directory not found: {root}")
    return root


def _idx_pair(root: Path, dataset: str, split: str) -> tuple[Path, Path]:
    images_name, labels_name = IDX_FILES[split]
    for base in (root / dataset, root):
        images, labels = base / images_name, base / labels_name
        if images.is_file() and labels.is_file():
            return images, labels
    raise FileNotFoundError(
        f"missing IDX pair for {dataset} {split}: expected "
        f"{root / dataset / images_name} (or directly under {root})")


def _explicit_pair(cfg: RunConfig, split: str) -> tuple[str, str] | None:
    images = getattr(cfg, f"{split}_images")
    labels = getattr(cfg, f"{split}_labels")
    if images and labels:
        return images, labels
    if images or labels:
        raise ValueError(f"--{split}-images and --{split}-labels "
                         f"must be given together")
    return None


def load_splits(cfg: RunConfig,
                need_train: bool = True) -> tuple[Dataset | None, Dataset]:
    """Produce the train/test pair a run sees, transforms included.

    Explicit IDX path flags take precedence over data-directory discovery;
    the synthetic set is used only when neither is in play.
    """
    data_seed = cfg.seed if cfg.data_seed is None else cfg.data_seed
    explicit = {split: _explicit_pair(cfg, split)
                for split in ("train", "test")}
    if cfg.dataset == "synthetic" and not any(explicit.values()):
        total = synthetic_blobs(cfg.train_count + cfg.test_count,
                                cfg.synth_dim, seed=data_seed)
        train = Dataset(total.features[:cfg.train_count],
                        total.labels[:cfg.train_count], name="blobs-train")
        test = Dataset(total.features[cfg.train_count:],
                       total.labels[cfg.train_count:], name="blobs-test")
    else:
        def full(split):
            pair = explicit[split] or _idx_pair(_resolve_data_dir(cfg),
                                                cfg.dataset, split)
            return load_idx(*pair, name=f"{cfg.dataset}-{split}")

        train = None
        if need_train:
            train_full = full("train")
            train = subsample(train_full,
                              min(cfg.train_count, len(train_full)),
                              data_seed, cfg.stratified)
        test_full = full("test")
        test = subsample(test_full, min(cfg.test_count, len(test_full)),
                         data_seed + 1, cfg.stratified)
    if cfg.long_tail and train is not None:
        train = make_long_tailed(train)
    if cfg.noise_sigma > 0:
        if cfg.noise_split in ("train", "both") and train is not None:
            train = add_gaussian_noise(train, cfg.noise_sigma, data_seed + 11)
        if cfg.noise_split in ("test", "both"):
            test = add_gaussian_noise(test, cfg.noise_sigma, data_seed + 12)
    return train, test


# -- model plumbing -------------------------------------------------------------

def _base_seed(cfg: RunConfig) -> int:
    low = cfg.seed & 0xFFFF
    return low if low else DEFAULT_BASE_SEED


def build_model(cfg: RunConfig, input_dim: int):
    if cfg.model == "elm":
        return ElmClassifier(cfg.m, input_dim, _base_seed(cfg), lam=cfg.lam)
    if cfg.model == "oselm":
        return OsElmClassifier(cfg.m, input_dim, _base_seed(cfg), lam=cfg.lam)
    return SplrClassifier(cfg.m, input_dim, _base_seed(cfg),
                          threshold=cfg.threshold, eta=cfg.eta,
                          w_max=cfg.w_max, backend=cfg.backend)


def train_model(cfg: RunConfig, model, train: Dataset):
    """Train in place; returns (epoch history, op counter, wall seconds)."""
    counter = OpCounter()
    start = time.perf_counter()
    history = []
    with count_ops(counter):
        if isinstance(model, SplrClassifier):
            history = train_epochs(model, train, cfg.epochs, cfg.seed)
        elif isinstance(model, OsElmClassifier):
            model.fit_stream(train, lam=cfg.lam)
        else:
            model.fit(train, lam=cfg.lam)
    return history, counter, time.perf_counter() - start


def run_label(cfg: RunConfig) -> str:
    parts = [cfg.model]
    if cfg.model == "splr":
        parts.append(cfg.backend)
    parts.append(f"m{cfg.m}")
    name = cfg.dataset
    if cfg.long_tail:
        name += "-longtail"
    if cfg.noise_sigma > 0:
        name += f"-noise{cfg.noise_sigma:g}"
    parts.extend([name, f"s{cfg.seed}"])
    return "-".join(parts)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ----------------------------------------------------------------

def cmd_train(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    train, test = load_splits(cfg)
    model = build_model(cfg, train.dim)
    history, counter, wall = train_model(cfg, model, train)
    train_metrics = evaluate(model, train)
    test_metrics = evaluate(model, test)

    label = run_label(cfg)
    ckpt_path = out / f"{label}.ckpt"
    save_checkpoint(model, ckpt_path)

    figure_paths = []
    if history:
        figure_paths.append(figures.epoch_curves(
            [{"updates": h.updates, "accuracy": h.accuracy} for h in history],
            out / f"{label}-epochs.png"))
    figure_paths.append(figures.confusion_heatmap(
        test_metrics.confusion, out / f"{label}-confusion.png"))

    record = {
        "command": "train", "run": label, "config": asdict(cfg),
        "train_accuracy": train_metrics.accuracy,
        "test_accuracy": test_metrics.accuracy,
        "updates_per_epoch": [h.updates for h in history],
        "online_accuracy_per_epoch": [h.accuracy for h in history],
        "confusion": test_metrics.confusion,
        "per_class_recall": test_metrics.per_class_recall,
        "wall_time_s": wall, "ops": counter.as_dict(),
        "checkpoint": str(ckpt_path), "figures": figure_paths,
    }
    report_path = out / "reports.jsonl"
    append_record(report_path, record)

    print(f"run: {label}")
    print(f"data: {train.name} ({len(train)} train / {len(test)} test, "
          f"{train.dim} features)")
    if history:
        rows = [[i + 1, h.updates, 100.0 * h.accuracy]
                for i, h in enumerate(history)]
        print(format_table(["epoch", "updates", "online acc %"], rows))
    print(format_table(
        ["split", "accuracy %"],
        [["train", 100.0 * train_metrics.accuracy],
         ["test", 100.0 * test_metrics.accuracy]]))
    print(f"checkpoint: {ckpt_path}")
    print(f"report: {report_path}")
    for path in figure_paths:
        print(f"figure: {path}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    model = load_checkpoint(args.checkpoint)
    _, test = load_splits(cfg, need_train=False)
    if test.dim != model.input_dim:
        raise ValueError(f"checkpoint expects {model.input_dim} features but "
                         f"{test.name} has {test.dim}")
    metrics = evaluate(model, test)

    label = f"eval-{Path(args.checkpoint).stem}"
    figure_path = figures.confusion_heatmap(metrics.confusion,
                                            out / f"{label}-confusion.png")
    record = {
        "command": "eval", "run": label, "config": asdict(cfg),
        "checkpoint": str(args.checkpoint),
        "test_accuracy": metrics.accuracy,
        "confusion": metrics.confusion,
        "per_class_recall": metrics.per_class_recall,
        "figures": [figure_path],
    }
    report_path = out / "reports.jsonl"
    append_record(report_path, record)

    print(f"checkpoint: {args.checkpoint} "
          f"(kind {model.kind}, M={model.hidden_count})")
    print(f"data: {test.name} ({len(test)} samples)")
    print(format_table(["metric", "value"],
                       [["test accuracy %", 100.0 * metrics.accuracy]]))
    rows = [[c, int(count), 100.0 * metrics.per_class_recall[c]]
            for c, count in enumerate(metrics.confusion.sum(axis=1))]
    print(format_table(["class", "samples", "recall %"], rows))
    print(f"report: {report_path}")
    print(f"figure: {figure_path}")
    return 0


COMPARE_VARIANTS = (("elm", "real"), ("oselm", "real"),
                    ("splr", "real"), ("splr", "fxp16"))


def cmd_compare(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    train, test = load_splits(cfg)
    results = []
    for model_kind, backend in COMPARE_VARIANTS:
        variant = replace(cfg, model=model_kind, backend=backend).validate()
        model = build_model(variant, train.dim)
        history, _, wall = train_model(variant, model, train)
        train_metrics = evaluate(model, train)
        test_metrics = evaluate(model, test)
        label = model_kind if model_kind != "splr" else f"splr-{backend}"
        results.append({
            "label": label, "model": model_kind, "backend": backend,
            "train_accuracy": train_metrics.accuracy,
            "test_accuracy": test_metrics.accuracy,
            "updates": sum(h.updates for h in history) if history else None,
            "wall_time_s": wall,
        })

    by_label = {r["label"]: r for r in results}
    gaps = {
        "splr_real_vs_elm_test": by_label["elm"]["test_accuracy"]
        - by_label["splr-real"]["test_accuracy"],
        "splr_real_vs_elm_train": by_label["elm"]["train_accuracy"]
        - by_label["splr-real"]["train_accuracy"],
        "splr_fxp16_vs_real_test": by_label["splr-real"]["test_accuracy"]
        - by_label["splr-fxp16"]["test_accuracy"],
    }

    figure_path = figures.accuracy_bars(results, out / "compare-accuracy.png")
    record = {"command": "compare", "config": asdict(cfg), "results": results,
              "gaps": gaps, "figures": [figure_path]}
    report_path = out / "reports.jsonl"
    append_record(report_path, record)

    rows = [[r["label"], 100.0 * r["train_accuracy"],
             100.0 * r["test_accuracy"],
             r["updates"] if r["updates"] is not None else "-",
             round(r["wall_time_s"], 2)] for r in results]
    print(f"data: {train.name} ({len(train)} train / {len(test)} test, "
          f"M={cfg.m})")
    print(format_table(
        ["model", "train acc %", "test acc %", "updates", "wall s"], rows))
    print(f"online rule vs closed-form degradation, test: "
          f"{100.0 * gaps['splr_real_vs_elm_test']:+.2f} points")
    print(f"online rule vs closed-form degradation, train: "
          f"{100.0 * gaps['splr_real_vs_elm_train']:+.2f} points")
    print(f"fixed-point vs real degradation, test: "
          f"{100.0 * gaps['splr_fxp16_vs_real_test']:+.2f} points")
    print(f"report: {report_path}")
    print(f"figure: {figure_path}")
    return 0


def cmd_cycles(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    if args.hidden is not None:
        configs = [cyclemodel.HwConfig(d=args.input_dim, m=args.hidden,
                                       p=args.pipeline, f_max=args.clock)]
    else:
        configs = list(cyclemodel.REFERENCE_CONFIGS)

    rows = []
    for hw in configs:
        train_cc = cyclemodel.train_cycles_worst(hw)
        infer_cc = cyclemodel.infer_cycles(hw)
        row = {
            "m": hw.m, "d": hw.d, "p": hw.p, "f_max": hw.f_max,
            "train_cycles": train_cc, "infer_cycles": infer_cc,
            "train_fps": int(round(cyclemodel.fps(hw, train_cc))),
            "infer_fps": int(round(cyclemodel.fps(hw, infer_cc))),
            "reported_train_fps": cyclemodel.REPORTED_TRAIN_FPS_M1700
            if hw.m == 1700 else None,
            "reported_infer_fps": cyclemodel.REPORTED_INFER_FPS_M1700
            if hw.m == 1700 else None,
        }
        rows.append(row)

    figure_path = figures.cycles_chart(rows, out / "cycles.png")
    record = {"command": "cycles", "config": asdict(cfg), "rows": rows,
              "note": cyclemodel.DISCREPANCY_NOTE, "figures": [figure_path]}
    report_path = out / "reports.jsonl"
    append_record(report_path, record)

    table = [[r["m"], r["f_max"], r["train_cycles"], r["infer_cycles"],
              r["train_fps"], r["infer_fps"],
              r["reported_train_fps"] if r["reported_train_fps"] else "-",
              r["reported_infer_fps"] if r["reported_infer_fps"] else "-"]
             for r in rows]
    print(format_table(
        ["M", "MHz", "train cc", "infer cc", "train fps", "infer fps",
         "quoted train fps", "quoted infer fps"], table))
    print(cyclemodel.DISCREPANCY_NOTE)
    print(f"report: {report_path}")
    print(f"figure: {figure_path}")
    return 0


def cmd_bench(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    m_values = [int(v) for v in args.m_values.split(",") if v.strip()]
    report = cyclemodel.complexity_report(m_values, samples=args.samples,
                                          input_dim=args.input_dim,
                                          seed=cfg.seed)
    rows_data = [{"m": r.m, "elm_solve_ops": r.elm_solve_ops,
                  "elm_total_ops": r.elm_total_ops,
                  "splr_ops_per_update": r.splr_ops_per_update,
                  "splr_update_mults": r.splr_update_mults,
                  "splr_updates": r.splr_updates} for r in report.rows]

    figure_path = figures.complexity_loglog(rows_data, report.elm_slope,
                                            report.splr_slope,
                                            out / "complexity.png")
    record = {"command": "bench", "config": asdict(cfg), "rows": rows_data,
              "elm_slope": report.elm_slope, "splr_slope": report.splr_slope,
              "figures": [figure_path]}
    report_path = out / "reports.jsonl"
    append_record(report_path, record)

    table = [[r.m, r.elm_solve_ops, round(r.splr_ops_per_update, 1),
              r.splr_update_mults, r.splr_updates] for r in report.rows]
    print(format_table(
        ["M", "solve ops", "update ops/miss", "update mults", "updates"],
        table))
    print(f"least-squares solve growth exponent: {report.elm_slope:.3f} "
          f"(cubic expected)")
    print(f"sparse update growth exponent: {report.splr_slope:.3f} "
          f"(linear expected)")
    total_mults = sum(r.splr_update_mults for r in report.rows)
    print(f"multiplications in the update path: {total_mults}")
    print(f"report: {report_path}")
    print(f"figure: {figure_path}")
    return 0


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int,
                        help="run seed; the low 16 bits seed the weight "
                             "stream (zero falls back to the default)")
    shared.add_argument("--config", help="key=value config file")
    shared.add_argument("--out", help="output directory (default: runs)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset",
                      choices=["synthetic", "mnist", "fashion-mnist"])
    data.add_argument("--data-dir",
                      help=f"directory with IDX files (default: ${DATA_DIR_ENV})")
    data.add_argument("--train-images", help="explicit training-images IDX file")
    data.add_argument("--train-labels", help="explicit training-labels IDX file")
    data.add_argument("--test-images", help="explicit test-images IDX file")
    data.add_argument("--test-labels", help="explicit test-labels IDX file")
    data.add_argument("--subset-train", "--train-count", dest="train_count",
                      type=int, help="training samples to draw (default 5000)")
    data.add_argument("--subset-test", "--test-count", dest="test_count",
                      type=int, help="test samples to draw (default 1000)")
    data.add_argument("--stratified", action=argparse.BooleanOptionalAction,
                      default=None, help="class-balanced subsampling")
    data.add_argument("--data-seed", type=int,
                      help="seed for subsampling and noise (default: --seed)")
    data.add_argument("--noise-sigma", type=float,
                      help="Gaussian feature noise level")
    data.add_argument("--noise-split", choices=["train", "test", "both"])
    data.add_argument("--long-tailed", "--long-tail", dest="long_tail",
                      action=argparse.BooleanOptionalAction, default=None,
                      help="long-tailed training class counts")
    data.add_argument("--synth-dim", type=int,
                      help="synthetic dataset feature count")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=["elm", "oselm", "splr"])
    model.add_argument("--backend", choices=["real", "fxp16"])
    model.add_argument("--hidden", dest="m", type=int, help="hidden nodes M")
    model.add_argument("--epochs", type=int)
    model.add_argument("--eta", type=float, help="update step size")
    model.add_argument("--w-max", type=float, help="weight clip bound")
    model.add_argument("--threshold", type=float,
                       help="fixed hidden threshold (default: calibrated)")
    model.add_argument("--lam", type=float, help="ridge regularizer")

    parser = argparse.ArgumentParser(
        prog="splrelm",
        description="Online sparse-update classifier with least-squares "
                    "baselines, a fixed-point engine, and a hardware "
                    "throughput model.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_train = sub.add_parser("train", parents=[shared, data, model],
                             help="train one model, write checkpoint + report")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", parents=[shared, data],
                            help="evaluate a checkpoint on a test split")
    p_eval.add_argument("checkpoint", help="checkpoint file to evaluate")
    p_eval.set_defaults(func=cmd_eval)

    p_compare = sub.add_parser("compare", parents=[shared, data, model],
                               help="train all model variants on one subset")
    p_compare.set_defaults(func=cmd_compare)

    p_cycles = sub.add_parser("cycles", parents=[shared],
                              help="print the cycle/throughput table")
    p_cycles.add_argument("--hidden", type=int, default=None,
                          help="custom hidden size (default: the three "
                               "published operating points)")
    p_cycles.add_argument("--input-dim", type=int, default=784)
    p_cycles.add_argument("--pipeline", type=int, default=3)
    p_cycles.add_argument("--clock", type=float, default=224.0,
                          help="clock in MHz for a custom row")
    p_cycles.set_defaults(func=cmd_cycles)

    p_bench = sub.add_parser("bench", parents=[shared],
                             help="measure op-count growth against M")
    p_bench.add_argument("--m-values", default="64,128,256,512",
                         help="comma-separated hidden sizes")
    p_bench.add_argument("--samples", type=int, default=240,
                         help="benchmark dataset size")
    p_bench.add_argument("--input-dim", type=int, default=16,
                         help="benchmark feature count")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_run_config(args)
        return args.func(args, cfg)
    except Exception as exc:  # surface any module error as a clean diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
