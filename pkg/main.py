#!/usr/bin/env python3
"""
KAR Learner - Main Entry Point

Usage:
    python main.py synth {sinc|xor|spiral} --out data.csv
    python main.py train data.csv --layers 2,1 --model net.model
    python main.py surface net.model --out grid.csv
    python main.py bench optdigits --data-dir ~/uci --layers 2 --fixed-h 500 --trials 1 --out optdigits.csv

Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric-domain failure.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from src.activation import Activation
from src.data import SincConfig, SpiralConfig, gen_sinc, gen_spiral, gen_xor, load_benchmark, load_table, save_dataset
from src.errors import (
    ClassTooSmall,
    DimensionMismatch,
    DomainViolation,
    ModelFormatError,
    NonFiniteInput,
    NonFiniteIntermediate,
    ParseError,
    UnknownCategory,
    UnknownLabel,
)
from src.evaluation import HIDDEN_GRID, LAYERS_TO_RULE, CVConfig, accuracy, cross_validate, mse
from src.linalg import DEFAULT_LAMBDA, PINV_MODES, SVD_TRUNCATION, PinvConfig
from src.network import NetworkSpec, predict
from src.persistence import (
    atomic_write_frame,
    atomic_write_text,
    load_model,
    read_manifest,
    save_model,
    write_manifest,
)
from src.report import CVReportGenerator, TrainReportGenerator
from src.surface import GridSpec, decision_surface, regression_curve
from src.trainer import DEFAULT_INIT_SCALE, INIT_KINDS, NORMAL_SCALED, TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

BENCHMARKS = ("nursery", "letter", "optdigits")

console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Parameters that parse but make no sense together"""


def setup_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=False)],
        force=True,
    )


def parse_widths(text: str) -> List[int]:
    try:
        widths = [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not widths or any(w < 1 for w in widths):
        raise argparse.ArgumentTypeError(f"widths must be positive integers, got {text!r}")
    return widths


def run_params(args: argparse.Namespace) -> Dict[str, Any]:
    """Effective parameters of a run, as recorded in its manifest"""
    return {key: value for key, value in sorted(vars(args).items()) if key not in ("func", "argv")}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.kind == "sinc":
        dataset = gen_sinc(SincConfig(args.noise, args.replicas, args.seed, args.clean_only))
    elif args.kind == "xor":
        dataset = gen_xor()
    else:
        dataset = gen_spiral(SpiralConfig(args.per_arm, args.arms, args.noise_std, args.turns,
                                          args.r_max, args.seed))
    save_dataset(args.out, dataset)
    write_manifest(args.out, "synth", args.argv, run_params(args))
    console.print(f"✓ {dataset.m} {args.kind} rows written to {args.out}")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    pinv = PinvConfig(args.pinv, args.rcond, args.lam)
    return TrainConfig(seed=args.seed, init=args.init, init_scale=args.init_scale, pinv=pinv,
                       inverse_clip=not args.no_clip)


def cmd_train(args) -> int:
    dataset = load_table(args.data)
    widths = args.layers
    if widths[-1] != dataset.q:
        raise UsageError(f"last layer width {widths[-1]} must equal the {dataset.q} target column(s) of {args.data}")
    spec = NetworkSpec.build(dataset.d, widths, Activation(shift=args.shift))

    console.print(f"🧮 Training {dataset.d} -> {'-'.join(map(str, widths))} on {dataset.m} rows")
    W, report = train(dataset.X, dataset.Y, spec, _train_config(args))
    Y_hat = predict(spec, W, dataset.X)
    if dataset.is_classification:
        score_name, score = "accuracy", accuracy(Y_hat, dataset.labels)
    else:
        score_name, score = "mse", mse(Y_hat, dataset.Y)

    save_model(args.model, spec, W)
    report_path = Path(args.report) if args.report else Path(str(args.model) + ".report")
    atomic_write_text(report_path, report.to_record(include_timing=False) + f"train_{score_name} = {score!r}\n")
    write_manifest(args.model, "train", args.argv, run_params(args))

    for line in TrainReportGenerator(report, score_name, score).summary_lines():
        console.print(f"   {line}")
    console.print(f"💾 Model saved to {args.model}")
    return EXIT_OK


def cmd_surface(args) -> int:
    spec, W = load_model(args.model)
    grid = GridSpec(tuple(args.x_range), tuple(args.y_range), args.resolution)
    frame = decision_surface(spec, W, grid)
    atomic_write_frame(args.out, frame)
    write_manifest(args.out, "surface", args.argv, run_params(args))
    console.print(f"✓ {len(frame)} grid rows written to {args.out}")
    return EXIT_OK


def cmd_curve(args) -> int:
    spec, W = load_model(args.model)
    frame = regression_curve(spec, W, tuple(args.x_range), args.points)
    atomic_write_frame(args.out, frame)
    write_manifest(args.out, "curve", args.argv, run_params(args))
    console.print(f"✓ {len(frame)} curve rows written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    spec, W = load_model(args.model)
    dataset = load_table(args.data)
    if dataset.d != spec.input_dim:
        raise DimensionMismatch(f"model takes {spec.input_dim} inputs, {args.data} has {dataset.d}")
    Y_hat = predict(spec, W, dataset.X)
    if dataset.is_classification:
        name, score = "accuracy", accuracy(Y_hat, dataset.labels)
        console.print(f"🎯 Accuracy: {score:.2f}% on {dataset.m} rows")
    else:
        name, score = "mse", mse(Y_hat, dataset.Y)
        console.print(f"🎯 MSE: {score:.6e} on {dataset.m} rows")
    if args.out:
        atomic_write_text(args.out, f"model = {args.model}\ndata = {args.data}\nrows = {dataset.m}\n{name} = {score!r}\n")
        write_manifest(args.out, "evaluate", args.argv, run_params(args))
    return EXIT_OK


def _bench_dataset(args):
    if args.dataset in BENCHMARKS:
        return load_benchmark(args.dataset, args.data_dir, merge=not args.no_merge)
    return load_table(args.dataset)


def cmd_bench(args) -> int:
    dataset = _bench_dataset(args)
    if not dataset.is_classification:
        raise UsageError(f"{args.dataset} has no label column to stratify on")
    cfg = CVConfig(
        outer_folds=args.folds,
        trials=args.trials,
        inner_folds=args.inner_folds,
        hidden_grid=tuple(args.grid),
        structure_rule=LAYERS_TO_RULE[args.layers],
        seed=args.seed,
        train=_train_config(args),
    )
    console.print(f"📊 {dataset.meta.get('source')}: {dataset.m} rows, {len(dataset.class_names)} classes, "
                  f"{cfg.trials} x {cfg.outer_folds}-fold CV, rule {cfg.structure_rule}")
    report = cross_validate(dataset, cfg, fixed_h=args.fixed_h,
                            reselect_per_fold=args.reselect_per_fold, workers=args.workers)

    out = Path(args.out)
    atomic_write_frame(out, report.to_frame())
    summary = CVReportGenerator(report)
    summary.save_report(out.with_name(out.stem + ".summary.txt"))
    atomic_write_text(out.with_name(out.stem + ".record"), report.to_record())
    write_manifest(out, "bench", args.argv, run_params(args))

    table = Table(title=f"{report.dataset} ({report.structure_rule})")
    table.add_column("Trial", justify="right")
    table.add_column("Mean accuracy (%)", justify="right")
    for trial, mean in report.trial_means().items():
        table.add_row(str(trial), f"{mean:.2f}")
    console.print(table)
    console.print(summary.generate())
    return EXIT_OK


def cmd_replay(args) -> int:
    entries = read_manifest(args.manifest)
    if "argv" not in entries:
        raise UsageError(f"{args.manifest} records no argv")
    argv = json.loads(entries["argv"])
    console.print(f"🔁 Replaying {entries.get('command', '?')}: {' '.join(argv)}")
    return main(argv)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_train_options(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="Seed for the weight initialisation (default: 0)")
    p.add_argument("--init", choices=INIT_KINDS, default=NORMAL_SCALED, help="Initial weight distribution")
    p.add_argument("--init-scale", type=float, default=DEFAULT_INIT_SCALE,
                   help=f"Scale of the initial weights (default: {DEFAULT_INIT_SCALE})")
    p.add_argument("--pinv", choices=PINV_MODES, default=SVD_TRUNCATION, help="Pseudo-inverse method")
    p.add_argument("--rcond", type=float, default=None, help="Relative singular value cutoff (default: eps x max dim)")
    p.add_argument("--lam", type=float, default=DEFAULT_LAMBDA, help="Ridge lambda for ridge_limit mode")
    p.add_argument("--no-clip", action="store_true", help="Fail instead of clipping targets into the activation range")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Gradient-free training of feedforward networks in the kernel and range spaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py synth xor --out xor.csv
  python main.py train xor.csv --layers 2,1 --model xor.model
  python main.py surface xor.model --resolution 101 --out xor_surface.csv
  python main.py bench nursery --data-dir ~/uci --layers 2 --fixed-h 100 --trials 1 --out nursery.csv
        """,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic dataset CSV")
    p.add_argument("kind", choices=("sinc", "xor", "spiral"))
    p.add_argument("--out", required=True, help="Output CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.2, help="sinc: relative noise amplitude (default: 0.2)")
    p.add_argument("--replicas", type=int, default=10, help="sinc: noisy copies of the clean points (default: 10)")
    p.add_argument("--clean-only", action="store_true", help="sinc: the 8 clean points only")
    p.add_argument("--per-arm", type=int, default=500, help="spiral: points per arm (default: 500)")
    p.add_argument("--arms", type=int, default=3, help="spiral: number of arms (default: 3)")
    p.add_argument("--noise-std", type=float, default=0.02, help="spiral: Gaussian noise (default: 0.02)")
    p.add_argument("--turns", type=float, default=1.5, help="spiral: turns per arm (default: 1.5)")
    p.add_argument("--r-max", type=float, default=1.0, help="spiral: outer radius (default: 1.0)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="Train a network on a CSV dataset")
    p.add_argument("data", help="Dataset CSV (x1..xd then label or y1..yq)")
    p.add_argument("--layers", type=parse_widths, required=True, help="Layer widths h_1,...,h_n; h_n = outputs")
    p.add_argument("--model", required=True, help="Output model file")
    p.add_argument("--report", default=None, help="Training report (default: <model>.report)")
    p.add_argument("--shift", type=float, default=0.8, help="Softplus shift (default: 0.8)")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("surface", help="Export a 2-input model's outputs over a grid")
    p.add_argument("model")
    p.add_argument("--x-range", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--y-range", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, default=101, help="Points per axis (default: 101)")
    p.add_argument("--out", required=True, help="Output CSV")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("curve", help="Export a 1-input model's outputs over an interval")
    p.add_argument("model")
    p.add_argument("--x-range", type=float, nargs=2, default=(1.0, 8.0), metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=701)
    p.add_argument("--out", required=True, help="Output CSV")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("evaluate", help="Score a saved model on a dataset")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", default=None, help="Write the score as key = value text")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="Stratified cross-validation benchmark")
    p.add_argument("dataset", help=f"One of {', '.join(BENCHMARKS)} or a dataset CSV")
    p.add_argument("--data-dir", default=os.environ.get("KAR_DATA_DIR", "data"),
                   help="Directory holding the UCI files (default: $KAR_DATA_DIR or data/)")
    p.add_argument("--layers", type=int, choices=sorted(LAYERS_TO_RULE), default=2,
                   help="2: h-q, 3: 2h-h-q, 4: 4h-2h-h-q")
    p.add_argument("--fixed-h", type=int, default=None, help="Skip hidden size selection")
    p.add_argument("--grid", type=parse_widths, default=list(HIDDEN_GRID), help="Hidden sizes to select from")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--inner-folds", type=int, default=10)
    p.add_argument("--reselect-per-fold", action="store_true", help="Select h inside every outer run")
    p.add_argument("--workers", type=int, default=1, help="Processes for the outer runs")
    p.add_argument("--no-merge", action="store_true", help="Keep Nursery's 'recommend' class separate")
    p.add_argument("--out", required=True, help="Per-fold CSV; summary and record are written beside it")
    _add_train_options(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="Re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _fail(message: str, code: int, hint: Optional[str] = None) -> int:
    err_console.print(f"❌ Error: {message}")
    if hint:
        err_console.print(f"💡 {hint}")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    args.argv = argv
    setup_logging(args.verbose, args.quiet)
    logger.debug("%s %s", args.command, run_params(args))

    try:
        return args.func(args)
    except ClassTooSmall as e:
        return _fail(str(e), EXIT_USAGE,
                     "merge the class into a neighbour (Nursery merges 'recommend' into 'very_recom' "
                     "unless --no-merge is given) or lower --folds")
    except (UsageError, DimensionMismatch) as e:
        return _fail(str(e), EXIT_USAGE)
    except DomainViolation as e:
        return _fail(f"layer {e.layer}: {e}", EXIT_NUMERIC, "drop --no-clip to clip targets into the activation range")
    except (NonFiniteInput, NonFiniteIntermediate) as e:
        return _fail(str(e), EXIT_NUMERIC)
    except (OSError, ParseError, UnknownCategory, UnknownLabel, ModelFormatError) as e:
        return _fail(str(e), EXIT_IO)
    except ValueError as e:
        return _fail(str(e), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
