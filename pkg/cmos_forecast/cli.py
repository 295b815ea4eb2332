"""Command-line surface: train, grid, evaluate, ablate, period, synth, inspect, theorem."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .constants import (
    ABLATION_VARIANTS,
    BURST_INTENSITY,
    BURST_SCALE,
    BURST_SHAPE,
    BURST_THRESHOLD,
    CHANNEL_STRATEGIES,
    CHECKPOINT_FILE,
    GRADCHECK_INSTANCES,
    PERIOD_SEARCH_MAX_LAG,
    SPLIT_RATIOS,
    SYNTH_CHANNELS,
    SYNTH_LENGTH,
    SYNTH_PERIOD,
    THEOREM_MAX_DIM,
    THEOREM_TRIALS,
)
from .data import load_csv, train_span, write_csv
from .gradcheck import run_gradcheck, run_theorem_fuzz
from .model import NumericalError, ShapeError
from .models import BurstSpec, ConfigError, DataError, RunConfig, SplitSpec
from .periodicity import PeriodError, estimate_period
from .pipeline import ExperimentPipeline, resolve_dataset_path
from .state import CheckpointError
from .synth import add_burst_noise, add_gaussian_noise, chunk_vs_point_experiment, gen_sine
from .train import DivergenceError
from .utils import read_json

logger = logging.getLogger(__name__)

# argparse dest -> RunConfig field
OVERRIDES = {
    "dataset": "dataset",
    "split_style": "split_style",
    "lookback": "lookback",
    "horizon": "horizon",
    "horizons": "horizons",
    "chunk_size": "chunk_size",
    "experts": "experts",
    "kernel_size": "kernel_size",
    "pi": "pi",
    "pi_period": "pi_period",
    "pi_inclusive": "pi_inclusive",
    "channel_strategy": "channel_strategy",
    "max_lag": "max_lag",
    "lr": "lr",
    "weight_decay": "weight_decay",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "patience": "patience",
    "seeds": "seeds",
    "lookback_grid": "lookback_grid",
    "chunk_grid": "chunk_grid",
    "expert_grid": "expert_grid",
    "lr_grid": "lr_grid",
    "variants": "variants",
    "out": "out",
    "deterministic": "deterministic",
}

HANDLED_ERRORS = (
    ConfigError,
    DataError,
    PeriodError,
    CheckpointError,
    DivergenceError,
    ShapeError,
    NumericalError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _run_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", default=None, help="JSON run config; flags override its values")
    parent.add_argument("--dataset", default=None)
    parent.add_argument("--split-style", choices=sorted(SPLIT_RATIOS), default=None)
    parent.add_argument("--lookback", type=int, default=None)
    parent.add_argument("--horizon", type=int, default=None)
    parent.add_argument("--chunk-size", type=int, default=None)
    parent.add_argument("--experts", type=int, default=None)
    parent.add_argument("--kernel-size", type=int, default=None)
    parent.add_argument("--pi", action=argparse.BooleanOptionalAction, default=None)
    parent.add_argument("--pi-period", type=int, default=None)
    parent.add_argument("--pi-inclusive", action="store_true", default=None)
    parent.add_argument("--channel-strategy", choices=CHANNEL_STRATEGIES, default=None)
    parent.add_argument("--max-lag", type=int, default=None)
    parent.add_argument("--lr", type=float, default=None)
    parent.add_argument("--weight-decay", type=float, default=None)
    parent.add_argument("--epochs", type=int, default=None)
    parent.add_argument("--batch-size", type=int, default=None)
    parent.add_argument("--patience", type=int, default=None)
    parent.add_argument("--seeds", type=int, nargs="+", default=None)
    parent.add_argument("--out", default=None)
    parent.add_argument("--deterministic", action="store_true", default=None)
    return parent


def _log_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_mutually_exclusive_group()
    group.add_argument("--verbose", action="store_true")
    group.add_argument("--quiet", action="store_true")
    return parent


def build_parser() -> argparse.ArgumentParser:
    logs = _log_options()
    run = _run_options()
    parser = argparse.ArgumentParser(prog="cmos", description="Chunk-wise correlation-mixing forecaster")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", parents=[logs, run], help="train one config over all seeds")
    train.add_argument("--horizons", type=int, nargs="+", default=None, help="run each horizon under <out>/H<h>/ and average")

    grid = sub.add_parser("grid", parents=[logs, run], help="hyper-parameter sweep selected by validation MSE")
    grid.add_argument("--lookback-grid", type=int, nargs="+", default=None)
    grid.add_argument("--chunk-grid", type=int, nargs="+", default=None)
    grid.add_argument("--expert-grid", type=int, nargs="+", default=None)
    grid.add_argument("--lr-grid", type=float, nargs="+", default=None)
    grid.add_argument("--horizons", type=int, nargs="+", default=None, help="run the sweep per horizon under <out>/H<h>/")

    evaluate = sub.add_parser("evaluate", parents=[logs, run], help="score a checkpoint on the test split")
    evaluate.add_argument("--checkpoint", default=None)

    ablate = sub.add_parser("ablate", parents=[logs, run], help="train and score ablation variants")
    ablate.add_argument("--variants", nargs="+", choices=ABLATION_VARIANTS, default=None)

    period = sub.add_parser("period", parents=[logs], help="ACF period estimate")
    period.add_argument("--dataset", required=True)
    period.add_argument("--max-lag", type=int, default=None)
    period.add_argument("--split-style", choices=sorted(SPLIT_RATIOS), default=None)

    synth = sub.add_parser("synth", parents=[logs, run], help="generate a synthetic dataset or run chunk-vs-point")
    synth.add_argument("--length", type=int, default=SYNTH_LENGTH)
    synth.add_argument("--period", type=int, default=SYNTH_PERIOD)
    synth.add_argument("--channels", type=int, default=SYNTH_CHANNELS)
    synth.add_argument("--amplitude", type=float, default=1.0)
    synth.add_argument("--noise", choices=["none", "gaussian", "burst"], default="none")
    synth.add_argument("--sigma", type=float, default=0.1)
    synth.add_argument("--burst-intensity", type=float, default=BURST_INTENSITY)
    synth.add_argument("--burst-threshold", type=float, default=BURST_THRESHOLD)
    synth.add_argument("--burst-scale", type=float, default=BURST_SCALE)
    synth.add_argument("--burst-shape", type=float, default=BURST_SHAPE)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--chunk-vs-point", action="store_true", help="train S>1 and S=1 models on the noisy series")

    inspect = sub.add_parser("inspect", parents=[logs, run], help="export correlation matrices and mixing weights")
    inspect.add_argument("--checkpoint", default=None)
    inspect.add_argument("--svg", action="store_true")

    theorem = sub.add_parser("theorem", parents=[logs], help="gradient oracle and weighted-averaging fuzz suites")
    theorem.add_argument("--trials", type=int, default=THEOREM_TRIALS)
    theorem.add_argument("--max-dim", type=int, default=THEOREM_MAX_DIM)
    theorem.add_argument("--grad-instances", type=int, default=GRADCHECK_INSTANCES)
    theorem.add_argument("--seed", type=int, default=0)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file values, then every flag that was given on the command line."""
    config_path = getattr(args, "config", None)
    if config_path:
        p = Path(config_path)
        if not p.is_file():
            raise FileNotFoundError(f"config file not found: {p}")
        payload = read_json(p)
        if not isinstance(payload, dict):
            raise ConfigError(f"{p}: run config must be a JSON object")
        config = RunConfig.from_dict(payload)
    else:
        config = RunConfig()

    overrides: dict[str, Any] = {}
    for dest, field_name in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[field_name] = list(value) if isinstance(value, list) else value
    return replace(config, **overrides) if overrides else config


def _emit(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False))


def _cmd_period(args: argparse.Namespace) -> int:
    dataset = load_csv(resolve_dataset_path(args.dataset))
    spec = SplitSpec.named(args.split_style) if args.split_style else SplitSpec.for_dataset(dataset.name)
    span = train_span(dataset, spec)
    max_lag = args.max_lag or min(PERIOD_SEARCH_MAX_LAG, span.length // 4)
    estimate = estimate_period(dataset, max_lag, span)
    print(f"p={estimate.period}")
    print(f"acf_value={estimate.acf_value:.6f}")
    print("lag,acf")
    for lag, value in estimate.candidates:
        print(f"{lag},{value:.6f}")
    return 0


def _cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    burst = BurstSpec(
        threshold=args.burst_threshold,
        scale=args.burst_scale,
        shape=args.burst_shape,
        intensity=args.burst_intensity,
    )
    if args.chunk_vs_point:
        cfg = config.cmos_config(args.channels, period=config.pi_period or args.period)
        result = chunk_vs_point_experiment(
            burst if args.noise == "burst" else None,
            cfg,
            config.train_config(),
            T=args.length,
            period=args.period,
            gaussian_sigma=args.sigma if args.noise == "gaussian" else 0.0,
            data_seed=args.seed,
        )
        _emit(result.to_dict())
        return 0

    dataset = gen_sine(args.length, args.period, args.amplitude, None, args.channels, name="synthetic")
    if args.noise == "gaussian":
        dataset = add_gaussian_noise(dataset, 0.0, args.sigma, args.seed)
    elif args.noise == "burst":
        dataset = add_burst_noise(dataset, burst, args.seed)
    target = Path(args.out or "synthetic.csv")
    if target.suffix.lower() != ".csv":
        target = target / "synthetic.csv"
    write_csv(dataset, target)
    _emit({"path": str(target), **dataset.to_dict()})
    return 0


def _cmd_theorem(args: argparse.Namespace) -> int:
    for flag, value in (("--trials", args.trials), ("--max-dim", args.max_dim), ("--grad-instances", args.grad_instances)):
        if value < 1:
            raise ConfigError(f"{flag} must be >= 1, got {value}")
    fuzz = run_theorem_fuzz(args.trials, args.max_dim, args.seed)
    grads = run_gradcheck(args.grad_instances, args.seed)
    _emit({"theorem": fuzz.to_dict(), "gradcheck": grads.to_dict()})
    if not (fuzz.passed and grads.passed):
        print("error: self-check suite failed", file=sys.stderr)
        return 1
    return 0


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "period":
        return _cmd_period(args)
    if args.command == "theorem":
        return _cmd_theorem(args)

    config = load_run_config(args)
    if args.command == "synth":
        return _cmd_synth(args, config)

    pipeline = ExperimentPipeline(config)
    checkpoint = getattr(args, "checkpoint", None) or str(Path(config.out) / CHECKPOINT_FILE)
    if args.command == "train":
        _emit(pipeline.train())
    elif args.command == "grid":
        _emit(pipeline.grid())
    elif args.command == "evaluate":
        _emit(pipeline.evaluate_checkpoint(checkpoint))
    elif args.command == "ablate":
        _emit(pipeline.ablate())
    elif args.command == "inspect":
        _emit(pipeline.inspect(checkpoint, svg=args.svg))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)

    try:
        return _dispatch(args)
    except HANDLED_ERRORS as exc:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
