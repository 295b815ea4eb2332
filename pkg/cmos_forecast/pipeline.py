"""Experiment orchestration: train, evaluate, grid search, ablation and export."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path
from typing import Any, Callable, Sequence

from .ablation import apply_variant, run_ablation
from .constants import (
    ABLATION_DIR,
    ABLATION_VARIANTS,
    CHECKPOINT_FILE,
    CONFIG_FILE,
    ENV_DATA_DIR,
    ENV_THREADS,
    GRID_DIR,
    GRID_FILE,
    HISTORY_FILE,
    HORIZON_DIR_PREFIX,
    METRICS_FILE,
    VARIANT_FULL,
)
from .data import load_csv, split, standardize, train_span
from .evaluate import evaluate
from .export import export_interpretability
from .models import (
    CmosConfig,
    CmosParams,
    ConfigError,
    DataError,
    Dataset,
    Metrics,
    RunConfig,
    RunHistory,
    ScalerStats,
    SeedRun,
    SeedSummary,
    SplitRanges,
    SplitSpec,
    TrainConfig,
)
from .periodicity import PeriodError, estimate_period
from .report import build_horizon_report, build_metrics_report
from .state import append_grid_record, load_checkpoint, save_checkpoint, write_history
from .train import fit, multi_seed, summarize
from .utils import ensure_dir, env_int, stable_hash, write_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedData:
    raw: Dataset
    dataset: Dataset
    scaler: ScalerStats
    split_spec: SplitSpec


def resolve_dataset_path(name: str) -> Path:
    """A direct path, or a file under $CMOS_DATA_DIR with or without the .csv suffix."""
    direct = Path(name)
    if direct.is_file():
        return direct
    data_dir = (os.getenv(ENV_DATA_DIR) or "").strip()
    if data_dir:
        for candidate in (Path(data_dir) / name, Path(data_dir) / f"{name}.csv"):
            if candidate.is_file():
                return candidate
    raise DataError(f"dataset not found: {name}")


def _grid_cell(
    dataset: Dataset,
    cfg: CmosConfig,
    train_cfg: TrainConfig,
    splits: SplitRanges,
    seed: int,
) -> tuple[CmosParams, RunHistory, Metrics, Metrics]:
    params, history = fit(dataset, cfg, train_cfg, splits=splits, seed=seed)
    val = evaluate(params, cfg, dataset, splits.val)
    test = evaluate(params, cfg, dataset, splits.test)
    return params, history, val, test


class ExperimentPipeline:
    def __init__(self, config: RunConfig, *, out_dir: str | Path | None = None, workers: int | None = None) -> None:
        self.config = config
        self.out_dir = Path(out_dir or config.out)
        if config.deterministic:
            self.workers = 1
        else:
            self.workers = workers or env_int(ENV_THREADS, 1)
        self._prepared: PreparedData | None = None
        self._periods: dict[int, int | None] = {}

    # ------------------------------------------------------------------ data

    def prepare(self) -> PreparedData:
        if self._prepared is not None:
            return self._prepared
        if not self.config.dataset:
            raise ConfigError("no dataset given (--dataset or the config key 'dataset')")
        raw = load_csv(resolve_dataset_path(self.config.dataset))
        if self.config.split_style:
            spec = SplitSpec.named(self.config.split_style)
        else:
            spec = SplitSpec.for_dataset(raw.name)
        dataset, scaler = standardize(raw, train_span(raw, spec))
        self._prepared = PreparedData(raw=raw, dataset=dataset, scaler=scaler, split_spec=spec)
        return self._prepared

    def splits_for(self, L: int, H: int) -> SplitRanges:
        prepared = self.prepare()
        return split(prepared.dataset, prepared.split_spec, L, H)

    def period_for(self, L: int) -> int | None:
        """Injection period for lookback L: configured, estimated, or None when disabled."""
        if not self.config.pi:
            return None
        if self.config.pi_period is not None:
            return int(self.config.pi_period)
        if L in self._periods:
            return self._periods[L]
        prepared = self.prepare()
        max_lag = self.config.max_lag or min(L, prepared.dataset.n_steps // 4)
        try:
            estimate = estimate_period(prepared.dataset, max(4, max_lag), train_span(prepared.dataset, prepared.split_spec))
            period: int | None = estimate.period
        except PeriodError as exc:
            logger.warning("periodicity injection disabled for L=%d: %s", L, exc)
            period = None
        self._periods[L] = period
        return period

    def cmos_config(
        self,
        *,
        lookback: int | None = None,
        chunk_size: int | None = None,
        experts: int | None = None,
    ) -> CmosConfig:
        L = int(lookback or self.config.lookback)
        return self.config.cmos_config(
            self.prepare().dataset.n_channels,
            period=self.period_for(L),
            lookback=L,
            chunk_size=chunk_size,
            experts=experts,
        )

    # --------------------------------------------------------------- outputs

    def _echo_config(self, cfg: CmosConfig, train_cfg: TrainConfig) -> dict[str, Any]:
        echo = replace(
            self.config,
            lookback=cfg.L,
            horizon=cfg.H,
            chunk_size=cfg.S,
            experts=cfg.K,
            kernel_size=cfg.c,
            channel_strategy=cfg.channel_strategy,
            pi=cfg.pi_enabled,
            pi_period=cfg.pi_period,
            lr=train_cfg.lr0,
        )
        return echo.to_dict()

    def _write_run(
        self,
        out_dir: Path,
        cfg: CmosConfig,
        train_cfg: TrainConfig,
        summary: SeedSummary,
        *,
        variant: str = VARIANT_FULL,
        extra: dict[str, Any] | None = None,
    ) -> dict[str, Any]:
        prepared = self.prepare()
        ensure_dir(out_dir)
        write_json(out_dir / CONFIG_FILE, self._echo_config(cfg, train_cfg))
        for idx, run in enumerate(summary.runs):
            write_history(out_dir / f"history_seed{run.seed}.csv", run.history)
            save_checkpoint(
                out_dir / f"checkpoint_seed{run.seed}.cmos",
                run.params,
                cfg,
                seed=run.seed,
                epoch=run.history.best_epoch,
                val_loss=run.history.best_val_loss,
            )
            if idx == 0:
                write_history(out_dir / HISTORY_FILE, run.history)
                save_checkpoint(
                    out_dir / CHECKPOINT_FILE,
                    run.params,
                    cfg,
                    seed=run.seed,
                    epoch=run.history.best_epoch,
                    val_loss=run.history.best_val_loss,
                )
        meta = {
            "dataset_meta": prepared.raw.to_dict(),
            "split": prepared.split_spec.to_dict(),
            "clamped_channels": list(prepared.scaler.clamped_channels),
        }
        report = build_metrics_report(
            prepared.dataset,
            cfg,
            train_cfg,
            summary,
            variant=variant,
            extra={**meta, **(extra or {})},
        )
        write_json(out_dir / METRICS_FILE, report)
        return report

    # -------------------------------------------------------------- commands

    def _over_horizons(self, command: Callable[[ExperimentPipeline], dict[str, Any]]) -> dict[str, Any]:
        """Run `command` once per configured horizon under <out>/H<h>/ and average the reports."""
        prepared = self.prepare()
        reports: dict[int, dict[str, Any]] = {}
        for H in self.config.horizons:
            out_dir = self.out_dir / f"{HORIZON_DIR_PREFIX}{H}"
            child_config = replace(self.config, horizon=H, horizons=[], out=str(out_dir))
            child = ExperimentPipeline(child_config, out_dir=out_dir, workers=self.workers)
            child._prepared = prepared
            child._periods = self._periods
            logger.info("horizon %d -> %s", H, out_dir)
            reports[H] = command(child)

        document = build_horizon_report(prepared.dataset, reports)
        ensure_dir(self.out_dir)
        write_json(self.out_dir / CONFIG_FILE, self.config.to_dict())
        write_json(self.out_dir / METRICS_FILE, document)
        return document

    def train(self) -> dict[str, Any]:
        if self.config.horizons:
            return self._over_horizons(ExperimentPipeline.train)
        cfg = self.cmos_config()
        train_cfg = self.config.train_config()
        splits = self.splits_for(cfg.L, cfg.H)
        summary = multi_seed(self.prepare().dataset, cfg, train_cfg, splits=splits, workers=self.workers)
        return self._write_run(self.out_dir, cfg, train_cfg, summary)

    def evaluate_checkpoint(self, checkpoint_path: str | Path) -> dict[str, Any]:
        checkpoint = load_checkpoint(checkpoint_path)
        prepared = self.prepare()
        if prepared.dataset.n_channels != checkpoint.cfg.N:
            raise ConfigError(f"checkpoint expects N={checkpoint.cfg.N} channels, dataset has {prepared.dataset.n_channels}")
        splits = self.splits_for(checkpoint.cfg.L, checkpoint.cfg.H)
        test = evaluate(checkpoint.params, checkpoint.cfg, prepared.dataset, splits.test)
        val = evaluate(checkpoint.params, checkpoint.cfg, prepared.dataset, splits.val)
        history = RunHistory(best_epoch=checkpoint.epoch, best_val_loss=checkpoint.val_loss)
        summary = summarize([SeedRun(seed=checkpoint.seed, params=checkpoint.params, history=history, metrics=test)])
        report = build_metrics_report(
            prepared.dataset,
            checkpoint.cfg,
            self.config.train_config(),
            summary,
            extra={"checkpoint": str(checkpoint_path), "val_mse": val.mse, "val_mae": val.mae},
        )
        write_json(self.out_dir / METRICS_FILE, report)
        return report

    def inspect(self, checkpoint_path: str | Path, *, svg: bool = False) -> dict[str, Any]:
        checkpoint = load_checkpoint(checkpoint_path)
        prepared = self.prepare()
        splits = self.splits_for(checkpoint.cfg.L, checkpoint.cfg.H)
        written = export_interpretability(
            checkpoint.params,
            checkpoint.cfg,
            prepared.dataset,
            splits.test,
            self.out_dir,
            svg=svg,
        )
        return {"checkpoint": str(checkpoint_path), "files": [str(path) for path in written]}

    def grid(self) -> dict[str, Any]:
        """Sweep lookback × chunk size × experts × lr on the first seed, select by validation MSE, rerun all seeds."""
        if self.config.horizons:
            return self._over_horizons(ExperimentPipeline.grid)
        prepared = self.prepare()
        seed = self.config.seeds[0]
        grid_path = self.out_dir / GRID_FILE
        ensure_dir(self.out_dir)
        grid_path.unlink(missing_ok=True)

        cells: list[tuple[CmosConfig, TrainConfig, SplitRanges]] = []
        skipped: list[dict[str, Any]] = []
        for L, S, K, lr in product(self.config.lookback_grid, self.config.chunk_grid, self.config.expert_grid, self.config.lr_grid):
            try:
                cfg = self.cmos_config(lookback=L, chunk_size=S, experts=K)
                splits = self.splits_for(L, cfg.H)
            except (ConfigError, DataError) as exc:
                logger.info("skipping grid cell L=%d S=%d K=%d lr=%g: %s", L, S, K, lr, exc)
                skipped.append({"L": L, "S": S, "K": K, "lr": lr, "reason": str(exc)})
                continue
            cells.append((cfg, self.config.train_config(lr=lr), splits))
        if not cells:
            raise ConfigError("every grid cell was skipped")

        args = [(prepared.dataset, cfg, tcfg, splits, seed) for cfg, tcfg, splits in cells]
        if self.workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=min(self.workers, len(args))) as pool:
                futures = [pool.submit(_grid_cell, *item) for item in args]
                results = [future.result() for future in futures]
        else:
            results = [_grid_cell(*item) for item in args]

        best_idx = 0
        for idx, ((cfg, tcfg, _), (params, history, val, test)) in enumerate(zip(cells, results)):
            cell_key = stable_hash(f"{cfg.L}|{cfg.S}|{cfg.K}|{tcfg.lr0!r}", 10)
            cell_dir = self.out_dir / GRID_DIR / f"cell_{cell_key}"
            ensure_dir(cell_dir)
            write_json(cell_dir / CONFIG_FILE, self._echo_config(cfg, tcfg))
            write_history(cell_dir / HISTORY_FILE, history)
            save_checkpoint(cell_dir / CHECKPOINT_FILE, params, cfg, seed=seed, epoch=history.best_epoch, val_loss=history.best_val_loss)
            append_grid_record(
                grid_path,
                {
                    "cell": cell_key,
                    "L": cfg.L,
                    "S": cfg.S,
                    "K": cfg.K,
                    "lr": tcfg.lr0,
                    "pi_period": cfg.pi_period,
                    "val_mse": val.mse,
                    "test_mse": test.mse,
                    "test_mae": test.mae,
                    "best_epoch": history.best_epoch,
                },
            )
            if val.mse < results[best_idx][2].mse:
                best_idx = idx

        best_cfg, best_train, best_splits = cells[best_idx]
        logger.info(
            "grid selected L=%d S=%d K=%d lr=%g (val mse %.6f) out of %d cells",
            best_cfg.L,
            best_cfg.S,
            best_cfg.K,
            best_train.lr0,
            results[best_idx][2].mse,
            len(cells),
        )
        summary = multi_seed(prepared.dataset, best_cfg, best_train, splits=best_splits, workers=self.workers)
        extra = {
            "grid": {
                "cells": len(cells),
                "skipped": skipped,
                "selected": {"L": best_cfg.L, "S": best_cfg.S, "K": best_cfg.K, "lr": best_train.lr0},
                "selected_val_mse": results[best_idx][2].mse,
            }
        }
        report = self._write_run(self.out_dir, best_cfg, best_train, summary, extra=extra)
        write_json(self.out_dir / CONFIG_FILE, self.config.to_dict())
        return report

    def ablate(self, variants: Sequence[str] | None = None) -> dict[str, Any]:
        prepared = self.prepare()
        chosen = list(variants or self.config.variants or ABLATION_VARIANTS)
        base = self.cmos_config()
        train_cfg = self.config.train_config()
        splits = self.splits_for(base.L, base.H)

        reports: dict[str, Any] = {}
        skipped: dict[str, str] = {}
        for variant in chosen:
            try:
                cfg = apply_variant(base, variant)
            except ConfigError as exc:
                logger.info("skipping variant %s: %s", variant, exc)
                skipped[variant] = str(exc)
                continue
            summary = run_ablation(prepared.dataset, base, variant, train_cfg, splits=splits, workers=self.workers)
            reports[variant] = self._write_run(
                self.out_dir / ABLATION_DIR / variant,
                cfg,
                train_cfg,
                summary,
                variant=variant,
            )

        document = {
            "dataset": prepared.dataset.name,
            "H": base.H,
            "variants": {
                name: {
                    "mean_mse": rep["mean_mse"],
                    "std_mse": rep["std_mse"],
                    "mean_mae": rep["mean_mae"],
                    "std_mae": rep["std_mae"],
                    "param_count": rep["param_count"],
                }
                for name, rep in reports.items()
            },
            "skipped": skipped,
        }
        ensure_dir(self.out_dir)
        write_json(self.out_dir / CONFIG_FILE, self.config.to_dict())
        write_json(self.out_dir / METRICS_FILE, document)
        return document
