"""Training loop with AdamW, StepLR and best-validation checkpointing, plus multi-seed runs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np

from .data import split, windows
from .evaluate import evaluate
from .model import NumericalError, init_params, loss_and_grad
from .models import (
    CmosConfig,
    CmosParams,
    Dataset,
    EpochRecord,
    OptimizerState,
    RunHistory,
    SeedRun,
    SeedSummary,
    SplitRanges,
    SplitSpec,
    TrainConfig,
)
from .optim import adamw_step, steplr

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Raised when a loss or gradient becomes non-finite during training."""


def _default_splits(dataset: Dataset, cfg: CmosConfig) -> SplitRanges:
    return split(dataset, SplitSpec.for_dataset(dataset.name), cfg.L, cfg.H)


def fit(
    dataset: Dataset,
    cmos_cfg: CmosConfig,
    train_cfg: TrainConfig,
    *,
    splits: SplitRanges | None = None,
    seed: int | None = None,
) -> tuple[CmosParams, RunHistory]:
    """Train one model and return the parameters of the epoch with the lowest validation MSE."""
    splits = splits or _default_splits(dataset, cmos_cfg)
    seed = train_cfg.seeds[0] if seed is None else int(seed)

    params = init_params(cmos_cfg, seed)
    best = params.copy()
    history = RunHistory()
    state = OptimizerState.initial(params)
    stale = 0

    for epoch in range(train_cfg.epochs):
        lr = steplr(train_cfg.lr0, epoch, train_cfg.step_size, train_cfg.gamma)
        loss_sum = 0.0
        seen = 0
        batches = windows(
            dataset,
            splits.train,
            cmos_cfg.L,
            cmos_cfg.H,
            batch_size=train_cfg.batch_size,
            seed=seed,
            epoch=epoch,
        )
        for batch_idx, batch in enumerate(batches):
            try:
                loss, grads = loss_and_grad(batch, params, cmos_cfg)
                if not np.isfinite(loss):
                    raise NumericalError("non-finite loss")
                params, state = adamw_step(params, grads, state, lr, train_cfg)
            except NumericalError as exc:
                logger.error("divergence at epoch %d batch %d: %s", epoch, batch_idx, exc)
                raise DivergenceError(f"training diverged at epoch {epoch}, batch {batch_idx}: {exc}") from exc
            loss_sum += loss * batch.size
            seen += batch.size

        try:
            val_loss = evaluate(params, cmos_cfg, dataset, splits.val).mse
        except NumericalError as exc:
            raise DivergenceError(f"validation diverged after epoch {epoch}: {exc}") from exc
        record = EpochRecord(epoch=epoch, train_loss=loss_sum / seen, val_loss=val_loss, lr=lr)
        logger.info("seed %d epoch %d train=%.6f val=%.6f lr=%.3g", seed, epoch, record.train_loss, val_loss, lr)

        if history.record(record):
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if train_cfg.patience is not None and stale >= train_cfg.patience:
                logger.info("early stop at epoch %d (best epoch %s)", epoch, history.best_epoch)
                break

    return best, history


def _run_seed(
    dataset: Dataset,
    cmos_cfg: CmosConfig,
    train_cfg: TrainConfig,
    splits: SplitRanges,
    seed: int,
    reference: Dataset | None = None,
) -> SeedRun:
    params, history = fit(dataset, cmos_cfg, train_cfg, splits=splits, seed=seed)
    metrics = evaluate(params, cmos_cfg, dataset, splits.test, reference=reference)
    return SeedRun(seed=seed, params=params, history=history, metrics=metrics)


def summarize(runs: list[SeedRun]) -> SeedSummary:
    mses = np.array([run.metrics.mse for run in runs])
    maes = np.array([run.metrics.mae for run in runs])
    return SeedSummary(
        runs=runs,
        mean_mse=float(mses.mean()),
        std_mse=float(mses.std()),
        mean_mae=float(maes.mean()),
        std_mae=float(maes.std()),
    )


def multi_seed(
    dataset: Dataset,
    cmos_cfg: CmosConfig,
    train_cfg: TrainConfig,
    seeds: Sequence[int] | None = None,
    *,
    splits: SplitRanges | None = None,
    workers: int = 1,
    reference: Dataset | None = None,
) -> SeedSummary:
    """Fit once per seed and report per-seed test metrics with their mean and population std.

    `reference` supplies the test targets when they should differ from the
    training series (a clean signal behind a corrupted one).
    """
    seeds = list(train_cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    splits = splits or _default_splits(dataset, cmos_cfg)

    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            futures = [pool.submit(_run_seed, dataset, cmos_cfg, train_cfg, splits, seed, reference) for seed in seeds]
            runs = [future.result() for future in futures]
    else:
        runs = [_run_seed(dataset, cmos_cfg, train_cfg, splits, seed, reference) for seed in seeds]

    summary = summarize(runs)
    logger.info("seeds %s: mse %.6f ± %.6f, mae %.6f ± %.6f", seeds, summary.mean_mse, summary.std_mse, summary.mean_mae, summary.std_mae)
    return summary
