"""Window-by-window scoring of a predictor over one split range."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .data import target_windows, windows
from .model import ShapeError, predict
from .models import CmosConfig, CmosParams, DataError, Dataset, Metrics, SplitRange, WindowBatch

EVAL_BATCH_SIZE = 256

PredictFn = Callable[[WindowBatch], np.ndarray]


def score_windows(
    dataset: Dataset,
    span: SplitRange,
    L: int,
    H: int,
    predict_fn: PredictFn,
    batch_size: int = EVAL_BATCH_SIZE,
    *,
    reference: Dataset | None = None,
) -> Metrics:
    """MSE/MAE of `predict_fn` over every stride-1 window of `span`, overall and per horizon step.

    Lookbacks always come from `dataset`. When `reference` is given the
    targets are read from it at the same time indices instead.
    """
    if reference is not None and reference.values.shape != dataset.values.shape:
        raise DataError(f"reference shape {reference.values.shape} does not match dataset shape {dataset.values.shape}")
    sq_by_step = np.zeros(H)
    abs_by_step = np.zeros(H)
    n_windows = 0
    n_rows = 0
    for batch in windows(dataset, span, L, H, batch_size=batch_size):
        pred = np.asarray(predict_fn(batch), dtype=np.float64)
        if pred.shape != batch.target.shape:
            raise ShapeError(f"predictor returned shape {pred.shape}, expected {batch.target.shape}")
        target = batch.target if reference is None else target_windows(reference.values, batch.origin_indices, H)
        err = pred - target
        sq_by_step += np.sum(err * err, axis=(0, 1))
        abs_by_step += np.sum(np.abs(err), axis=(0, 1))
        n_windows += batch.size
        n_rows += batch.size * batch.target.shape[1]

    mse_steps = sq_by_step / n_rows
    mae_steps = abs_by_step / n_rows
    return Metrics(
        mse=float(mse_steps.mean()),
        mae=float(mae_steps.mean()),
        mse_by_step=tuple(mse_steps.tolist()),
        mae_by_step=tuple(mae_steps.tolist()),
        n_windows=n_windows,
    )


def evaluate(
    params: CmosParams,
    cfg: CmosConfig,
    dataset: Dataset,
    span: SplitRange,
    batch_size: int = EVAL_BATCH_SIZE,
    *,
    reference: Dataset | None = None,
) -> Metrics:
    return score_windows(
        dataset,
        span,
        cfg.L,
        cfg.H,
        lambda batch: predict(batch, params, cfg),
        batch_size,
        reference=reference,
    )
