"""Metrics report document."""

from __future__ import annotations

from typing import Any

import numpy as np

from .constants import VARIANT_FULL
from .metrics import count_params
from .models import CmosConfig, Dataset, SeedSummary, TrainConfig


def build_metrics_report(
    dataset: Dataset,
    cfg: CmosConfig,
    train_cfg: TrainConfig,
    summary: SeedSummary,
    *,
    variant: str = VARIANT_FULL,
    extra: dict[str, Any] | None = None,
) -> dict[str, Any]:
    best = summary.best_run
    mean = summary.metrics
    report: dict[str, Any] = {
        "dataset": dataset.name,
        "variant": variant,
        "L": cfg.L,
        "H": cfg.H,
        "S": cfg.S,
        "K": cfg.K,
        "c": cfg.c,
        "N": cfg.N,
        "channel_strategy": cfg.channel_strategy,
        "pi_enabled": cfg.pi_enabled,
        "pi_period": cfg.pi_period,
        "lr": train_cfg.lr0,
        "seeds": [run.seed for run in summary.runs],
        "per_seed": [{"seed": run.seed, "mse": run.metrics.mse, "mae": run.metrics.mae} for run in summary.runs],
        "mean_mse": summary.mean_mse,
        "std_mse": summary.std_mse,
        "mean_mae": summary.mean_mae,
        "std_mae": summary.std_mae,
        "mse_by_step": list(mean.mse_by_step),
        "mae_by_step": list(mean.mae_by_step),
        "n_windows": mean.n_windows,
        "param_count": count_params(cfg).to_dict(),
        "best_epoch": best.history.best_epoch,
        "best_seed": best.seed,
    }
    if extra:
        report.update(extra)
    return report


def build_horizon_report(dataset: Dataset, reports: dict[int, dict[str, Any]]) -> dict[str, Any]:
    """Across-horizon summary: each horizon's seed means, then their plain average."""
    per_horizon = {
        str(H): {
            "mean_mse": rep["mean_mse"],
            "std_mse": rep["std_mse"],
            "mean_mae": rep["mean_mae"],
            "std_mae": rep["std_mae"],
            "L": rep["L"],
            "S": rep["S"],
            "K": rep["K"],
            "param_count": rep["param_count"],
        }
        for H, rep in reports.items()
    }
    return {
        "dataset": dataset.name,
        "horizons": list(reports),
        "per_horizon": per_horizon,
        "mean_mse": float(np.mean([rep["mean_mse"] for rep in reports.values()])),
        "mean_mae": float(np.mean([rep["mean_mae"] for rep in reports.values()])),
    }
