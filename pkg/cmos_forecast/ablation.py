"""Ablation variants as config transforms, and their training runs."""

from __future__ import annotations

import logging
from dataclasses import replace

from .constants import (
    ABLATION_VARIANTS,
    CHANNEL_PRIVATE_LINE,
    VARIANT_FULL,
    VARIANT_NO_CHUNK,
    VARIANT_NO_CORMIX,
    VARIANT_NO_PI,
    VARIANT_ONE_BUS,
    VARIANT_PRIVATE_LINE,
)
from .models import CmosConfig, ConfigError, Dataset, SeedSummary, SplitRanges, TrainConfig
from .train import multi_seed

logger = logging.getLogger(__name__)


def apply_variant(cfg: CmosConfig, variant: str) -> CmosConfig:
    """Config transformation for one ablation variant."""
    if variant == VARIANT_FULL:
        return cfg
    if variant == VARIANT_NO_CHUNK:
        return replace(cfg, S=1)
    if variant in (VARIANT_NO_CORMIX, VARIANT_ONE_BUS):
        return replace(cfg, K=1)
    if variant == VARIANT_NO_PI:
        return replace(cfg, pi_enabled=False, pi_period=None)
    if variant == VARIANT_PRIVATE_LINE:
        return replace(cfg, K=1, channel_strategy=CHANNEL_PRIVATE_LINE)
    raise ConfigError(f"unknown ablation variant {variant!r}; expected one of {', '.join(ABLATION_VARIANTS)}")


def run_ablation(
    dataset: Dataset,
    base_cfg: CmosConfig,
    variant: str,
    train_cfg: TrainConfig,
    *,
    splits: SplitRanges | None = None,
    workers: int = 1,
) -> SeedSummary:
    """Train and test one variant under the same seeds and splits as the full model."""
    cfg = apply_variant(base_cfg, variant)
    logger.info("ablation %s: S=%d K=%d strategy=%s pi=%s", variant, cfg.S, cfg.K, cfg.channel_strategy, cfg.pi_enabled)
    return multi_seed(dataset, cfg, train_cfg, splits=splits, workers=workers)
