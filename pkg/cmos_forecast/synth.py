"""Synthetic series: sinusoids, Gaussian noise and burst noise with GPD exceedances."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np

from .constants import SYNTH_CHANNELS, SYNTH_LENGTH, SYNTH_PERIOD
from .data import apply_scaler, split, standardize
from .models import BurstSpec, CmosConfig, ConfigError, Dataset, SeedSummary, SplitSpec, TrainConfig
from .train import multi_seed

logger = logging.getLogger(__name__)


def gen_sine(
    T: int,
    period: float,
    amplitude: float = 1.0,
    phase: float | Sequence[float] | None = None,
    n_channels: int = 1,
    *,
    name: str = "sine",
) -> Dataset:
    """Channel n holds amplitude * sin(2*pi*t/period + phase_n).

    A scalar phase is shared by every channel; None spreads the phases
    evenly over [0, 2*pi).
    """
    if period < 2:
        raise ConfigError(f"period must be >= 2, got {period}")
    if T < 2 * period:
        raise ConfigError(f"T={T} must cover at least two periods of {period}")
    if n_channels < 1:
        raise ConfigError(f"n_channels must be >= 1, got {n_channels}")

    if phase is None:
        phases = 2.0 * np.pi * np.arange(n_channels) / n_channels
    elif np.isscalar(phase):
        phases = np.full(n_channels, float(phase))
    else:
        phases = np.asarray(phase, dtype=np.float64)
        if phases.shape != (n_channels,):
            raise ConfigError(f"expected {n_channels} phases, got {phases.size}")

    t = np.arange(T, dtype=np.float64)[:, None]
    values = amplitude * np.sin(2.0 * np.pi * t / period + phases[None, :])
    return Dataset(
        values=values,
        channel_names=tuple(f"ch{n}" for n in range(n_channels)),
        name=name,
    )


def add_gaussian_noise(dataset: Dataset, mu: float, sigma: float, seed: int) -> Dataset:
    if sigma < 0:
        raise ConfigError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(mu, sigma, size=dataset.values.shape)
    return dataset.with_values(dataset.values + noise)


def sample_gpd(rng: np.random.Generator, size: int | tuple[int, ...], scale: float, shape: float) -> np.ndarray:
    """Generalized Pareto draws by inverse CDF (exponential when shape is 0)."""
    u = rng.random(size)
    if shape == 0:
        return -scale * np.log1p(-u)
    return scale * ((1.0 - u) ** (-shape) - 1.0) / shape


def add_burst_noise(dataset: Dataset, spec: BurstSpec, seed: int) -> Dataset:
    """Bernoulli(intensity) burst per cell; magnitude threshold + GPD draw with a random sign."""
    rng = np.random.default_rng(seed)
    events = rng.random(dataset.values.shape) < spec.intensity
    count = int(events.sum())
    magnitudes = spec.threshold + sample_gpd(rng, count, spec.scale, spec.shape)
    signs = rng.choice(np.array([-1.0, 1.0]), size=count)

    values = np.array(dataset.values, copy=True)
    values[events] += signs * magnitudes
    logger.debug("injected %d bursts into %s", count, dataset.name or "dataset")
    return dataset.with_values(values)


@dataclass(frozen=True, eq=False)
class ChunkVsPointResult:
    chunk_cfg: CmosConfig
    point_cfg: CmosConfig
    chunk: SeedSummary
    point: SeedSummary

    @property
    def chunk_wins(self) -> bool:
        return self.chunk.mean_mse <= self.point.mean_mse

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk": {"S": self.chunk_cfg.S, **self.chunk.to_dict()},
            "point": {"S": self.point_cfg.S, **self.point.to_dict()},
            "scored_against": "clean",
            "chunk_wins": self.chunk_wins,
        }


def corrupt(
    dataset: Dataset,
    spec: BurstSpec | None,
    *,
    gaussian_sigma: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Burst noise (when a spec is given), then zero-mean Gaussian noise (when sigma > 0)."""
    if spec is not None:
        dataset = add_burst_noise(dataset, spec, seed)
    if gaussian_sigma > 0:
        dataset = add_gaussian_noise(dataset, 0.0, gaussian_sigma, seed + 1)
    return dataset


def noisy_sine_dataset(
    spec: BurstSpec | None,
    *,
    T: int = SYNTH_LENGTH,
    period: int = SYNTH_PERIOD,
    n_channels: int = SYNTH_CHANNELS,
    gaussian_sigma: float = 0.0,
    seed: int = 0,
) -> Dataset:
    clean = gen_sine(T, period, n_channels=n_channels, name="synthetic")
    return corrupt(clean, spec, gaussian_sigma=gaussian_sigma, seed=seed)


def chunk_vs_point_experiment(
    spec: BurstSpec | None,
    chunk_cfg: CmosConfig,
    train_cfg: TrainConfig,
    point_cfg: CmosConfig | None = None,
    *,
    T: int = SYNTH_LENGTH,
    period: int = SYNTH_PERIOD,
    gaussian_sigma: float = 0.0,
    data_seed: int = 0,
    workers: int = 1,
) -> ChunkVsPointResult:
    """Train chunk-level and point-level models on the same noisy sinusoids and seeds.

    Both models train on the corrupted series and read corrupted lookbacks at
    test time; their forecasts are scored against the clean sinusoid. Clean
    and noisy series share the scaler fitted on the noisy train split.
    """
    point_cfg = point_cfg or replace(chunk_cfg, S=1)
    if replace(point_cfg, S=chunk_cfg.S) != chunk_cfg:
        raise ConfigError("chunk and point configs may differ only in chunk size")
    if chunk_cfg.S <= point_cfg.S:
        raise ConfigError(f"chunk config S={chunk_cfg.S} must exceed point config S={point_cfg.S}")

    clean = gen_sine(T, period, n_channels=chunk_cfg.N, name="synthetic")
    raw = corrupt(clean, spec, gaussian_sigma=gaussian_sigma, seed=data_seed)
    splits = split(raw, SplitSpec.for_dataset(raw.name), chunk_cfg.L, chunk_cfg.H)
    dataset, scaler = standardize(raw, splits.train)
    reference = apply_scaler(clean, scaler)

    chunk = multi_seed(dataset, chunk_cfg, train_cfg, splits=splits, workers=workers, reference=reference)
    point = multi_seed(dataset, point_cfg, train_cfg, splits=splits, workers=workers, reference=reference)
    logger.info("chunk S=%d mse=%.6f vs point mse=%.6f (clean targets)", chunk_cfg.S, chunk.mean_mse, point.mean_mse)
    return ChunkVsPointResult(chunk_cfg=chunk_cfg, point_cfg=point_cfg, chunk=chunk, point=point)
