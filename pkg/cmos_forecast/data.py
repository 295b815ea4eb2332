"""Ingestion layer: benchmark CSVs, split protocol, standardization and windowing."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from .constants import DATE_COLUMN_NAMES
from .models import ChunkView, DataError, Dataset, ScalerStats, SplitRange, SplitRanges, SplitSpec, WindowBatch

logger = logging.getLogger(__name__)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return True


def _interval_label(delta: pd.Timedelta) -> str:
    seconds = int(round(delta.total_seconds()))
    if seconds <= 0:
        return ""
    for unit, size in (("d", 86400), ("h", 3600), ("min", 60), ("s", 1)):
        if seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


def _detect_date_column(frame: pd.DataFrame, date_column: str | None) -> str | None:
    if date_column is not None:
        if date_column not in frame.columns:
            raise DataError(f"date column {date_column!r} not found in header")
        return date_column
    for name in frame.columns:
        if str(name).strip().lower() in DATE_COLUMN_NAMES:
            return str(name)
    first = frame.columns[0]
    if len(frame) and not _is_number(str(frame.iloc[0][first]).strip()):
        return str(first)
    return None


def _sample_interval(stamps: pd.Series, path: Path) -> str:
    parsed = pd.to_datetime(stamps, errors="coerce")
    if parsed.isna().any() or len(parsed) < 2:
        return ""
    deltas = parsed.diff().iloc[1:]
    if (deltas <= pd.Timedelta(0)).any():
        row = int(np.argmax((deltas <= pd.Timedelta(0)).to_numpy())) + 3
        raise DataError(f"{path}: rows are not time-ordered at line {row}")
    return _interval_label(deltas.median())


def load_csv(path: str | Path, date_column: str | None = None, *, name: str | None = None) -> Dataset:
    """Read a comma-separated benchmark file with a header row into a Dataset."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"dataset not found: {p}")

    try:
        frame = pd.read_csv(p, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{p}: empty file, header row required") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"{p}: ragged rows ({exc})") from exc

    if frame.empty:
        raise DataError(f"{p}: no data rows")

    missing = frame.isna().any(axis=1).to_numpy()
    if missing.any():
        row = int(np.argmax(missing))
        raise DataError(f"{p}: ragged row at line {row + 2} (expected {len(frame.columns)} fields)")

    date_name = _detect_date_column(frame, date_column)
    numeric_cols = [col for col in frame.columns if col != date_name]
    if not numeric_cols:
        raise DataError(f"{p}: zero numeric columns")

    numeric = frame[numeric_cols].apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        cell = frame[numeric_cols[col]].iloc[row]
        raise DataError(f"{p}: non-numeric value {cell!r} at line {row + 2}, column {numeric_cols[col]!r}")

    interval = _sample_interval(frame[date_name], p) if date_name is not None else ""
    dataset = Dataset(
        values=values,
        channel_names=tuple(str(col) for col in numeric_cols),
        sample_interval=interval,
        name=name or p.stem,
        has_date_column=date_name is not None,
    )
    logger.info("loaded %s: T=%d N=%d interval=%s", dataset.name, dataset.n_steps, dataset.n_channels, interval or "?")
    return dataset


def write_csv(dataset: Dataset, path: str | Path) -> Path:
    """Write a dataset in the format `load_csv` reads (header row, no date column)."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(dataset.values, columns=list(dataset.channel_names))
    frame.to_csv(p, index=False, encoding="utf-8", float_format="%.17g")
    return p


def window_count(span: SplitRange, L: int, H: int, stride: int = 1) -> int:
    usable = span.length - L - H
    if usable < 0:
        return 0
    return usable // stride + 1


def _split_len(ratio: float, total: int) -> int:
    return int(math.floor(ratio * total + 1e-9))


def train_span(dataset: Dataset, spec: SplitSpec) -> SplitRange:
    return SplitRange(start=0, end=_split_len(spec.train_ratio, dataset.n_steps), target_start=0)


def split(dataset: Dataset, spec: SplitSpec, L: int, H: int = 1) -> SplitRanges:
    """Contiguous train/val/test ranges; val and test lookbacks borrow L steps from the previous split."""
    total = dataset.n_steps
    n_train = _split_len(spec.train_ratio, total)
    n_test = _split_len(spec.test_ratio, total)
    n_val = total - n_train - n_test

    ranges = SplitRanges(
        train=SplitRange(start=0, end=n_train, target_start=0),
        val=SplitRange(start=max(0, n_train - L), end=n_train + n_val, target_start=n_train),
        test=SplitRange(start=max(0, total - n_test - L), end=total, target_start=total - n_test),
    )
    for label in ("train", "val", "test"):
        if window_count(ranges.get(label), L, H) < 1:
            raise DataError(f"{label} split of {dataset.name or 'dataset'} (T={total}) is too short for L={L}, H={H}")
    return ranges


def standardize(dataset: Dataset, train_range: SplitRange) -> tuple[Dataset, ScalerStats]:
    """Per-channel z-score with train-split statistics (population std)."""
    if train_range.length <= 0:
        raise DataError("train range is empty")
    train = dataset.values[train_range.start : train_range.end]
    mean = train.mean(axis=0)
    std = train.std(axis=0)

    clamped: list[str] = []
    for idx in np.flatnonzero(std <= 0):
        name = dataset.channel_names[idx]
        logger.warning("channel %r is constant on the train split; std clamped to 1", name)
        clamped.append(name)
    std = np.where(std > 0, std, 1.0)

    scaled = (dataset.values - mean) / std
    stats = ScalerStats(mean=mean, std=std, clamped_channels=tuple(clamped))
    return dataset.with_values(scaled), stats


def apply_scaler(dataset: Dataset, stats: ScalerStats) -> Dataset:
    """Scale another series of the same width with already-fitted statistics."""
    if dataset.n_channels != stats.mean.size:
        raise DataError(f"scaler fitted on {stats.mean.size} channels, dataset has {dataset.n_channels}")
    return dataset.with_values((dataset.values - stats.mean) / stats.std)


def window_origins(span: SplitRange, L: int, H: int, stride: int = 1) -> np.ndarray:
    """Absolute index of the last lookback step of every window, ascending."""
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    if window_count(span, L, H, stride) < 1:
        raise DataError(f"range [{span.start}, {span.end}) admits no window with L={L}, H={H}")
    return np.arange(span.start + L - 1, span.end - H, stride, dtype=np.int64)


def shuffled_origins(origins: np.ndarray, seed: int, epoch: int = 0) -> np.ndarray:
    rng = np.random.default_rng([int(seed), int(epoch)])
    return origins[rng.permutation(origins.size)]


def target_windows(values: np.ndarray, origins: np.ndarray, H: int) -> np.ndarray:
    """B×N×H block of the H steps following each origin."""
    future = np.asarray(origins, dtype=np.int64)[:, None] + np.arange(1, H + 1)
    return np.ascontiguousarray(values[future].transpose(0, 2, 1))


def make_batch(values: np.ndarray, origins: np.ndarray, L: int, H: int) -> WindowBatch:
    origins = np.asarray(origins, dtype=np.int64)
    past = origins[:, None] + np.arange(-L + 1, 1)
    lookback = np.ascontiguousarray(values[past].transpose(0, 2, 1))
    return WindowBatch(lookback=lookback, target=target_windows(values, origins, H), origin_indices=origins)


def windows(
    dataset: Dataset,
    span: SplitRange,
    L: int,
    H: int,
    stride: int = 1,
    batch_size: int = 64,
    *,
    seed: int | None = None,
    epoch: int = 0,
) -> Iterator[WindowBatch]:
    """Yield WindowBatch objects; ordered by origin unless a seed requests a shuffle."""
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    origins = window_origins(span, L, H, stride)
    if seed is not None:
        origins = shuffled_origins(origins, seed, epoch)
    for offset in range(0, origins.size, batch_size):
        yield make_batch(dataset.values, origins[offset : offset + batch_size], L, H)


def chunk(vector: np.ndarray, S: int) -> ChunkView:
    """Reshape a length-L vector into (L/S)×S rows, oldest chunk first."""
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    if S < 1 or vector.size % S:
        raise DataError(f"chunk size {S} does not divide length {vector.size}")
    return ChunkView(chunks=vector.reshape(vector.size // S, S))
