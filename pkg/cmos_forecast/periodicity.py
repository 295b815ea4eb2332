"""Autocorrelation, period estimation and periodicity injection into correlation matrices."""

from __future__ import annotations

import logging

import numpy as np
from scipy.signal import argrelmax
from statsmodels.tsa.stattools import acf as _sm_acf

from .constants import MIN_PERIOD_LAG
from .data import train_span
from .models import Dataset, PeriodEstimate, SplitRange, SplitSpec

logger = logging.getLogger(__name__)


class PeriodError(ValueError):
    """Raised when no period can be estimated or injected."""


def acf(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation r(0..max_lag) normalized by the full-series variance."""
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    if max_lag < 1 or x.size <= max_lag:
        raise PeriodError(f"need 1 <= max_lag < T, got max_lag={max_lag}, T={x.size}")
    if np.ptp(x) == 0:
        raise PeriodError("autocorrelation undefined for a constant series")
    return np.asarray(_sm_acf(x, nlags=max_lag, adjusted=False, fft=True), dtype=np.float64)


def estimate_period(dataset: Dataset, max_lag: int, train_range: SplitRange | None = None) -> PeriodEstimate:
    """Dominant period from the channel-averaged ACF of the train split."""
    if max_lag < 4:
        raise PeriodError(f"max_lag must be >= 4, got {max_lag}")
    span = train_range or train_span(dataset, SplitSpec.for_dataset(dataset.name))
    train = dataset.values[span.start : span.end]

    # one lag past max_lag so a peak at max_lag itself can be recognised
    n_lags = max_lag + 1
    if train.shape[0] <= n_lags:
        raise PeriodError(f"train split has {train.shape[0]} steps, need at least {n_lags + 1} for max_lag={max_lag}")
    curves = []
    for idx, name in enumerate(dataset.channel_names):
        series = train[:, idx]
        if np.ptp(series) == 0:
            logger.warning("channel %r is constant on the train split; excluded from the ACF average", name)
            continue
        curves.append(acf(series, n_lags))
    if not curves:
        raise PeriodError("every channel is constant on the train split")
    mean_acf = np.mean(curves, axis=0)

    peaks = [int(lag) for lag in argrelmax(mean_acf)[0] if MIN_PERIOD_LAG <= lag <= max_lag]
    if not peaks:
        raise PeriodError(f"no local maximum of the ACF in [{MIN_PERIOD_LAG}, {max_lag}]")
    candidates = tuple((lag, float(mean_acf[lag])) for lag in peaks)
    period, value = max(candidates, key=lambda item: (item[1], -item[0]))
    logger.info("estimated period %d (acf=%.4f, %d candidates)", period, value, len(candidates))
    return PeriodEstimate(period=period, acf_value=value, candidates=candidates)


def inject(theta0: np.ndarray, p: int, S: int, L: int, H: int, *, inclusive: bool = False) -> np.ndarray:
    """Write p/L at lag-aligned entries of an Ho×Lc matrix.

    Row i (1-based) receives the value at column j+i for j = Lc-p/S, Lc-2p/S, ...
    down to 1 while i+j < Lc; `inclusive` relaxes the bound to i+j <= Lc.
    """
    if S < 1 or p < S or p % S or L % S or H % S:
        raise PeriodError(f"period {p} must be a positive multiple of chunk size {S}, and S must divide L and H")
    if p > L:
        raise PeriodError(f"period {p} exceeds lookback {L}")
    n_in, n_out, step = L // S, H // S, p // S
    out = np.array(theta0, dtype=np.float64, copy=True)
    if out.shape != (n_out, n_in):
        raise PeriodError(f"matrix shape {out.shape} does not match ({n_out}, {n_in})")

    value = p / L
    for i in range(1, n_out + 1):
        for j in range(n_in - step, 0, -step):
            if i + j < n_in or (inclusive and i + j == n_in):
                out[i - 1, j + i - 1] = value
    return out
