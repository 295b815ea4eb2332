"""Error metrics, parameter accounting and noise-sensitivity checks for linear maps."""

from __future__ import annotations

import numpy as np

from .model import ShapeError
from .models import AveragingCheck, CmosConfig, ParamCount


def _pair(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} does not match truth shape {t.shape}")
    return p, t


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean((p - t) ** 2))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def count_params(cfg: CmosConfig) -> ParamCount:
    """Parameter breakdown; `total` follows the three-part formula and leaves biases out."""
    correlation = cfg.n_matrices * cfg.n_out_chunks * cfg.n_in_chunks
    aggregators = cfg.N * cfg.c if cfg.uses_gating else 0
    allocator = cfg.summary_len * cfg.K if cfg.uses_gating else 0
    bias = cfg.n_matrices * cfg.H
    total = correlation + aggregators + allocator
    return ParamCount(
        correlation_part=correlation,
        aggregators_part=aggregators,
        allocator_part=allocator,
        bias_part=bias,
        total=total,
        total_with_bias=total + bias,
    )


def noise_sensitivity(theta: np.ndarray, sigma: float) -> float:
    """Output variance sigma^2 * ||theta||^2 of a linear map under Gaussian input noise."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    weights = np.asarray(theta, dtype=np.float64).reshape(-1)
    return float(sigma**2 * np.dot(weights, weights))


def _equality_case(theta: np.ndarray, alpha: np.ndarray) -> bool:
    # equality needs every nonzero coefficient and every nonzero weight on one shared index
    support = np.flatnonzero((theta != 0) | (alpha != 0))
    if not np.any(theta != 0):
        return True
    return support.size == 1


def check_averaging_theorem(theta: np.ndarray, alpha: np.ndarray) -> AveragingCheck:
    """Compare the squared weighted average of `theta` with its sum of squares.

    lhs = theta*^2 for theta* = sum(alpha * theta) / sum(alpha) and
    rhs = sum(theta^2). `holds` is lhs <= rhs up to rounding; `equality`
    flags the exact-equality case.
    """
    th = np.asarray(theta, dtype=np.float64).reshape(-1)
    al = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if th.shape != al.shape or th.size == 0:
        raise ShapeError(f"theta {th.shape} and alpha {al.shape} must be nonempty and equal length")
    if np.any(al < 0):
        raise ValueError("alpha must be nonnegative")
    total = al.sum()
    if total <= 0:
        raise ValueError("alpha must have a positive sum")

    averaged = float(np.dot(al, th) / total)
    lhs = averaged * averaged
    rhs = float(np.dot(th, th))
    holds = lhs <= rhs * (1.0 + 1e-12)
    return AveragingCheck(lhs=lhs, rhs=rhs, holds=holds, equality=_equality_case(th, al))
