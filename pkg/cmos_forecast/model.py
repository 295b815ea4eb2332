"""CMoS forward pass and hand-derived gradients.

Shapes used throughout: B windows, N channels, L lookback steps, H horizon
steps, S chunk size, Lc = L/S input chunks, Ho = H/S output chunks, M summary
length (2L - c)/c, K correlation matrices (N of them under Private Line).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import softmax

from .models import CmosConfig, CmosParams, MixWeights, NormStats, WindowBatch
from .periodicity import inject


class ShapeError(ValueError):
    """Raised when array shapes disagree with the configured model."""


class NumericalError(FloatingPointError):
    """Raised when a forward intermediate turns non-finite."""


@dataclass(frozen=True, eq=False)
class ForwardCache:
    stats: NormStats
    chunks: np.ndarray
    segments: np.ndarray | None
    z: np.ndarray | None
    mix: MixWeights
    mixed_theta: np.ndarray


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericalError(f"non-finite {name} at index {loc}")


def _lookback(batch: WindowBatch | np.ndarray) -> np.ndarray:
    x = batch.lookback if isinstance(batch, WindowBatch) else batch
    return np.asarray(x, dtype=np.float64)


def normalize(window: np.ndarray, eps: float) -> tuple[np.ndarray, NormStats]:
    """Per-window, per-channel standardization over the last axis."""
    x = np.asarray(window, dtype=np.float64)
    mu = x.mean(axis=-1)
    sigma = x.var(axis=-1)
    stats = NormStats(mu=mu, sigma=sigma, eps=float(eps))
    scale = stats.scale
    # eps=0 on a constant window: the centered values are all zero already
    safe = np.where(scale > 0, scale, 1.0)
    return (x - mu[..., None]) / safe, stats


def denormalize(pred: np.ndarray, stats: NormStats) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape[:-1] != stats.mu.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match stats shape {stats.mu.shape}")
    return pred * stats.scale + stats.mu[..., None]


def _segments(xn: np.ndarray, c: int) -> np.ndarray:
    L = xn.shape[-1]
    if c < 2 or c % 2 or c > L or (L - c) % (c // 2):
        raise ShapeError(f"kernel size {c} is incompatible with window length {L}")
    return sliding_window_view(xn, c, axis=-1)[..., :: c // 2, :]


def aggregate(norm_window: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid cross-correlation with stride c/2, no bias; output length (2L - c)/c."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 1:
        raise ShapeError(f"kernel must be a vector, got shape {kernel.shape}")
    return _segments(np.asarray(norm_window, dtype=np.float64), kernel.size) @ kernel


def allocate(z: np.ndarray, allocator: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if allocator.ndim != 2 or z.shape[-1] != allocator.shape[0]:
        raise ShapeError(f"summary length {z.shape[-1]} does not match allocator shape {allocator.shape}")
    return z @ allocator


def mixing_weights(gamma: np.ndarray) -> np.ndarray:
    return softmax(np.asarray(gamma, dtype=np.float64), axis=-1)


def _check_input(x: np.ndarray, params: CmosParams, cfg: CmosConfig) -> None:
    if x.ndim != 3 or x.shape[1:] != (cfg.N, cfg.L):
        raise ShapeError(f"lookback shape {x.shape} does not match (B, {cfg.N}, {cfg.L})")
    params.check_shapes(cfg)


def forward(batch: WindowBatch | np.ndarray, params: CmosParams, cfg: CmosConfig) -> tuple[np.ndarray, ForwardCache]:
    """Predict B×N×H outputs; the cache feeds `loss_and_grad`."""
    x = _lookback(batch)
    _check_input(x, params, cfg)
    B = x.shape[0]

    xn, stats = normalize(x, cfg.eps)
    chunks = xn.reshape(B, cfg.N, cfg.n_in_chunks, cfg.S)

    if cfg.uses_gating:
        segments = _segments(xn, cfg.c)
        z = np.einsum("bnmu,nu->bnm", segments, params.kernels)
        gamma = allocate(z, params.allocator)
        _check_finite("gamma", gamma)
        w = mixing_weights(gamma)
        mixed_theta = np.einsum("bnk,kij->bnij", w, params.theta)
        mixed_bias = np.einsum("bnk,kis->bnis", w, params.bias)
    else:
        # Private Line: each channel owns its matrix, the gate is the identity
        segments = z = None
        gamma = np.zeros((B, cfg.N, 0))
        w = np.broadcast_to(np.eye(cfg.N), (B, cfg.N, cfg.N))
        mixed_theta = np.broadcast_to(params.theta, (B,) + params.theta.shape)
        mixed_bias = np.broadcast_to(params.bias, (B,) + params.bias.shape)

    yn = (mixed_theta @ chunks + mixed_bias).reshape(B, cfg.N, cfg.H)
    pred = denormalize(yn, stats)
    _check_finite("prediction", pred)

    cache = ForwardCache(
        stats=stats,
        chunks=chunks,
        segments=segments,
        z=z,
        mix=MixWeights(gamma=gamma, w=w),
        mixed_theta=mixed_theta,
    )
    return pred, cache


def predict(batch: WindowBatch | np.ndarray, params: CmosParams, cfg: CmosConfig) -> np.ndarray:
    return forward(batch, params, cfg)[0]


def loss_and_grad(batch: WindowBatch, params: CmosParams, cfg: CmosConfig) -> tuple[float, CmosParams]:
    """Mean squared error over every output and its gradient for each parameter array."""
    pred, cache = forward(batch, params, cfg)
    target = np.asarray(batch.target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ShapeError(f"target shape {target.shape} does not match prediction shape {pred.shape}")

    err = pred - target
    loss = float(np.mean(err * err))
    B = pred.shape[0]

    d_pred = 2.0 * err / err.size
    d_bias_block = (d_pred * cache.stats.scale).reshape(B, cfg.N, cfg.n_out_chunks, cfg.S)
    d_mixed = d_bias_block @ np.swapaxes(cache.chunks, -1, -2)

    grads = params.zeros_like()
    if not cfg.uses_gating:
        grads.theta = d_mixed.sum(axis=0)
        grads.bias = d_bias_block.sum(axis=0)
        return loss, grads

    w = cache.mix.w
    grads.theta = np.einsum("bnk,bnij->kij", w, d_mixed)
    grads.bias = np.einsum("bnk,bnis->kis", w, d_bias_block)

    d_w = np.einsum("kij,bnij->bnk", params.theta, d_mixed) + np.einsum("kis,bnis->bnk", params.bias, d_bias_block)
    d_gamma = w * (d_w - np.sum(w * d_w, axis=-1, keepdims=True))
    grads.allocator = np.einsum("bnm,bnk->mk", cache.z, d_gamma)
    d_z = d_gamma @ params.allocator.T
    grads.kernels = np.einsum("bnm,bnmu->nu", d_z, cache.segments)
    return loss, grads


def init_params(cfg: CmosConfig, seed: int) -> CmosParams:
    """Uniform fan-in init, zero bias, then periodicity injection when enabled."""
    rng = np.random.default_rng(seed)
    shapes = CmosParams.shapes(cfg)

    def uniform(fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = CmosParams(
        theta=uniform(cfg.n_in_chunks, shapes["theta"]),
        bias=np.zeros(shapes["bias"]),
        kernels=uniform(cfg.c, shapes["kernels"]),
        allocator=uniform(cfg.summary_len, shapes["allocator"]),
    )
    if cfg.pi_enabled and cfg.pi_period is not None:
        targets = range(cfg.n_matrices) if not cfg.uses_gating else (0,)
        for k in targets:
            params.theta[k] = inject(
                np.zeros(shapes["theta"][1:]),
                cfg.pi_period,
                cfg.S,
                cfg.L,
                cfg.H,
                inclusive=cfg.pi_inclusive,
            )
    return params
