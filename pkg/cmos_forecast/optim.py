"""AdamW with decoupled weight decay and the StepLR schedule."""

from __future__ import annotations

import numpy as np

from .model import NumericalError
from .models import PARAM_FIELDS, CmosParams, OptimizerState, TrainConfig


def adamw_step(
    params: CmosParams,
    grads: CmosParams,
    state: OptimizerState,
    lr: float,
    cfg: TrainConfig,
) -> tuple[CmosParams, OptimizerState]:
    """One AdamW update; inputs are left untouched, new params and state are returned."""
    if lr < 0:
        raise ValueError(f"learning rate must be nonnegative, got {lr}")
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient in {name}")

    beta1, beta2 = cfg.betas
    step = state.step + 1
    correction1 = 1.0 - beta1**step
    correction2 = 1.0 - beta2**step

    new_params = params.copy()
    new_m = state.m.copy()
    new_v = state.v.copy()
    for name in PARAM_FIELDS:
        p = getattr(new_params, name)
        g = getattr(grads, name)
        m = getattr(new_m, name)
        v = getattr(new_v, name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= lr * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * p)
    return new_params, OptimizerState(m=new_m, v=new_v, step=step)


def steplr(lr0: float, epoch: int, step_size: int = 20, gamma: float = 0.75) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return float(lr0 * gamma ** (epoch // step_size))
