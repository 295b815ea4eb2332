"""Self-check suites: finite-difference gradient oracle and the weighted-averaging inequality fuzz."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from .constants import (
    GRADCHECK_INSTANCES,
    GRADCHECK_STEP,
    GRADCHECK_TOLERANCE,
    THEOREM_MAX_DIM,
    THEOREM_TRIALS,
)
from .metrics import check_averaging_theorem
from .model import init_params, loss_and_grad
from .models import CmosConfig, CmosParams, WindowBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradCheckReport:
    instances: int
    max_rel_error: float
    worst_param: str
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True)
class TheoremReport:
    trials: int
    violations: int
    equality_cases: int
    equality_mismatches: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.equality_mismatches == 0

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


def random_tiny_config(rng: np.random.Generator) -> CmosConfig:
    S = int(rng.integers(1, 3))
    L = S * int(rng.integers(2, 5))
    H = S * int(rng.integers(1, 4))
    kernel_sizes = [c for c in (2, 4) if c <= L and (2 * L) % c == 0]
    return CmosConfig(
        L=L,
        H=H,
        S=S,
        K=int(rng.integers(1, 4)),
        c=int(rng.choice(kernel_sizes)),
        N=int(rng.integers(1, 4)),
    )


def random_batch(cfg: CmosConfig, rng: np.random.Generator, size: int = 2) -> WindowBatch:
    return WindowBatch(
        lookback=rng.standard_normal((size, cfg.N, cfg.L)),
        target=rng.standard_normal((size, cfg.N, cfg.H)),
        origin_indices=np.arange(size),
    )


def perturb(params: CmosParams, rng: np.random.Generator) -> CmosParams:
    """Random nonzero bias so its gradient path is exercised away from init."""
    out = params.copy()
    out.bias = rng.uniform(-0.5, 0.5, size=out.bias.shape)
    return out


def numerical_grad(batch: WindowBatch, params: CmosParams, cfg: CmosConfig, step: float = GRADCHECK_STEP) -> CmosParams:
    """Five-point central differences of the loss, one parameter entry at a time."""
    flat = params.flatten()
    grad = np.zeros_like(flat)

    def loss_at(idx: int, offset: float) -> float:
        shifted = flat.copy()
        shifted[idx] = flat[idx] + offset
        return loss_and_grad(batch, CmosParams.from_flat(cfg, shifted), cfg)[0]

    for idx in range(flat.size):
        near = loss_at(idx, step) - loss_at(idx, -step)
        far = loss_at(idx, 2.0 * step) - loss_at(idx, -2.0 * step)
        grad[idx] = (8.0 * near - far) / (12.0 * step)
    return CmosParams.from_flat(cfg, grad)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return np.abs(analytic - numeric) / scale


def compare_gradients(
    batch: WindowBatch,
    params: CmosParams,
    cfg: CmosConfig,
    step: float = GRADCHECK_STEP,
) -> tuple[float, str]:
    """Worst relative error between analytic and numerical gradients, with the parameter name."""
    _, analytic = loss_and_grad(batch, params, cfg)
    numeric = numerical_grad(batch, params, cfg, step)
    worst, worst_name = 0.0, ""
    for name, values in analytic.items():
        if values.size == 0:
            continue
        err = float(relative_error(values, getattr(numeric, name)).max())
        if err > worst:
            worst, worst_name = err, name
    return worst, worst_name


def run_gradcheck(
    instances: int = GRADCHECK_INSTANCES,
    seed: int = 0,
    *,
    step: float = GRADCHECK_STEP,
    tolerance: float = GRADCHECK_TOLERANCE,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    worst, worst_name = 0.0, ""
    for idx in range(instances):
        cfg = random_tiny_config(rng)
        params = perturb(init_params(cfg, int(rng.integers(0, 2**31))), rng)
        err, name = compare_gradients(random_batch(cfg, rng), params, cfg, step)
        if err > worst:
            worst, worst_name = err, name
        if err >= tolerance:
            logger.warning("gradient mismatch on instance %d (%s): rel err %.3g", idx, name, err)
    return GradCheckReport(instances=instances, max_rel_error=worst, worst_param=worst_name, tolerance=tolerance)


def _theorem_draw(rng: np.random.Generator, trial: int, max_dim: int) -> tuple[np.ndarray, np.ndarray]:
    n = int(rng.integers(1, max_dim + 1))
    theta = rng.standard_normal(n)
    alpha = rng.random(n)
    kind = trial % 4
    if kind == 1:
        # sparse weights with at least one positive entry
        alpha[rng.random(n) < 0.5] = 0.0
        alpha[int(rng.integers(0, n))] = rng.random() + 0.1
    elif kind == 2:
        # single shared index: the equality case
        idx = int(rng.integers(0, n))
        alpha = np.zeros(n)
        alpha[idx] = rng.random() + 0.1
        keep = theta[idx]
        theta = np.zeros(n)
        theta[idx] = keep
    elif kind == 3:
        alpha = np.zeros(n)
        alpha[int(rng.integers(0, n))] = 1.0
    return theta, alpha


def run_theorem_fuzz(trials: int = THEOREM_TRIALS, max_dim: int = THEOREM_MAX_DIM, seed: int = 0) -> TheoremReport:
    """Random (theta, alpha >= 0) draws; counts inequality violations and equality misclassifications."""
    rng = np.random.default_rng(seed)
    violations = equality_cases = mismatches = 0
    for trial in range(trials):
        theta, alpha = _theorem_draw(rng, trial, max_dim)
        check = check_averaging_theorem(theta, alpha)
        if not check.holds:
            violations += 1
        observed = bool(np.isclose(check.lhs, check.rhs, rtol=1e-12, atol=0.0))
        equality_cases += int(check.equality)
        if check.equality != observed:
            mismatches += 1
    return TheoremReport(trials=trials, violations=violations, equality_cases=equality_cases, equality_mismatches=mismatches)
