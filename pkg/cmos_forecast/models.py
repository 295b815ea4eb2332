"""Data contracts for the CMoS forecasting toolkit."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np

from .constants import (
    ABLATION_VARIANTS,
    CHANNEL_MIXING,
    CHANNEL_PRIVATE_LINE,
    CHANNEL_STRATEGIES,
    CHUNK_GRID,
    DEFAULT_ADAM_EPS,
    DEFAULT_BATCH_SIZE,
    DEFAULT_BETAS,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_EXPERTS,
    DEFAULT_HORIZON,
    DEFAULT_KERNEL_SIZE,
    DEFAULT_LOOKBACK,
    DEFAULT_LR,
    DEFAULT_LR_GAMMA,
    DEFAULT_NORM_EPS,
    DEFAULT_SEEDS,
    DEFAULT_STEP_SIZE,
    DEFAULT_WEIGHT_DECAY,
    EXPERT_GRID,
    LOOKBACK_GRID,
    LR_GRID,
    SPLIT_RATIOS,
    SPLIT_STYLE_ETT,
    SPLIT_STYLE_STANDARD,
)


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


class DataError(ValueError):
    """Raised when input data cannot be ingested or windowed."""


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray
    channel_names: tuple[str, ...]
    sample_interval: str = ""
    name: str = ""
    has_date_column: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"dataset values must be a non-empty T×N matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {row}, channel {col}")
        names = tuple(str(name) for name in self.channel_names)
        if len(names) != values.shape[1]:
            raise DataError(f"expected {values.shape[1]} channel names, got {len(names)}")
        if len(set(names)) != len(names):
            raise DataError("channel names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_steps(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_channels(self) -> int:
        return int(self.values.shape[1])

    def with_values(self, values: np.ndarray) -> Dataset:
        return replace(self, values=values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "steps": self.n_steps,
            "channels": self.n_channels,
            "channel_names": list(self.channel_names),
            "sample_interval": self.sample_interval,
            "has_date_column": self.has_date_column,
        }


@dataclass(frozen=True, eq=False)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray
    clamped_channels: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "clamped_channels": list(self.clamped_channels),
        }


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float
    val_ratio: float
    test_ratio: float
    style: str = SPLIT_STYLE_STANDARD

    def __post_init__(self) -> None:
        ratios = (self.train_ratio, self.val_ratio, self.test_ratio)
        if any(r <= 0 for r in ratios):
            raise ConfigError(f"split ratios must be positive, got {ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")

    @classmethod
    def named(cls, style: str) -> SplitSpec:
        if style not in SPLIT_RATIOS:
            raise ConfigError(f"unknown split style: {style}")
        train, val, test = SPLIT_RATIOS[style]
        return cls(train_ratio=train, val_ratio=val, test_ratio=test, style=style)

    @classmethod
    def for_dataset(cls, name: str) -> SplitSpec:
        """ETT-series benchmarks use 6:2:2, everything else 7:1:2."""
        if name.upper().startswith("ETT"):
            return cls.named(SPLIT_STYLE_ETT)
        return cls.named(SPLIT_STYLE_STANDARD)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SplitRange:
    """Half-open window region; targets never start before `target_start`."""

    start: int
    end: int
    target_start: int

    @property
    def length(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SplitRanges:
    train: SplitRange
    val: SplitRange
    test: SplitRange

    def get(self, name: str) -> SplitRange:
        if name not in ("train", "val", "test"):
            raise ConfigError(f"unknown split: {name}")
        return getattr(self, name)

    def to_dict(self) -> dict[str, Any]:
        return {"train": self.train.to_dict(), "val": self.val.to_dict(), "test": self.test.to_dict()}


@dataclass(frozen=True, eq=False)
class WindowBatch:
    lookback: np.ndarray
    target: np.ndarray
    origin_indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.lookback.shape[0])


@dataclass(frozen=True, eq=False)
class ChunkView:
    chunks: np.ndarray

    @property
    def n_chunks(self) -> int:
        return int(self.chunks.shape[0])

    def flatten(self) -> np.ndarray:
        return self.chunks.reshape(-1)


@dataclass(frozen=True)
class CmosConfig:
    L: int
    H: int
    S: int
    K: int
    c: int
    N: int
    eps: float = DEFAULT_NORM_EPS
    pi_enabled: bool = False
    pi_period: int | None = None
    pi_inclusive: bool = False
    channel_strategy: str = CHANNEL_MIXING

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("L", "H", "S", "K", "c", "N"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.L % self.S:
            raise ConfigError(f"chunk size S={self.S} must divide lookback L={self.L}")
        if self.H % self.S:
            raise ConfigError(f"chunk size S={self.S} must divide horizon H={self.H}")
        if self.c % 2:
            raise ConfigError(f"kernel size c={self.c} must be even")
        if self.c > self.L or (2 * self.L) % self.c:
            raise ConfigError(f"kernel size c={self.c} must divide 2L={2 * self.L} and not exceed L")
        if self.eps < 0:
            raise ConfigError(f"eps must be nonnegative, got {self.eps}")
        if self.channel_strategy not in CHANNEL_STRATEGIES:
            raise ConfigError(f"unknown channel strategy: {self.channel_strategy}")
        if self.pi_enabled:
            if self.pi_period is None:
                raise ConfigError("periodicity injection requires a period")
            if self.pi_period % self.S:
                raise ConfigError(f"chunk size S={self.S} must divide period p={self.pi_period}")
            if self.pi_period > self.L:
                raise ConfigError(f"period p={self.pi_period} exceeds lookback L={self.L}")

    @property
    def n_in_chunks(self) -> int:
        return self.L // self.S

    @property
    def n_out_chunks(self) -> int:
        return self.H // self.S

    @property
    def summary_len(self) -> int:
        return (2 * self.L - self.c) // self.c

    @property
    def uses_gating(self) -> bool:
        return self.channel_strategy == CHANNEL_MIXING

    @property
    def n_matrices(self) -> int:
        return self.N if self.channel_strategy == CHANNEL_PRIVATE_LINE else self.K

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> CmosConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**payload)


PARAM_FIELDS = ("theta", "bias", "kernels", "allocator")


@dataclass(eq=False)
class CmosParams:
    theta: np.ndarray
    bias: np.ndarray
    kernels: np.ndarray
    allocator: np.ndarray

    @staticmethod
    def shapes(cfg: CmosConfig) -> dict[str, tuple[int, ...]]:
        n_mat = cfg.n_matrices
        gated_k = cfg.K if cfg.uses_gating else 0
        n_kernels = cfg.N if cfg.uses_gating else 0
        return {
            "theta": (n_mat, cfg.n_out_chunks, cfg.n_in_chunks),
            "bias": (n_mat, cfg.n_out_chunks, cfg.S),
            "kernels": (n_kernels, cfg.c),
            "allocator": (cfg.summary_len, gated_k),
        }

    @classmethod
    def zeros(cls, cfg: CmosConfig) -> CmosParams:
        return cls(**{name: np.zeros(shape) for name, shape in cls.shapes(cfg).items()})

    @classmethod
    def from_flat(cls, cfg: CmosConfig, flat: np.ndarray) -> CmosParams:
        shapes = cls.shapes(cfg)
        expected = sum(int(np.prod(shape)) for shape in shapes.values())
        if flat.size != expected:
            raise ConfigError(f"expected {expected} parameter values, got {flat.size}")
        out: dict[str, np.ndarray] = {}
        offset = 0
        for name in PARAM_FIELDS:
            shape = shapes[name]
            size = int(np.prod(shape))
            out[name] = np.array(flat[offset : offset + size], dtype=np.float64).reshape(shape)
            offset += size
        return cls(**out)

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in PARAM_FIELDS)

    def items(self) -> list[tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in PARAM_FIELDS]

    def flatten(self) -> np.ndarray:
        return np.concatenate([arr.reshape(-1) for arr in self.arrays()])

    def copy(self) -> CmosParams:
        return CmosParams(*(arr.copy() for arr in self.arrays()))

    def zeros_like(self) -> CmosParams:
        return CmosParams(*(np.zeros_like(arr) for arr in self.arrays()))

    @property
    def size(self) -> int:
        return int(sum(arr.size for arr in self.arrays()))

    def check_shapes(self, cfg: CmosConfig) -> None:
        for name, shape in self.shapes(cfg).items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ConfigError(f"parameter {name} has shape {actual}, config expects {shape}")


@dataclass(frozen=True, eq=False)
class NormStats:
    mu: np.ndarray
    sigma: np.ndarray
    eps: float

    @property
    def scale(self) -> np.ndarray:
        """sqrt(sigma + eps), broadcastable over the time axis."""
        return np.sqrt(self.sigma + self.eps)[..., None]


@dataclass(frozen=True, eq=False)
class MixWeights:
    gamma: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class PeriodEstimate:
    period: int
    acf_value: float
    candidates: tuple[tuple[int, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "period": self.period,
            "acf_value": self.acf_value,
            "candidates": [{"lag": lag, "acf": value} for lag, value in self.candidates],
        }


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    betas: tuple[float, float] = DEFAULT_BETAS
    adam_eps: float = DEFAULT_ADAM_EPS
    step_size: int = DEFAULT_STEP_SIZE
    gamma: float = DEFAULT_LR_GAMMA
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    patience: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.lr0 <= 0:
            raise ConfigError(f"lr0 must be positive, got {self.lr0}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"betas must be two values in [0, 1), got {self.betas}")
        if self.adam_eps <= 0:
            raise ConfigError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.step_size < 1:
            raise ConfigError(f"step_size must be >= 1, got {self.step_size}")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1 when set, got {self.patience}")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["betas"] = list(self.betas)
        data["seeds"] = list(self.seeds)
        return data


@dataclass(eq=False)
class OptimizerState:
    m: CmosParams
    v: CmosParams
    step: int = 0

    @classmethod
    def initial(cls, params: CmosParams) -> OptimizerState:
        return cls(m=params.zeros_like(), v=params.zeros_like(), step=0)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class RunHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    best_val_loss: float | None = None

    def record(self, entry: EpochRecord) -> bool:
        """Append an epoch; returns True when it is the new best."""
        self.epochs.append(entry)
        if self.best_val_loss is None or entry.val_loss < self.best_val_loss:
            self.best_val_loss = entry.val_loss
            self.best_epoch = entry.epoch
            return True
        return False

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": [row.to_dict() for row in self.epochs],
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
        }


@dataclass(frozen=True)
class ParamCount:
    correlation_part: int
    aggregators_part: int
    allocator_part: int
    bias_part: int
    total: int
    total_with_bias: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class AveragingCheck:
    lhs: float
    rhs: float
    holds: bool
    equality: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Metrics:
    mse: float
    mae: float
    mse_by_step: tuple[float, ...] = ()
    mae_by_step: tuple[float, ...] = ()
    n_windows: int = 0

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["mse_by_step"] = list(self.mse_by_step)
        data["mae_by_step"] = list(self.mae_by_step)
        return data


@dataclass(eq=False)
class SeedRun:
    seed: int
    params: CmosParams
    history: RunHistory
    metrics: Metrics

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "mse": self.metrics.mse,
            "mae": self.metrics.mae,
            "best_epoch": self.history.best_epoch,
            "best_val_loss": self.history.best_val_loss,
        }


@dataclass(eq=False)
class SeedSummary:
    runs: list[SeedRun]
    mean_mse: float
    std_mse: float
    mean_mae: float
    std_mae: float

    @property
    def metrics(self) -> Metrics:
        """Seed-averaged metrics, per-step curves included."""
        first = self.runs[0].metrics
        return Metrics(
            mse=self.mean_mse,
            mae=self.mean_mae,
            mse_by_step=tuple(np.mean([run.metrics.mse_by_step for run in self.runs], axis=0).tolist()),
            mae_by_step=tuple(np.mean([run.metrics.mae_by_step for run in self.runs], axis=0).tolist()),
            n_windows=first.n_windows,
        )

    @property
    def best_run(self) -> SeedRun:
        """Run with the lowest validation loss; earlier seeds win ties."""
        scored = [run for run in self.runs if run.history.best_val_loss is not None]
        if not scored:
            return self.runs[0]
        return min(scored, key=lambda run: run.history.best_val_loss)

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_seed": [run.to_dict() for run in self.runs],
            "mean_mse": self.mean_mse,
            "std_mse": self.std_mse,
            "mean_mae": self.mean_mae,
            "std_mae": self.std_mae,
        }


@dataclass(frozen=True)
class BurstSpec:
    threshold: float
    scale: float
    shape: float
    intensity: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ConfigError(f"GPD scale must be positive, got {self.scale}")
        if self.shape < 0:
            raise ConfigError(f"GPD shape must be nonnegative, got {self.shape}")
        if not 0 <= self.intensity <= 1:
            raise ConfigError(f"burst intensity must lie in [0, 1], got {self.intensity}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


_INT_FIELDS = ("lookback", "horizon", "chunk_size", "experts", "kernel_size", "step_size", "epochs", "batch_size")
_OPTIONAL_INT_FIELDS = ("pi_period", "max_lag", "patience")
_FLOAT_FIELDS = ("eps", "lr", "weight_decay", "adam_eps", "lr_gamma")
_BOOL_FIELDS = ("pi", "pi_inclusive", "deterministic")
_INT_LIST_FIELDS = ("seeds", "lookback_grid", "chunk_grid", "expert_grid", "horizons")
_FLOAT_LIST_FIELDS = ("betas", "lr_grid")
_STR_FIELDS = ("dataset", "out")


def _config_int(name: str, value: Any) -> int:
    if isinstance(value, (bool, np.bool_)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise ConfigError(f"{name} must be an integer, got {value!r}")


def _config_float(name: str, value: Any) -> float:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, str, np.number)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(number):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return number


def _config_list(name: str, value: Any) -> list[Any]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{name} must be a list, got {value!r}")
    return list(value)


@dataclass
class RunConfig:
    dataset: str = ""
    split_style: str | None = None
    lookback: int = DEFAULT_LOOKBACK
    horizon: int = DEFAULT_HORIZON
    horizons: list[int] = field(default_factory=list)
    chunk_size: int = DEFAULT_CHUNK_SIZE
    experts: int = DEFAULT_EXPERTS
    kernel_size: int = DEFAULT_KERNEL_SIZE
    eps: float = DEFAULT_NORM_EPS
    pi: bool = False
    pi_period: int | None = None
    pi_inclusive: bool = False
    channel_strategy: str = CHANNEL_MIXING
    max_lag: int | None = None
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    betas: list[float] = field(default_factory=lambda: list(DEFAULT_BETAS))
    adam_eps: float = DEFAULT_ADAM_EPS
    step_size: int = DEFAULT_STEP_SIZE
    lr_gamma: float = DEFAULT_LR_GAMMA
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    patience: int | None = None
    lookback_grid: list[int] = field(default_factory=lambda: list(LOOKBACK_GRID))
    chunk_grid: list[int] = field(default_factory=lambda: list(CHUNK_GRID))
    expert_grid: list[int] = field(default_factory=lambda: list(EXPERT_GRID))
    lr_grid: list[float] = field(default_factory=lambda: list(LR_GRID))
    variants: list[str] = field(default_factory=list)
    out: str = "runs/latest"
    deterministic: bool = False

    def __post_init__(self) -> None:
        for name in _INT_FIELDS:
            setattr(self, name, _config_int(name, getattr(self, name)))
        for name in _OPTIONAL_INT_FIELDS:
            if getattr(self, name) is not None:
                setattr(self, name, _config_int(name, getattr(self, name)))
        for name in _FLOAT_FIELDS:
            setattr(self, name, _config_float(name, getattr(self, name)))
        for name in _BOOL_FIELDS:
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be true or false, got {getattr(self, name)!r}")
        for name in _INT_LIST_FIELDS:
            setattr(self, name, [_config_int(name, item) for item in _config_list(name, getattr(self, name))])
        for name in _FLOAT_LIST_FIELDS:
            setattr(self, name, [_config_float(name, item) for item in _config_list(name, getattr(self, name))])
        for name in _STR_FIELDS:
            if not isinstance(getattr(self, name), str):
                raise ConfigError(f"{name} must be a string, got {getattr(self, name)!r}")
        self.variants = [str(item) for item in _config_list("variants", self.variants)]

        if self.split_style is not None and (not isinstance(self.split_style, str) or self.split_style not in SPLIT_RATIOS):
            raise ConfigError(f"unknown split style: {self.split_style!r}")
        for name in ("lookback_grid", "chunk_grid", "expert_grid", "lr_grid", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if not isinstance(self.channel_strategy, str) or self.channel_strategy not in CHANNEL_STRATEGIES:
            raise ConfigError(f"unknown channel strategy: {self.channel_strategy!r}")
        if any(h < 1 for h in self.horizons) or len(set(self.horizons)) != len(self.horizons):
            raise ConfigError(f"horizons must be distinct positive integers, got {self.horizons}")
        unknown = sorted(set(self.variants) - set(ABLATION_VARIANTS))
        if unknown:
            raise ConfigError(f"unknown ablation variants: {unknown}")

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def train_config(self, lr: float | None = None) -> TrainConfig:
        return TrainConfig(
            lr0=float(lr if lr is not None else self.lr),
            weight_decay=self.weight_decay,
            betas=tuple(self.betas),
            adam_eps=self.adam_eps,
            step_size=self.step_size,
            gamma=self.lr_gamma,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seeds=tuple(self.seeds),
            patience=self.patience,
        )

    def cmos_config(
        self,
        n_channels: int,
        *,
        period: int | None = None,
        lookback: int | None = None,
        chunk_size: int | None = None,
        experts: int | None = None,
    ) -> CmosConfig:
        return CmosConfig(
            L=int(lookback or self.lookback),
            H=int(self.horizon),
            S=int(chunk_size or self.chunk_size),
            K=int(experts or self.experts),
            c=int(self.kernel_size),
            N=int(n_channels),
            eps=float(self.eps),
            pi_enabled=bool(self.pi and period is not None),
            pi_period=period if self.pi else None,
            pi_inclusive=bool(self.pi_inclusive),
            channel_strategy=self.channel_strategy,
        )
