"""Project-wide constants for the CMoS forecasting toolkit."""

from __future__ import annotations

SPLIT_STYLE_ETT = "ett"
SPLIT_STYLE_STANDARD = "standard"

SPLIT_RATIOS = {
    SPLIT_STYLE_ETT: (0.6, 0.2, 0.2),
    SPLIT_STYLE_STANDARD: (0.7, 0.1, 0.2),
}

DATE_COLUMN_NAMES = ("date", "timestamp")

# Benchmark datasets: time steps, channels, sample interval, ACF period.
BENCHMARK_DATASETS = {
    "ETTh1": {"steps": 17420, "channels": 7, "interval": "1h", "period": 24},
    "ETTh2": {"steps": 17420, "channels": 7, "interval": "1h", "period": 24},
    "ETTm1": {"steps": 69680, "channels": 7, "interval": "15min", "period": 96},
    "ETTm2": {"steps": 69680, "channels": 7, "interval": "15min", "period": 96},
    "Electricity": {"steps": 26304, "channels": 321, "interval": "1h", "period": 168},
    "Traffic": {"steps": 17544, "channels": 862, "interval": "1h", "period": 168},
    "Weather": {"steps": 52696, "channels": 21, "interval": "10min", "period": 144},
}

# Model defaults.
DEFAULT_NORM_EPS = 1e-5
DEFAULT_LOOKBACK = 336
DEFAULT_HORIZON = 96
DEFAULT_CHUNK_SIZE = 24
DEFAULT_EXPERTS = 4
DEFAULT_KERNEL_SIZE = 8

CHANNEL_MIXING = "mixing"
CHANNEL_PRIVATE_LINE = "private_line"
CHANNEL_STRATEGIES = (CHANNEL_MIXING, CHANNEL_PRIVATE_LINE)

VARIANT_FULL = "full"
VARIANT_NO_CHUNK = "no_chunk"
VARIANT_NO_CORMIX = "no_cormix"
VARIANT_NO_PI = "no_pi"
VARIANT_ONE_BUS = "one_bus"
VARIANT_PRIVATE_LINE = "private_line"
ABLATION_VARIANTS = (
    VARIANT_FULL,
    VARIANT_NO_CHUNK,
    VARIANT_NO_CORMIX,
    VARIANT_NO_PI,
    VARIANT_ONE_BUS,
    VARIANT_PRIVATE_LINE,
)

# Optimizer and schedule.
DEFAULT_LR = 8e-4
DEFAULT_WEIGHT_DECAY = 1e-4
DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_ADAM_EPS = 1e-8
DEFAULT_STEP_SIZE = 20
DEFAULT_LR_GAMMA = 0.75
DEFAULT_EPOCHS = 200
DEFAULT_BATCH_SIZE = 64
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

# Search space.
LOOKBACK_GRID = (96, 336, 720)
CHUNK_GRID = (2, 4, 8, 24)
EXPERT_GRID = (2, 4, 8)
LR_GRID = (2e-5, 5e-5, 8e-5, 8e-4)

# Period search.
PERIOD_SEARCH_MAX_LAG = 200
MIN_PERIOD_LAG = 2

# Burst noise defaults.
BURST_INTENSITY = 0.01
BURST_THRESHOLD = 3.0
BURST_SCALE = 1.0
BURST_SHAPE = 0.2

# Synthetic experiment defaults.
SYNTH_LENGTH = 2400
SYNTH_PERIOD = 24
SYNTH_CHANNELS = 4

# Self-check suites.
THEOREM_TRIALS = 10_000
THEOREM_MAX_DIM = 16
GRADCHECK_INSTANCES = 100
GRADCHECK_STEP = 1e-4
GRADCHECK_TOLERANCE = 1e-4

# Persistence.
CHECKPOINT_FORMAT_VERSION = 1
CONFIG_FILE = "config.json"
HISTORY_FILE = "history.csv"
CHECKPOINT_FILE = "checkpoint.cmos"
METRICS_FILE = "metrics.json"
MIXING_FILE = "mixing_weights.csv"
GRID_FILE = "grid.jsonl"
GRID_DIR = "grid"
ABLATION_DIR = "ablation"
HORIZON_DIR_PREFIX = "H"
SVG_CELL_PX = 12

ENV_THREADS = "CMOS_THREADS"
ENV_DATA_DIR = "CMOS_DATA_DIR"
