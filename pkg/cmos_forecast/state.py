"""Checkpoint files, training history and grid records."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .constants import CHECKPOINT_FORMAT_VERSION
from .models import CmosConfig, CmosParams, ConfigError, EpochRecord, RunHistory
from .utils import append_jsonl, read_jsonl, write_bytes_atomic, write_csv_rows

HEADER_KEYS = ("format_version", "config", "seed", "epoch", "val_loss")
HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "lr"]


class CheckpointError(ValueError):
    """Raised when a checkpoint file cannot be parsed."""


@dataclass(eq=False)
class Checkpoint:
    cfg: CmosConfig
    params: CmosParams
    seed: int
    epoch: int | None
    val_loss: float | None


def _header_value(value: object) -> str:
    return "none" if value is None else repr(value) if isinstance(value, float) else str(value)


def save_checkpoint(
    path: str | Path,
    params: CmosParams,
    cfg: CmosConfig,
    *,
    seed: int,
    epoch: int | None,
    val_loss: float | None,
) -> Path:
    """Key=value text header, blank line, then little-endian float64 arrays."""
    params.check_shapes(cfg)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": json.dumps(cfg.to_dict(), sort_keys=True),
        "seed": int(seed),
        "epoch": epoch,
        "val_loss": None if val_loss is None else float(val_loss),
    }
    text = "".join(f"{key}={_header_value(header[key])}\n" for key in HEADER_KEYS) + "\n"
    blob = text.encode("utf-8") + params.flatten().astype("<f8").tobytes()
    p = Path(path)
    write_bytes_atomic(p, blob)
    return p


def _parse_header(text: str, path: Path) -> dict[str, str]:
    header: dict[str, str] = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path}: malformed header line {line!r}")
        header[key.strip()] = value
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise CheckpointError(f"{path}: header is missing {', '.join(missing)}")
    return header


def load_checkpoint(path: str | Path) -> Checkpoint:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    blob = p.read_bytes()
    head, sep, payload = blob.partition(b"\n\n")
    if not sep:
        raise CheckpointError(f"{p}: header is not terminated by a blank line")
    try:
        header = _parse_header(head.decode("utf-8"), p)
    except UnicodeDecodeError as exc:
        raise CheckpointError(f"{p}: header is not UTF-8 text") from exc

    if header["format_version"] != str(CHECKPOINT_FORMAT_VERSION):
        raise CheckpointError(f"{p}: unsupported format version {header['format_version']}")
    try:
        cfg = CmosConfig.from_dict(json.loads(header["config"]))
        seed = int(header["seed"])
        epoch = None if header["epoch"] == "none" else int(header["epoch"])
        val_loss = None if header["val_loss"] == "none" else float(header["val_loss"])
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"{p}: invalid header value ({exc})") from exc

    if len(payload) % 8:
        raise CheckpointError(f"{p}: payload of {len(payload)} bytes is not a float64 array")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    try:
        params = CmosParams.from_flat(cfg, flat)
    except ConfigError as exc:
        raise CheckpointError(f"{p}: {exc}") from exc
    return Checkpoint(cfg=cfg, params=params, seed=seed, epoch=epoch, val_loss=val_loss)


def write_history(path: str | Path, history: RunHistory) -> None:
    rows = ([row.epoch, repr(row.train_loss), repr(row.val_loss), repr(row.lr)] for row in history.epochs)
    write_csv_rows(path, HISTORY_COLUMNS, rows)


def read_history(path: str | Path) -> RunHistory:
    frame = pd.read_csv(path, float_precision="round_trip")
    history = RunHistory()
    for row in frame.itertuples(index=False):
        history.record(
            EpochRecord(epoch=int(row.epoch), train_loss=float(row.train_loss), val_loss=float(row.val_loss), lr=float(row.lr))
        )
    return history


def append_grid_record(path: str | Path, record: dict) -> None:
    append_jsonl(path, record)


def load_grid_records(path: str | Path) -> list[dict]:
    return read_jsonl(path)
