"""Interpretability exports: correlation matrices, mean mixing weights, grayscale heatmaps."""

from __future__ import annotations

import html
from pathlib import Path

import numpy as np
import pandas as pd

from .constants import MIXING_FILE, SVG_CELL_PX
from .data import windows
from .model import forward
from .models import CmosConfig, CmosParams, Dataset, SplitRange
from .utils import ensure_dir


def mean_mixing_weights(
    params: CmosParams,
    cfg: CmosConfig,
    dataset: Dataset,
    span: SplitRange,
    batch_size: int = 256,
) -> np.ndarray:
    """Per-channel mixing weights averaged over every window of `span`; rows sum to 1."""
    total = np.zeros((cfg.N, cfg.n_matrices))
    count = 0
    for batch in windows(dataset, span, cfg.L, cfg.H, batch_size=batch_size):
        _, cache = forward(batch, params, cfg)
        total += cache.mix.w.sum(axis=0)
        count += batch.size
    return total / count


def theta_frame(matrix: np.ndarray) -> pd.DataFrame:
    n_out, n_in = matrix.shape
    frame = pd.DataFrame(
        matrix,
        index=[f"out_{i + 1}" for i in range(n_out)],
        columns=[f"in_{j + 1}" for j in range(n_in)],
    )
    frame.index.name = "output_chunk"
    return frame


def heatmap_svg(matrix: np.ndarray, label: str, cell: int = SVG_CELL_PX) -> str:
    """Grayscale heatmap: white is zero, black is the largest magnitude."""
    n_out, n_in = matrix.shape
    peak = float(np.max(np.abs(matrix))) or 1.0
    rects = []
    for i in range(n_out):
        for j in range(n_in):
            level = int(round(255 * (1.0 - abs(float(matrix[i, j])) / peak)))
            rects.append(
                f"<rect x='{j * cell}' y='{i * cell}' width='{cell}' height='{cell}' "
                f"fill='rgb({level},{level},{level})'><title>{matrix[i, j]:.6g}</title></rect>"
            )
    width, height = n_in * cell, n_out * cell
    return f"""<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 {width} {height}' width='{width}' height='{height}' role='img' aria-label='{html.escape(label)}'>
<rect width='{width}' height='{height}' fill='#ffffff'/>
{"".join(rects)}
</svg>"""


def export_interpretability(
    params: CmosParams,
    cfg: CmosConfig,
    dataset: Dataset,
    span: SplitRange,
    out_dir: str | Path,
    *,
    svg: bool = False,
) -> list[Path]:
    """Write theta_<k>.csv per matrix (optional .svg) and the N×K mixing_weights.csv."""
    root = ensure_dir(out_dir)
    written: list[Path] = []
    for k, matrix in enumerate(params.theta):
        csv_path = root / f"theta_{k}.csv"
        theta_frame(matrix).to_csv(csv_path, encoding="utf-8")
        written.append(csv_path)
        if svg:
            svg_path = root / f"theta_{k}.svg"
            svg_path.write_text(heatmap_svg(matrix, f"theta {k}"), encoding="utf-8")
            written.append(svg_path)

    weights = mean_mixing_weights(params, cfg, dataset, span)
    mixing = pd.DataFrame(
        weights,
        index=list(dataset.channel_names),
        columns=[f"theta_{k}" for k in range(weights.shape[1])],
    )
    mixing.index.name = "channel"
    mixing_path = root / MIXING_FILE
    mixing.to_csv(mixing_path, encoding="utf-8")
    written.append(mixing_path)
    return written
