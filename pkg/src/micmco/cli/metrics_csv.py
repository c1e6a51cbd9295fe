"""
Metrics CSV
The per-run metrics stream and its fixed column order
"""

from pathlib import Path
from typing import Iterable, Union

import pandas as pd

from ..training.trainer import MetricsRow

METRICS_COLUMNS = [
    "step",
    "nll",
    "avg_kl",
    "lambda",
    "alpha",
    "base",
    "k_lik",
    "k_mi",
    "seed",
    "wall_time_s",
]


def metrics_frame(rows: Iterable[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_dict() for row in rows], columns=METRICS_COLUMNS)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """'.' decimals, '\\n' line endings, no index; identical frames give identical bytes"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        frame.to_csv(f, index=False, lineterminator="\n")
    return path


def write_metrics_csv(path: Union[str, Path], rows: Iterable[MetricsRow]) -> Path:
    return write_csv(metrics_frame(rows), path)


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
