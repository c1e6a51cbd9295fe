"""
Pareto Frontier
Non-dominated (avg_kl, nll) points under (maximize avg_kl, minimize nll)
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError
from .metrics_csv import write_csv

logger = logging.getLogger(__name__)

FRONTIER_COLUMNS = ["avg_kl", "nll", "run_id"]


@dataclass(frozen=True)
class ParetoPoint:
    avg_kl: float
    nll: float
    run_id: str

    def dominates(self, other: "ParetoPoint") -> bool:
        return (
            self.avg_kl >= other.avg_kl
            and self.nll <= other.nll
            and (self.avg_kl > other.avg_kl or self.nll < other.nll)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"avg_kl": self.avg_kl, "nll": self.nll, "run_id": self.run_id}


def _points_frame(frame: pd.DataFrame) -> pd.DataFrame:
    missing = [c for c in ("avg_kl", "nll") if c not in frame.columns]
    if missing:
        raise ConfigError(f"input is missing column(s) {', '.join(missing)}", key=missing[0])
    points = pd.DataFrame({
        "avg_kl": pd.to_numeric(frame["avg_kl"], errors="coerce"),
        "nll": pd.to_numeric(frame["nll"], errors="coerce"),
        "run_id": frame["run_id"].astype(str) if "run_id" in frame.columns else frame.index.astype(str),
    })
    finite = np.isfinite(points["avg_kl"]) & np.isfinite(points["nll"])
    if not finite.all():
        logger.warning("skipping %d row(s) without finite avg_kl and nll", int((~finite).sum()))
    return points[finite].reset_index(drop=True)


def pareto_frontier(frame: pd.DataFrame, with_rate: bool = False) -> pd.DataFrame:
    """
    Exactly the non-dominated rows, sorted by avg_kl ascending

    Rows equal on both coordinates keep only the first one seen. With
    with_rate a distortion = nll − avg_kl column is appended.

    Raises:
        ConfigError: avg_kl or nll column missing
    """
    points = _points_frame(frame)
    points["order"] = np.arange(len(points))
    # highest avg_kl first, then lowest nll, then input order
    ranked = points.sort_values(["avg_kl", "nll", "order"], ascending=[False, True, True], kind="mergesort")

    keep: List[int] = []
    best_nll = np.inf           # over rows with strictly larger avg_kl
    group_kl = None
    group_best = np.inf
    for row in ranked.itertuples():
        if row.avg_kl != group_kl:
            best_nll = min(best_nll, group_best)
            group_kl = row.avg_kl
            group_best = np.inf
            if row.nll < best_nll:
                keep.append(row.order)
        group_best = min(group_best, row.nll)

    result = points.loc[points["order"].isin(keep), FRONTIER_COLUMNS]
    result = result.sort_values("avg_kl", kind="mergesort").reset_index(drop=True)
    if with_rate:
        result["distortion"] = result["nll"] - result["avg_kl"]
    return result


def brute_force_frontier(points: List[ParetoPoint]) -> List[ParetoPoint]:
    """O(n²) reference: drop dominated points and later duplicates"""
    kept = []
    for i, p in enumerate(points):
        dominated = any(q.dominates(p) for q in points)
        duplicate = any(q.avg_kl == p.avg_kl and q.nll == p.nll for q in points[:i])
        if not dominated and not duplicate:
            kept.append(p)
    return sorted(kept, key=lambda p: p.avg_kl)


def frontier_points(frame: pd.DataFrame) -> List[ParetoPoint]:
    return [ParetoPoint(float(r.avg_kl), float(r.nll), str(r.run_id)) for r in frame.itertuples()]


def pareto_file(input_path: Union[str, Path], output_path: Union[str, Path], with_rate: bool = False) -> pd.DataFrame:
    input_path = Path(input_path)
    if not input_path.is_file():
        raise ConfigError(f"no such file '{input_path}'", key="input")
    frontier = pareto_frontier(pd.read_csv(input_path), with_rate)
    write_csv(frontier, output_path)
    logger.info("frontier of %d point(s) written to %s", len(frontier), output_path)
    return frontier
