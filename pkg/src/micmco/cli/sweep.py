"""
Sweeps
Grid of training runs over lambda, alpha, lr and seed, each in its own
directory, collected into one CSV of final rows
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError, MicmcoError
from ..training.run_config import RunConfig
from .config_file import parse_key_values, read_text
from .metrics_csv import METRICS_COLUMNS, write_csv
from .runner import execute_run

logger = logging.getLogger(__name__)

GRID_KEYS = ("lambda", "alpha", "lr", "seed")
SWEEP_COLUMNS = ["run_id", "status"] + METRICS_COLUMNS + ["error"]
SWEEP_NAME = "sweep.csv"


@dataclass
class SweepGrid:
    """Lists of values per swept key; keys absent from the grid keep the base config's value"""
    values: Dict[str, List[Any]] = field(default_factory=dict)

    def points(self) -> List[Dict[str, Any]]:
        """Cartesian product in key order lambda, alpha, lr, seed; the last key varies fastest"""
        keys = [k for k in GRID_KEYS if k in self.values]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.values[k] for k in keys))]

    def __len__(self) -> int:
        return int(np.prod([len(v) for v in self.values.values()])) if self.values else 1


def _parse_value(key: str, raw: str, line: int) -> Any:
    try:
        return int(raw) if key == "seed" else float(raw)
    except ValueError:
        raise ConfigError(f"not a number: '{raw}'", key=key, line=line) from None


def parse_grid(text: str) -> SweepGrid:
    """
    Grid document: key=v1,v2,... for keys among lambda, alpha, lr, seed

    Raises:
        ConfigError: unknown key, empty list, or a non-numeric entry
    """
    doc = parse_key_values(text)
    grid = SweepGrid()
    for key, raw in doc.values.items():
        line = doc.lines[key]
        if key not in GRID_KEYS:
            raise ConfigError(f"cannot sweep this key (choose from {', '.join(GRID_KEYS)})", key=key, line=line)
        items = [item.strip() for item in raw.split(",") if item.strip()]
        if not items:
            raise ConfigError("empty list", key=key, line=line)
        grid.values[key] = [_parse_value(key, item, line) for item in items]
    return grid


def load_grid(path: Union[str, Path]) -> SweepGrid:
    return parse_grid(read_text(path))


@dataclass
class SweepPoint:
    index: int
    run_id: str
    config: RunConfig


def plan_sweep(base: RunConfig, grid: SweepGrid) -> List[SweepPoint]:
    """
    One validated config per grid point

    Seeds listed in the grid are used as given; otherwise grid point i runs
    with base.seed + i.
    """
    plan = []
    for index, point in enumerate(grid.points()):
        overrides = dict(point)
        if "seed" not in overrides:
            overrides["seed"] = base.seed + index
        plan.append(SweepPoint(index, f"run_{index:03d}", base.with_overrides(**overrides)))
    return plan


def _run_point(point: SweepPoint, out_dir: str) -> Dict[str, Any]:
    """Final row of one run, or its failure; never raises for library errors"""
    record: Dict[str, Any] = {"run_id": point.run_id}
    try:
        run = execute_run(point.config, Path(out_dir) / point.run_id)
    except MicmcoError as e:
        logger.warning("%s failed: %s", point.run_id, e)
        record.update(status="failed", error=str(e))
        return record
    final = run.final_row
    if final is None:
        record.update(status="no_rows", error="")
        return record
    record.update(final.to_dict(), status="ok", error="")
    return record


def run_sweep(
    base: RunConfig,
    grid: SweepGrid,
    out_dir: Optional[Union[str, Path]] = None,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Train every grid point and write <out_dir>/sweep.csv once all runs settle

    Runs execute in up to `jobs` worker processes; each owns <out_dir>/run_XXX.
    Failed runs are recorded with status=failed and the sweep continues.
    """
    out_dir = Path(out_dir if out_dir is not None else base.out_dir)
    plan = plan_sweep(base, grid)
    logger.info("sweep of %d run(s) into %s with %d job(s)", len(plan), out_dir, jobs)
    for point in plan:
        logger.info("%s: %s", point.run_id, {k: point.config.to_dict()[k] for k in ("lambda", "alpha", "lr", "seed")})

    if jobs <= 1 or len(plan) == 1:
        records = [_run_point(point, str(out_dir)) for point in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_point, point, str(out_dir)) for point in plan]
            records = [f.result() for f in futures]

    frame = pd.DataFrame(records, columns=SWEEP_COLUMNS)
    write_csv(frame, out_dir / SWEEP_NAME)
    failed = int((frame["status"] == "failed").sum())
    logger.info("sweep finished: %d ok, %d failed", len(frame) - failed, failed)
    return frame
