"""
Run Directory
Train one config into a directory: the config as run, metrics.csv and checkpoint.bin
"""

import logging
from pathlib import Path
from typing import List, Union

from ..errors import MicmcoError
from ..modeling.checkpoint import write_checkpoint
from ..training.run_config import RunConfig
from ..training.trainer import MetricsRow, TrainRun, train
from .config_file import format_run_config
from .metrics_csv import write_metrics_csv

logger = logging.getLogger(__name__)

CONFIG_NAME = "config.txt"
METRICS_NAME = "metrics.csv"
CHECKPOINT_NAME = "checkpoint.bin"


def execute_run(config: RunConfig, out_dir: Union[str, Path]) -> TrainRun:
    """
    Train and persist; a diverged run still leaves its rows and last good checkpoint

    Raises:
        MicmcoError: whatever stopped training, after the partial outputs are written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_NAME).write_text(format_run_config(config), encoding="utf-8")
    rows: List[MetricsRow] = []
    try:
        run = train(config, checkpoint_path=out_dir / CHECKPOINT_NAME, on_row=rows.append)
    except MicmcoError:
        write_metrics_csv(out_dir / METRICS_NAME, rows)
        raise
    write_metrics_csv(out_dir / METRICS_NAME, run.history)
    write_checkpoint(out_dir / CHECKPOINT_NAME, run.params)
    logger.info("run finished in %s", out_dir)
    return run
