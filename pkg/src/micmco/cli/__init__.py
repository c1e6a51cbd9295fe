"""
CLI Module
Config files, metrics and sweep CSVs, Pareto frontiers and the micmco commands
"""

from .config_file import (
    ConfigDocument,
    format_run_config,
    load_run_config,
    parse_key_values,
    parse_run_config,
)

from .metrics_csv import (
    METRICS_COLUMNS,
    metrics_frame,
    read_metrics_csv,
    write_csv,
    write_metrics_csv,
)

from .pareto import (
    FRONTIER_COLUMNS,
    ParetoPoint,
    brute_force_frontier,
    frontier_points,
    pareto_file,
    pareto_frontier,
)

from .runner import execute_run

from .sweep import (
    GRID_KEYS,
    SweepGrid,
    SweepPoint,
    load_grid,
    parse_grid,
    plan_sweep,
    run_sweep,
)

from .commands import build_parser, main

__all__ = [
    # Config files
    "ConfigDocument",
    "format_run_config",
    "load_run_config",
    "parse_key_values",
    "parse_run_config",
    # CSV
    "METRICS_COLUMNS",
    "metrics_frame",
    "read_metrics_csv",
    "write_csv",
    "write_metrics_csv",
    # Pareto
    "FRONTIER_COLUMNS",
    "ParetoPoint",
    "brute_force_frontier",
    "frontier_points",
    "pareto_file",
    "pareto_frontier",
    # Runs and sweeps
    "execute_run",
    "GRID_KEYS",
    "SweepGrid",
    "SweepPoint",
    "load_grid",
    "parse_grid",
    "plan_sweep",
    "run_sweep",
    # Commands
    "build_parser",
    "main",
]
