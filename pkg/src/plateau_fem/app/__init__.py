"""Configuration, sweep driver and file output for batch runs."""

from .config import ConfigError, RunConfig, parse_config
from .sweep import CSV_COLUMNS, OperatorCache, SweepRow, log_progress, run_sweep, write_csv
from .vtk import read_vtk_counts, write_vtk

__all__ = [
    "CSV_COLUMNS",
    "ConfigError",
    "OperatorCache",
    "RunConfig",
    "SweepRow",
    "log_progress",
    "parse_config",
    "read_vtk_counts",
    "run_sweep",
    "write_csv",
    "write_vtk",
]
