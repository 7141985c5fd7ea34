from .config import (
    DatasetPair,
    ExperimentConfig,
    PruningPlan,
    SyntheticPair,
    dump_experiment_config,
    load_experiment_config,
)
from .export import (
    CURVE_METRICS,
    SweepExport,
    cells_frame,
    curve_table,
    sparsity_sweep_export,
    winner_table,
)
from .report import (
    CellKey,
    CellResult,
    Provenance,
    Report,
    RunStats,
    read_report,
    read_run_stats,
    write_report,
    write_run_stats,
)
from .runner import (
    REPORT_FILE,
    RESOLVED_CONFIG_FILE,
    RUN_STATS_FILE,
    GroupResult,
    Workspace,
    load_tasks,
    run,
    run_group,
)

__all__ = [
    "CURVE_METRICS",
    "REPORT_FILE",
    "RESOLVED_CONFIG_FILE",
    "RUN_STATS_FILE",
    "CellKey",
    "CellResult",
    "DatasetPair",
    "ExperimentConfig",
    "GroupResult",
    "Provenance",
    "PruningPlan",
    "Report",
    "RunStats",
    "SweepExport",
    "SyntheticPair",
    "Workspace",
    "cells_frame",
    "curve_table",
    "dump_experiment_config",
    "load_experiment_config",
    "load_tasks",
    "read_report",
    "read_run_stats",
    "run",
    "run_group",
    "sparsity_sweep_export",
    "winner_table",
    "write_report",
    "write_run_stats",
]
