from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from robust_tickets.constants import MATCH_LABEL, WINNER_LABELS
from robust_tickets.exceptions import EmptyInputError

from .report import Report

logger = logging.getLogger(__name__)

CURVE_METRICS = ("accuracy", "adv_accuracy", "ece", "nll", "roc_auc")
WINNERS_FILE = "winners.csv"
TIE_TOLERANCE = 1e-12


@dataclass
class SweepExport:
    curves: dict[tuple[str, str], Path] = field(default_factory=dict)
    winners: Path | None = None
    winner_rows: list[dict[str, Any]] = field(default_factory=list)


def cells_frame(report: Report) -> pd.DataFrame:
    """One row per successful cell with its key fields and metrics."""
    rows: list[dict[str, Any]] = []
    for cell in report.cells:
        if cell.status != "ok" or cell.metrics is None:
            continue
        key = cell.key
        pruning = key.series().split("/", 1)[1]
        row: dict[str, Any] = {
            "series": key.series(),
            "pretrain_scheme": key.pretrain_scheme,
            "pruning": pruning,
            "mode": key.mode,
            "sparsity": key.sparsity,
            "seed": key.seed,
        }
        for metric in CURVE_METRICS:
            value = getattr(cell.metrics, metric)
            row[metric] = np.nan if value is None else float(value)
        rows.append(row)
    if not rows:
        raise EmptyInputError("report holds no successful cells to export")
    return pd.DataFrame(rows)


def curve_table(frame: pd.DataFrame, mode: str, metric: str) -> pd.DataFrame:
    """Rows are sparsities; ``<series>_mean/_min/_max`` columns over seeds."""
    subset = frame[(frame["mode"] == mode) & frame[metric].notna()]
    if subset.empty:
        return pd.DataFrame()
    stats = subset.groupby(["sparsity", "series"])[metric].agg(["mean", "min", "max"])
    table = stats.unstack("series")
    table.columns = [f"{series}_{stat}" for stat, series in table.columns]
    ordered = sorted(table.columns, key=_column_order)
    return table[ordered].sort_index()


def _column_order(column: str) -> tuple[str, int]:
    series, stat = column.rsplit("_", 1)
    return series, ("mean", "min", "max").index(stat)


def winner_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Pretraining scheme with the best mean accuracy at each sparsity.

    Means within TIE_TOLERANCE of the best are a tie and labeled Match.
    """
    means = (
        frame.groupby(["mode", "pruning", "sparsity", "pretrain_scheme"])["accuracy"]
        .mean()
        .unstack("pretrain_scheme")
    )
    winners: list[str] = []
    for _, row in means.iterrows():
        scores = row.dropna()
        best = scores.max()
        leaders = [name for name, v in scores.items() if best - v <= TIE_TOLERANCE]
        if len(leaders) == 1:
            winners.append(WINNER_LABELS.get(leaders[0], str(leaders[0])))
        else:
            winners.append(MATCH_LABEL)
    table = means.add_prefix("accuracy_mean_")
    table["winner"] = winners
    return table.reset_index()


def _write_csv(table: pd.DataFrame, path: Path, *, index: bool) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    table.to_csv(tmp, index=index)
    tmp.replace(path)
    return path


def sparsity_sweep_export(report: Report, out_dir: str | Path) -> SweepExport:
    """Write one curve CSV per (transfer mode, metric) plus the winner table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = cells_frame(report)
    export = SweepExport()

    for mode in sorted(frame["mode"].unique()):
        for metric in CURVE_METRICS:
            table = curve_table(frame, mode, metric)
            if table.empty:
                logger.debug(f"No {metric} values for {mode}; skipping curve")
                continue
            path = out_dir / f"curve-{mode}-{metric}.csv"
            export.curves[(mode, metric)] = _write_csv(table, path, index=True)

    winners = winner_table(frame)
    export.winners = _write_csv(winners, out_dir / WINNERS_FILE, index=False)
    export.winner_rows = winners.to_dict(orient="records")
    logger.info(f"Exported {len(export.curves)} curves to {out_dir}")
    return export
