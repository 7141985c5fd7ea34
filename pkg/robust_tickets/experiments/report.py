from __future__ import annotations

from datetime import datetime
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.constants import (
    Granularity,
    PretrainSchemeName,
    PruneScope,
    PruningScheme,
    TransferMode,
)
from robust_tickets.metrics import MetricsReport

CellStatus = Literal["ok", "failed", "skipped"]

_TRACKED_PACKAGES = (
    "robust-tickets",
    "numpy",
    "scipy",
    "scikit-learn",
    "pydantic",
)


class CellKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    pretrain_scheme: PretrainSchemeName
    pruning_scheme: PruningScheme
    granularity: Granularity
    scope: PruneScope
    sparsity: float
    mode: TransferMode
    seed: int

    def sort_key(self) -> tuple[str, str, str, str, float, str, int]:
        return (
            self.pretrain_scheme,
            self.pruning_scheme,
            self.granularity,
            self.scope,
            self.sparsity,
            self.mode,
            self.seed,
        )

    def series(self) -> str:
        """Curve label: pretraining scheme and pruning scheme (plus grouping)."""
        label = f"{self.pretrain_scheme}/{self.pruning_scheme}"
        if self.granularity != "element":
            label += f"/{self.granularity}"
        if self.scope != "global":
            label += f"/{self.scope}"
        return label


class CellResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    key: CellKey
    status: CellStatus
    artifact: str | None = None
    ticket_scheme: str | None = None
    realized_sparsity: float | None = None
    metrics: MetricsReport | None = None
    error: str | None = None


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    config_hash: str
    versions: dict[str, str] = Field(default_factory=dict)


class Report(BaseModel):
    """Every evaluated cell of a sweep plus the FID of the dataset pair.

    Holds content only; timings and step counts live in RunStats.
    """

    model_config = ConfigDict(frozen=True)

    cells: tuple[CellResult, ...]
    fid: float | None = None
    fid_extractor: str | None = None
    source: str
    target: str
    provenance: Provenance

    @property
    def ok(self) -> bool:
        return all(cell.status == "ok" for cell in self.cells)

    def failed(self) -> list[CellResult]:
        return [cell for cell in self.cells if cell.status == "failed"]


class RunStats(BaseModel):
    started_at: datetime
    finished_at: datetime
    steps: dict[str, int] = Field(default_factory=dict)
    cells_computed: int = 0
    cells_cached: int = 0

    @property
    def total_steps(self) -> int:
        return sum(self.steps.values())


def package_versions() -> dict[str, str]:
    versions: dict[str, str] = {}
    for name in _TRACKED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _write_json(model: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def write_report(report: Report, path: Path) -> Path:
    return _write_json(report, path)


def read_report(path: str | Path) -> Report:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Report file {path} does not exist")
    return Report.model_validate_json(path.read_text(encoding="utf-8"))


def write_run_stats(stats: RunStats, path: Path) -> Path:
    return _write_json(stats, path)


def read_run_stats(path: str | Path) -> RunStats:
    return RunStats.model_validate_json(Path(path).read_text(encoding="utf-8"))
