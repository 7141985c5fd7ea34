from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

from robust_tickets.config import PretrainScheme, TrainConfig
from robust_tickets.constants import TransferMode
from robust_tickets.data import (
    Dataset,
    Task,
    load_task,
    make_ood_dataset,
    make_shifted_pair,
)
from robust_tickets.exceptions import RobustTicketsError
from robust_tickets.metrics import dataset_fid
from robust_tickets.nn import (
    Checkpoint,
    load_checkpoint,
    resolve_spec,
    save_checkpoint,
)
from robust_tickets.pruning import (
    LmpConfig,
    Ticket,
    imp,
    lmp,
    load_ticket,
    omp,
    save_ticket,
)
from robust_tickets.transfer import (
    TransferResult,
    finetune_whole,
    linear_eval,
    pretrain,
)
from robust_tickets.utils import content_hash

from .config import ExperimentConfig, PruningPlan, dump_experiment_config
from .report import (
    CellKey,
    CellResult,
    Provenance,
    Report,
    RunStats,
    package_versions,
    write_report,
    write_run_stats,
)

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
RUN_STATS_FILE = "run_stats.json"
RESOLVED_CONFIG_FILE = "config.resolved.yaml"


@dataclass(frozen=True)
class Workspace:
    root: Path

    @property
    def artifacts(self) -> Path:
        return self.root / "artifacts"

    @property
    def logs(self) -> Path:
        return self.root / "logs"

    def artifact(self, stage: str, key: str, suffix: str) -> Path:
        return self.artifacts / f"{stage}-{key[:24]}{suffix}"


@dataclass
class GroupResult:
    scheme: str
    seed: int
    cells: list[CellResult] = field(default_factory=list)
    steps: Counter[str] = field(default_factory=Counter)
    computed: int = 0
    cached: int = 0
    checkpoint_path: Path | None = None


def load_tasks(config: ExperimentConfig) -> tuple[Task, Task]:
    """Source and target tasks: the manifest pair or the synthetic shift pair."""
    if config.datasets is not None:
        return load_task(config.datasets.source), load_task(config.datasets.target)
    return make_shifted_pair(config.synthetic.generator, config.synthetic.shift)


def _ood_dataset(config: ExperimentConfig) -> Dataset | None:
    if not config.ood or config.datasets is not None:
        return None
    return make_ood_dataset(config.synthetic.generator)


class _Group:
    """Pretrain, prune and transfer for one (pretraining scheme, seed) pair."""

    def __init__(
        self,
        config: ExperimentConfig,
        scheme: PretrainScheme,
        seed: int,
        resume: bool,
    ) -> None:
        self.config = config
        self.scheme = scheme
        self.seed = seed
        self.resume = resume
        self.workspace = Workspace(config.out_dir)
        self.source, self.target = load_tasks(config)
        self.ood = _ood_dataset(config)
        self.result = GroupResult(scheme.name, seed)

    def _cached(self, path: Path) -> bool:
        return self.resume and path.exists()

    def _key(self, plan: PruningPlan, sparsity: float, mode: TransferMode) -> CellKey:
        return CellKey(
            pretrain_scheme=self.scheme.name,
            pruning_scheme=plan.scheme,
            granularity=plan.granularity,
            scope=plan.scope,
            sparsity=sparsity,
            mode=mode,
            seed=self.seed,
        )

    def _fail_plan(self, plan: PruningPlan, sparsity: float, exc: Exception) -> None:
        for mode in self.config.transfer_modes:
            self.result.cells.append(
                CellResult(
                    key=self._key(plan, sparsity, mode),
                    status="failed",
                    error=f"{type(exc).__name__}: {exc}",
                )
            )

    def checkpoint(self) -> Checkpoint:
        train_cfg = self.config.pretrain.model_copy(update={"seed": self.seed})
        spec = resolve_spec(
            self.config.model, self.source.num_classes, self.source.image_shape
        )
        key = content_hash(
            {
                "stage": "pretrain",
                "spec": spec.model_dump(mode="json"),
                "init": self.config.init,
                "scheme": self.scheme.model_dump(mode="json"),
                "train": train_cfg.model_dump(mode="json"),
                "source": self.source.digest(),
            }
        )
        path = self.workspace.artifact(f"pretrain-{self.scheme.name}", key, ".ckpt")
        self.result.checkpoint_path = path
        if self._cached(path):
            logger.info(f"Reusing checkpoint {path.name}")
            return load_checkpoint(path)

        log_name = f"pretrain-{self.scheme.name}-s{self.seed}.jsonl"
        checkpoint = pretrain(
            spec,
            self.source,
            self.scheme,
            train_cfg,
            init=self.config.init,
            log_path=self.workspace.logs / log_name,
        )
        self.result.steps["pretrain"] += int(checkpoint.metadata.extra["train_steps"])
        save_checkpoint(checkpoint, path)
        return checkpoint

    def _ticket_key(
        self, checkpoint: Checkpoint, plan: PruningPlan, **extra: object
    ) -> str:
        payload: dict[str, object] = {
            "stage": "ticket",
            "checkpoint": checkpoint.digest,
            "plan": plan.model_dump(mode="json"),
            "seed": self.seed,
            **extra,
        }
        if plan.scheme != "omp":
            payload["prune_train"] = self.config.prune_train.model_dump(mode="json")
            payload["prune_task"] = self._prune_task(plan).digest()
        return content_hash(payload)

    def _prune_task(self, plan: PruningPlan) -> Task:
        if plan.scheme == "lmp" or plan.imp.locus == "downstream":
            return self.target
        return self.source

    def _store(self, ticket: Ticket, path: Path) -> Ticket:
        save_ticket(ticket, path)
        steps = int(ticket.provenance.extra.get("train_steps", 0))
        self.result.steps[ticket.scheme] += steps
        return ticket

    def tickets(self, checkpoint: Checkpoint, plan: PruningPlan) -> dict[float, Ticket]:
        prune_cfg = self.config.prune_train.model_copy(update={"seed": self.seed})
        if plan.scheme == "imp":
            key = self._ticket_key(checkpoint, plan)
            paths = {
                s: self.workspace.artifact(f"ticket-imp{i}", key, ".mask")
                for i, s in enumerate(plan.sparsities)
            }
            if all(self._cached(path) for path in paths.values()):
                return {s: load_ticket(path, checkpoint) for s, path in paths.items()}
            drawn = imp(
                checkpoint,
                self._prune_task(plan),
                plan.imp_config(),
                prune_cfg,
                log_dir=self.workspace.logs / f"imp-{self.scheme.name}-s{self.seed}",
            )
            return {
                s: self._store(ticket, paths[s])
                for s, ticket in zip(plan.sparsities, drawn, strict=True)
            }

        tickets: dict[float, Ticket] = {}
        for sparsity in plan.sparsities:
            key = self._ticket_key(checkpoint, plan, sparsity=sparsity)
            path = self.workspace.artifact(f"ticket-{plan.scheme}", key, ".mask")
            try:
                if self._cached(path):
                    tickets[sparsity] = load_ticket(path, checkpoint)
                elif plan.scheme == "omp":
                    ticket = omp(checkpoint, sparsity, plan.granularity, plan.scope)
                    tickets[sparsity] = self._store(ticket, path)
                else:
                    lmp_cfg = LmpConfig(
                        sparsity=sparsity, score_init=plan.lmp_score_init
                    )
                    ticket = lmp(checkpoint, self.target, lmp_cfg, prune_cfg)
                    tickets[sparsity] = self._store(ticket, path)
            except (RobustTicketsError, ValueError, ArithmeticError) as exc:
                logger.warning(f"{plan.scheme} at {sparsity:g} failed: {exc}")
                self._fail_plan(plan, sparsity, exc)
        return tickets

    def transfer(self, plan: PruningPlan, sparsity: float, ticket: Ticket) -> None:
        finetune_cfg = self.config.finetune.model_copy(update={"seed": self.seed})
        for mode in self.config.transfer_modes:
            cell = self._key(plan, sparsity, mode)
            key = content_hash(
                {
                    "stage": "transfer",
                    "checkpoint": ticket.checkpoint.digest,
                    "masks": ticket.masks.digest(),
                    "mode": mode,
                    "train": finetune_cfg.model_dump(mode="json"),
                    "adv": (
                        self.config.adv.model_dump(mode="json")
                        if self.config.adv
                        else None
                    ),
                    "ood": self.ood.digest() if self.ood is not None else None,
                    "target": self.target.digest(),
                }
            )
            path = self.workspace.artifact(f"cell-{mode}", key, ".json")
            if self._cached(path):
                stored = CellResult.model_validate_json(path.read_text())
                self.result.cells.append(stored.model_copy(update={"key": cell}))
                self.result.cached += 1
                continue
            try:
                outcome = _transfer(
                    mode,
                    ticket,
                    self.target,
                    finetune_cfg,
                    adv_cfg=self.config.adv,
                    ood=self.ood,
                    log_path=self.workspace.logs / f"{mode}-{key[:24]}.jsonl",
                )
            except (RobustTicketsError, ValueError, ArithmeticError) as exc:
                logger.warning(f"{cell.series()} {mode} at {sparsity:g} failed: {exc}")
                error = f"{type(exc).__name__}: {exc}"
                self.result.cells.append(
                    CellResult(key=cell, status="failed", error=error)
                )
                continue
            result = CellResult(
                key=cell,
                status="ok",
                artifact=key,
                ticket_scheme=ticket.scheme,
                realized_sparsity=ticket.realized_sparsity,
                metrics=outcome.report,
            )
            self.result.steps[mode] += outcome.steps
            self.result.computed += 1
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
            self.result.cells.append(result)

    def run(self) -> GroupResult:
        logger.info(f"Group {self.scheme.name} seed {self.seed}")
        try:
            checkpoint = self.checkpoint()
        except (RobustTicketsError, ValueError, ArithmeticError) as exc:
            logger.warning(f"Pretraining {self.scheme.name} failed: {exc}")
            for plan in self.config.pruning:
                for sparsity in plan.sparsities:
                    self._fail_plan(plan, sparsity, exc)
            return self.result

        for plan in self.config.pruning:
            try:
                tickets = self.tickets(checkpoint, plan)
            except (RobustTicketsError, ValueError, ArithmeticError) as exc:
                logger.warning(f"{plan.scheme} pruning failed: {exc}")
                for sparsity in plan.sparsities:
                    self._fail_plan(plan, sparsity, exc)
                continue
            for sparsity, ticket in tickets.items():
                self.transfer(plan, sparsity, ticket)
        return self.result


def run_group(
    config: ExperimentConfig, scheme_index: int, seed: int, resume: bool
) -> GroupResult:
    return _Group(config, config.pretrain_schemes[scheme_index], seed, resume).run()


def _transfer(
    mode: TransferMode,
    ticket: Ticket,
    task: Task,
    cfg: TrainConfig,
    **kwargs: Any,
) -> TransferResult:
    if mode == "linear":
        return linear_eval(ticket, task, cfg, **kwargs)
    return finetune_whole(ticket, task, cfg, **kwargs)


def _fid(
    config: ExperimentConfig, groups: list[GroupResult], source: Task, target: Task
) -> tuple[float | None, str | None]:
    """FID between source and target test splits under a pretrained extractor.

    The natural checkpoint of the first seed is preferred, else the first
    scheme's. Returns ``(None, None)`` when no checkpoint is available.
    """
    first_seed = [group for group in groups if group.seed == config.seeds[0]]
    first_seed.sort(key=lambda group: group.scheme != "natural")
    for group in first_seed:
        path = group.checkpoint_path
        if path is None or not path.exists():
            continue
        try:
            extractor = load_checkpoint(path).network(requires_grad=False)
            value = dataset_fid(extractor, source.test, target.test)
        except (RobustTicketsError, ValueError, ArithmeticError) as exc:
            logger.warning(f"FID with the {group.scheme} extractor failed: {exc}")
            continue
        return value, group.scheme
    return None, None


def run(
    config: ExperimentConfig, *, resume: bool = False, jobs: int = 1
) -> tuple[Report, RunStats]:
    """Run the whole sweep and write report, run stats and resolved config.

    Work is split into (pretraining scheme, seed) groups; with ``jobs > 1``
    the groups run in worker processes. A failing cell is recorded and the
    sweep continues.
    """
    started_at = datetime.now(UTC)
    workspace = Workspace(config.out_dir)
    dump_experiment_config(config, workspace.root / RESOLVED_CONFIG_FILE)
    for plan in config.pruning:
        if plan.scheme == "imp":
            plan.imp_config().resolved_schedule()

    jobs_list = [
        (index, seed)
        for seed in config.seeds
        for index in range(len(config.pretrain_schemes))
    ]
    logger.info(
        f"Running {config.cell_count()} cells in {len(jobs_list)} groups "
        f"({jobs} job{'s' if jobs != 1 else ''})"
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [
                executor.submit(run_group, config, index, seed, resume)
                for index, seed in jobs_list
            ]
            groups = [future.result() for future in futures]
    else:
        groups = [run_group(config, index, seed, resume) for index, seed in jobs_list]

    source, target = load_tasks(config)
    fid: float | None = None
    extractor: str | None = None
    if config.fid:
        fid, extractor = _fid(config, groups, source, target)

    cells = sorted(
        (cell for group in groups for cell in group.cells),
        key=lambda cell: cell.key.sort_key(),
    )
    report = Report(
        cells=tuple(cells),
        fid=fid,
        fid_extractor=extractor,
        source=source.name,
        target=target.name,
        provenance=Provenance(
            config_hash=content_hash(
                config.model_dump(mode="json", exclude={"out_dir"})
            ),
            versions=package_versions(),
        ),
    )
    steps: Counter[str] = Counter()
    for group in groups:
        steps.update(group.steps)
    stats = RunStats(
        started_at=started_at,
        finished_at=datetime.now(UTC),
        steps=dict(steps),
        cells_computed=sum(group.computed for group in groups),
        cells_cached=sum(group.cached for group in groups),
    )
    write_report(report, workspace.root / REPORT_FILE)
    write_run_stats(stats, workspace.root / RUN_STATS_FILE)
    failed = len(report.failed())
    logger.info(
        f"Sweep finished: {len(cells) - failed} ok, {failed} failed, "
        f"{stats.total_steps} optimizer steps"
    )
    return report, stats
