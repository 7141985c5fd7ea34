from __future__ import annotations

import logging
from itertools import pairwise
from pathlib import Path
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.adversarial import scheme_transform
from robust_tickets.autodiff import Tensor
from robust_tickets.config import AdvConfig, AdversarialScheme, TrainConfig
from robust_tickets.constants import Granularity, ImpObjective, Locus, PruneScope
from robust_tickets.data import Task
from robust_tickets.exceptions import ConfigError, TrainingDivergedError
from robust_tickets.nn import Checkpoint, MaskSet, Network
from robust_tickets.transfer import SGD, fit
from robust_tickets.utils import rng_streams

from .omp import magnitude_masks, prunable_weights
from .ticket import Ticket, provenance_for

logger = logging.getLogger(__name__)


def geometric_schedule(rate: float, rounds: int) -> tuple[float, ...]:
    """Cumulative sparsity ``1 - (1 - rate) ** k`` after each of ``rounds``."""
    if not 0.0 < rate < 1.0:
        raise ConfigError(f"prune rate must lie in (0, 1), got {rate}")
    if rounds < 1:
        raise ConfigError(f"need at least one round, got {rounds}")
    return tuple(1.0 - (1.0 - rate) ** k for k in range(1, rounds + 1))


class ImpConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    rate: float = Field(default=0.2, gt=0.0, lt=1.0)
    rounds: int = Field(default=10, ge=1)
    schedule: tuple[float, ...] | None = None
    epochs_per_round: int = Field(default=10, ge=0)
    objective: Literal["auto"] | ImpObjective = "auto"
    granularity: Granularity = "element"
    scope: PruneScope = "global"
    locus: Locus = "upstream"

    def resolved_schedule(self) -> tuple[float, ...]:
        """Explicit schedule, or the geometric one from rate and rounds."""
        if self.schedule is None:
            return geometric_schedule(self.rate, self.rounds)
        if not self.schedule:
            raise ConfigError("IMP schedule is empty")
        if any(not 0.0 <= s < 1.0 for s in self.schedule):
            raise ConfigError(f"IMP sparsities must lie in [0, 1): {self.schedule}")
        if any(a >= b for a, b in pairwise(self.schedule)):
            raise ConfigError(f"IMP schedule must increase: {self.schedule}")
        return self.schedule

    def resolved_objective(self, checkpoint: Checkpoint) -> ImpObjective:
        if self.objective != "auto":
            return self.objective
        scheme = checkpoint.metadata.pretraining_scheme
        return "adversarial" if scheme == "adversarial" else "natural"


def prune_locus(checkpoint: Checkpoint, task: Task) -> Locus:
    """Upstream when pruning on the pretraining task, downstream otherwise."""
    if task.name == checkpoint.metadata.source_task:
        return "upstream"
    return "downstream"


def _checkpoint_attack(checkpoint: Checkpoint) -> AdvConfig:
    scheme = checkpoint.metadata.extra.get("scheme", {})
    if isinstance(scheme, dict) and "adv" in scheme:
        return AdvConfig.model_validate(scheme["adv"])
    return AdvConfig()


def _rewound(checkpoint: Checkpoint, task: Task, head_seed: int) -> Network:
    net = checkpoint.network()
    if task.num_classes != checkpoint.spec.head.num_classes:
        net = net.replace_head(task.num_classes, np.random.default_rng(head_seed))
    return net


def _train_round(
    checkpoint: Checkpoint,
    task: Task,
    masks: MaskSet,
    round_cfg: TrainConfig,
    transform_scheme: AdversarialScheme | None,
    head_seed: int,
    rng: np.random.Generator,
    log_path: Path | None,
) -> tuple[dict[str, npt.NDArray[Any]], int]:
    net = _rewound(checkpoint, task, head_seed)
    data_rng, attack_rng = rng_streams(rng, 2)
    optimizer = SGD.for_network(net, round_cfg, masks=masks)

    def forward(x: npt.NDArray[Any]) -> Tensor:
        return net.forward(x, masks)

    transform = None
    if transform_scheme is not None:
        transform = scheme_transform(transform_scheme, net, masks, attack_rng)
    result = fit(
        forward,
        optimizer,
        task.train,
        round_cfg,
        rng=data_rng,
        transform=transform,
        stage=log_path.stem if log_path else "imp",
        log_path=log_path,
    )
    return {name: net.params[name].data for name in masks}, result.steps


def imp(
    checkpoint: Checkpoint,
    task: Task,
    cfg: ImpConfig,
    train_cfg: TrainConfig,
    adv_cfg: AdvConfig | None = None,
    rng: np.random.Generator | None = None,
    *,
    log_dir: Path | None = None,
) -> list[Ticket]:
    """Iterative magnitude pruning with rewinding to the pretrained weights.

    Every round restarts from ``theta_pre`` under the current mask, trains
    ``cfg.epochs_per_round`` epochs at a constant learning rate (PGD inputs
    for the adversarial objective), then prunes the lowest-magnitude
    surviving groups of the trained weights. One ticket per round; masks are
    nested.
    """
    schedule = cfg.resolved_schedule()
    objective = cfg.resolved_objective(checkpoint)
    locus = prune_locus(checkpoint, task)
    if locus != cfg.locus:
        raise ConfigError(
            f"IMP is configured for {cfg.locus} pruning, but task {task.name!r} "
            f"is {locus} of {checkpoint.metadata.source_task!r}"
        )
    adv_cfg = adv_cfg if adv_cfg is not None else _checkpoint_attack(checkpoint)
    attack = AdversarialScheme(adv=adv_cfg) if objective == "adversarial" else None
    seed_rng, *round_rngs = rng_streams(
        rng if rng is not None else train_cfg.seed, len(schedule) + 1
    )
    head_seed = int(seed_rng.integers(0, 2**63))
    round_cfg = train_cfg.model_copy(
        update={"epochs": cfg.epochs_per_round, "decay_epochs": ()}
    )

    masks = MaskSet.ones(
        {name: weight.shape for name, weight in prunable_weights(checkpoint).items()}
    )
    tickets: list[Ticket] = []
    for index, (target, round_rng) in enumerate(zip(schedule, round_rngs, strict=True)):
        weights = prunable_weights(checkpoint)
        steps = 0
        if cfg.epochs_per_round > 0:
            log_path = log_dir / f"imp-round{index}.jsonl" if log_dir else None
            try:
                weights, steps = _train_round(
                    checkpoint,
                    task,
                    masks,
                    round_cfg,
                    attack,
                    head_seed,
                    round_rng,
                    log_path,
                )
            except TrainingDivergedError as exc:
                raise exc.at(round_index=index) from exc

        masks = magnitude_masks(weights, target, cfg.granularity, cfg.scope, masks)
        logger.info(
            f"IMP-{objective} round {index}: target {target:.4f}, "
            f"realized {masks.sparsity():.4f}"
        )
        tickets.append(
            Ticket(
                checkpoint=checkpoint,
                masks=masks,
                sparsity=target,
                granularity=cfg.granularity,
                scheme="IMP-natural" if attack is None else "IMP-adversarial",
                locus=locus,
                provenance=provenance_for(
                    checkpoint,
                    prune_task=task.name,
                    prune_seed=train_cfg.seed,
                    scope=cfg.scope,
                    objective=objective,
                    schedule=schedule,
                    round_index=index,
                    extra={"train_steps": steps},
                ),
            )
        )
    return tickets
