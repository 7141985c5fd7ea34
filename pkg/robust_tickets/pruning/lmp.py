from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.autodiff import Tensor
from robust_tickets.autodiff.tensor import Array
from robust_tickets.config import TrainConfig
from robust_tickets.constants import ScoreInit
from robust_tickets.data import Task
from robust_tickets.exceptions import ConfigError, MaskError, WeightMutationError
from robust_tickets.nn import Checkpoint, MaskSet, weights_digest
from robust_tickets.transfer import SGD, fit
from robust_tickets.utils import rng_streams

from .omp import allocate_targets, check_sparsity, prunable_weights
from .ticket import Ticket, provenance_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MaskScores:
    """Real-valued mask scores with the number of entries each layer keeps."""

    scores: Mapping[str, npt.NDArray[Any]]
    keep: Mapping[str, int]

    def __post_init__(self) -> None:
        if set(self.scores) != set(self.keep):
            raise MaskError("scores and keep counts name different layers")
        for name, k in self.keep.items():
            size = self.scores[name].size
            if not 0 <= k <= size:
                raise ConfigError(f"{name}: keep count {k} outside [0, {size}]")

    def binarize(self) -> MaskSet:
        return MaskSet(
            {
                name: topk_mask(score, self.keep[name])
                for name, score in self.scores.items()
            }
        )


def keep_plan(shapes: Mapping[str, tuple[int, ...]], sparsity: float) -> dict[str, int]:
    """Per-layer keep counts with the global sparsity spread uniformly."""
    check_sparsity(sparsity)
    sizes = {name: math.prod(shape) for name, shape in shapes.items()}
    zeros = allocate_targets(sizes, sparsity)
    return {name: sizes[name] - zeros[name] for name in sizes}


def topk_mask(scores: npt.ArrayLike, k: int) -> npt.NDArray[np.bool_]:
    """Ones at the ``k`` highest scores; equal scores go to the lower index."""
    values = np.asarray(scores)
    if not 0 <= k <= values.size:
        raise ConfigError(f"keep count {k} outside [0, {values.size}]")
    flat = np.zeros(values.size, dtype=np.bool_)
    flat[np.argsort(-values.ravel(), kind="stable")[:k]] = True
    return flat.reshape(values.shape)


def topk_binarize(scores: Tensor, k: int) -> Tensor:
    """Top-k binarization with a straight-through backward.

    The forward is the hard 0/1 mask; the backward hands the incoming gradient
    to the scores unchanged.
    """
    mask = topk_mask(scores.data, k).astype(scores.dtype)

    def backward(g: Array) -> tuple[Array]:
        return (g,)

    return Tensor.from_op("topk_binarize", mask, (scores,), backward)


class LmpConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sparsity: float = Field(ge=0.0, lt=1.0)
    score_init: ScoreInit = "magnitude"
    reset_head: bool = True


def _initial_scores(
    weights: Mapping[str, npt.NDArray[Any]],
    cfg: LmpConfig,
    rng: np.random.Generator,
) -> dict[str, Tensor]:
    scores: dict[str, Tensor] = {}
    for name, weight in weights.items():
        if cfg.score_init == "magnitude":
            data = np.abs(weight)
        else:
            data = rng.uniform(0.0, 1.0, size=weight.shape)
        scores[name] = Tensor(
            data.astype(weight.dtype), requires_grad=True, name=f"{name}.score"
        )
    return scores


def lmp(
    checkpoint: Checkpoint,
    task: Task,
    cfg: LmpConfig,
    train_cfg: TrainConfig,
    rng: np.random.Generator | None = None,
    *,
    keep: Mapping[str, int] | None = None,
    log_path: Path | None = None,
) -> Ticket:
    """Learn a mask over frozen pretrained weights on the downstream task.

    Scores are trained with SGD through ``topk_binarize``; only the scores and
    a replaced classifier head receive updates. The body weights must come
    out bit-identical, otherwise WeightMutationError.
    """
    check_sparsity(cfg.sparsity)
    head_rng, score_rng, data_rng = rng_streams(
        rng if rng is not None else train_cfg.seed, 3
    )
    weights = prunable_weights(checkpoint)
    shapes = {name: weight.shape for name, weight in weights.items()}
    plan = dict(keep) if keep is not None else keep_plan(shapes, cfg.sparsity)
    scores = _initial_scores(weights, cfg, score_rng)
    MaskScores({name: s.data for name, s in scores.items()}, plan)

    net = checkpoint.network(requires_grad=False)
    replace = cfg.reset_head or task.num_classes != checkpoint.spec.head.num_classes
    trainable: dict[str, Tensor] = {}
    if replace:
        net = net.replace_head(task.num_classes, head_rng)
        for name in net.head_names():
            if name not in weights:
                trainable[name] = net.params[name]
    trainable.update({f"{name}.score": score for name, score in scores.items()})
    frozen = [name for name in net.params if name not in trainable]
    before = weights_digest({name: net.params[name].data for name in frozen})

    optimizer = SGD(
        trainable,
        lr=train_cfg.base_lr,
        momentum=train_cfg.momentum,
        weight_decay=train_cfg.weight_decay,
    )

    def forward(x: npt.NDArray[Any]) -> Tensor:
        binary = {
            name: topk_binarize(score, plan[name]) for name, score in scores.items()
        }
        return net.forward(x, binary)

    logger.info(
        f"LMP on {task.name}: keeping {sum(plan.values())} of "
        f"{sum(w.size for w in weights.values())} weights"
    )
    result = fit(
        forward,
        optimizer,
        task.train,
        train_cfg,
        rng=data_rng,
        stage="lmp",
        log_path=log_path,
    )
    if weights_digest({name: net.params[name].data for name in frozen}) != before:
        raise WeightMutationError("mask learning modified the pretrained weights")

    masks = MaskScores({name: s.data for name, s in scores.items()}, plan).binarize()
    return Ticket(
        checkpoint=checkpoint,
        masks=masks,
        sparsity=cfg.sparsity,
        granularity="element",
        scheme="LMP",
        locus="downstream",
        provenance=provenance_for(
            checkpoint,
            prune_task=task.name,
            prune_seed=train_cfg.seed,
            extra={
                "score_init": cfg.score_init,
                "keep": plan,
                "train_steps": result.steps,
            },
        ),
    )
