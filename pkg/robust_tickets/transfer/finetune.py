from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt

from robust_tickets.autodiff import Tensor
from robust_tickets.config import AdvConfig, TrainConfig
from robust_tickets.constants import TransferMode
from robust_tickets.data import Dataset, Task
from robust_tickets.exceptions import ConfigError, WeightMutationError
from robust_tickets.metrics import MetricsReport, evaluate_ticket, extract_features
from robust_tickets.nn import MaskSet, Network, weights_digest
from robust_tickets.utils import rng_streams

from .optim import SGD
from .trainer import EpochRecord, FeatureSet, fit

if TYPE_CHECKING:
    from robust_tickets.pruning import Ticket

logger = logging.getLogger(__name__)


@dataclass
class TransferResult:
    mode: TransferMode
    network: Network
    masks: MaskSet
    report: MetricsReport
    history: list[EpochRecord] = field(default_factory=list)
    steps: int = 0


def _prepare(
    ticket: Ticket,
    task: Task,
    cfg: TrainConfig,
    rng: np.random.Generator | None,
    *,
    requires_grad: bool,
) -> tuple[Network, list[np.random.Generator]]:
    spec = ticket.checkpoint.spec
    if tuple(spec.input_shape) != task.image_shape:
        raise ConfigError(
            f"ticket expects inputs {spec.input_shape}, "
            f"{task.name} has {task.image_shape}"
        )
    head_rng, data_rng, eval_rng = rng_streams(rng if rng is not None else cfg.seed, 3)
    net = ticket.checkpoint.network(requires_grad=requires_grad)
    net = net.replace_head(task.num_classes, head_rng)
    return net, [data_rng, eval_rng]


def finetune_whole(
    ticket: Ticket,
    task: Task,
    cfg: TrainConfig,
    *,
    adv_cfg: AdvConfig | None = None,
    ood: Dataset | None = None,
    rng: np.random.Generator | None = None,
    log_path: Path | None = None,
) -> TransferResult:
    """Finetune every unmasked weight of the ticket under a fresh head.

    Masked weights keep their stored value and the mask never changes.
    """
    net, (data_rng, eval_rng) = _prepare(ticket, task, cfg, rng, requires_grad=True)
    masks = ticket.masks
    optimizer = SGD.for_network(net, cfg, masks=masks)

    def forward(x: npt.NDArray[Any]) -> Tensor:
        return net.forward(x, masks)

    logger.info(
        f"Finetuning {ticket.scheme} ticket at sparsity {ticket.sparsity:g} "
        f"on {task.name}"
    )
    result = fit(
        forward,
        optimizer,
        task.train,
        cfg,
        rng=data_rng,
        stage="finetune",
        log_path=log_path,
    )
    report = evaluate_ticket(
        net, masks, task.test, adv_cfg=adv_cfg, ood=ood, rng=eval_rng
    )
    return TransferResult(
        "finetune", net, masks, report, result.history, result.steps
    )


def linear_eval(
    ticket: Ticket,
    task: Task,
    cfg: TrainConfig,
    *,
    adv_cfg: AdvConfig | None = None,
    ood: Dataset | None = None,
    rng: np.random.Generator | None = None,
    log_path: Path | None = None,
) -> TransferResult:
    """Train only a new linear head on the frozen ticket's penultimate features.

    Features are extracted once, so training sees no augmentation.
    """
    net, (data_rng, eval_rng) = _prepare(ticket, task, cfg, rng, requires_grad=False)
    masks = ticket.masks
    body = [name for name in net.params if name not in net.head_names()]
    before = weights_digest({name: net.params[name].data for name in body})

    features = FeatureSet(
        extract_features(net, task.train.images, masks).astype(net.dtype),
        task.train.labels,
    )
    optimizer = SGD.for_network(net, cfg, frozen=body)

    def forward(x: npt.NDArray[Any]) -> Tensor:
        return net.head_forward(Tensor(x))

    logger.info(
        f"Linear evaluation of {ticket.scheme} ticket at sparsity "
        f"{ticket.sparsity:g} on {task.name}"
    )
    result = fit(
        forward,
        optimizer,
        features,
        cfg,
        rng=data_rng,
        augment=False,
        stage="linear",
        log_path=log_path,
    )
    if weights_digest({name: net.params[name].data for name in body}) != before:
        raise WeightMutationError("linear evaluation modified the frozen body")

    report = evaluate_ticket(
        net, masks, task.test, adv_cfg=adv_cfg, ood=ood, rng=eval_rng
    )
    return TransferResult("linear", net, masks, report, result.history, result.steps)
