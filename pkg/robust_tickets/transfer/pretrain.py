from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.adversarial import scheme_transform
from robust_tickets.autodiff import Tensor
from robust_tickets.config import PretrainScheme, TrainConfig
from robust_tickets.constants import InitScheme
from robust_tickets.data import Task
from robust_tickets.exceptions import ConfigError
from robust_tickets.nn import Checkpoint, CheckpointMetadata, NetworkSpec, build_model
from robust_tickets.utils import rng_streams

from .optim import SGD
from .trainer import fit

logger = logging.getLogger(__name__)


def pretrain(
    spec: NetworkSpec,
    source: Task,
    scheme: PretrainScheme,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
    *,
    init: InitScheme = "kaiming_uniform",
    log_path: Path | None = None,
) -> Checkpoint:
    """Train a dense model on ``source`` under ``scheme`` and snapshot it.

    Initialization, data order and the scheme's own randomness (PGD starts,
    gaussian noise) draw from separate streams, so an adversarial run with
    ``epsilon=0`` or a smoothing run with ``sigma=0`` replays the natural run.
    """
    if tuple(spec.input_shape) != source.image_shape:
        raise ConfigError(
            f"{spec.name} expects inputs {spec.input_shape}, "
            f"{source.name} has {source.image_shape}"
        )
    if spec.head.num_classes != source.num_classes:
        spec = spec.with_head(source.num_classes)

    init_rng, data_rng, scheme_rng = rng_streams(
        rng if rng is not None else cfg.seed, 3
    )
    net = build_model(spec, init, init_rng)
    optimizer = SGD.for_network(net, cfg)

    def forward(x: npt.NDArray[Any]) -> Tensor:
        return net.forward(x)

    logger.info(f"Pretraining {spec.name} on {source.name} ({scheme.name})")
    result = fit(
        forward,
        optimizer,
        source.train,
        cfg,
        rng=data_rng,
        transform=scheme_transform(scheme, net, None, scheme_rng),
        stage=f"pretrain-{scheme.name}",
        log_path=log_path,
    )
    final = result.final
    metadata = CheckpointMetadata(
        source_task=source.name,
        pretraining_scheme=scheme.name,
        seed=cfg.seed,
        epoch=cfg.epochs,
        extra={
            "scheme": scheme.model_dump(mode="json"),
            "train_steps": result.steps,
            "final_train_loss": final.train_loss if final else None,
            "final_train_accuracy": final.train_accuracy if final else None,
        },
    )
    logger.info(
        f"Pretrained {spec.name} ({scheme.name}) in {result.steps} steps, "
        f"train accuracy {metadata.extra['final_train_accuracy']}"
    )
    return Checkpoint.from_network(net, metadata)
