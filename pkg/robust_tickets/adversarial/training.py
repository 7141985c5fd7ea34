from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np
import numpy.typing as npt

from robust_tickets.autodiff import Tensor, grad, softmax_cross_entropy
from robust_tickets.config import (
    AdvConfig,
    AdversarialScheme,
    NaturalScheme,
    PretrainScheme,
    SmoothingScheme,
)
from robust_tickets.exceptions import TrainingDivergedError
from robust_tickets.nn import MaskLike, Network

from .pgd import pgd_attack
from .smoothing import gaussian_augment

Forward = Callable[[npt.NDArray[Any]], Tensor]
InputTransform = Callable[[npt.NDArray[Any], npt.NDArray[Any]], npt.NDArray[Any]]


class Optimizer(Protocol):
    params: Mapping[str, Tensor]

    def step(self, grads: Mapping[str, npt.NDArray[Any]]) -> None: ...


@dataclass(frozen=True, slots=True)
class StepOutcome:
    loss: float
    correct: int
    size: int


def train_step(
    forward: Forward,
    x: npt.NDArray[Any],
    y: npt.NDArray[Any],
    optimizer: Optimizer,
    *,
    step: int = 0,
) -> StepOutcome:
    """One cross-entropy step on the optimizer's parameters."""
    logits = forward(x)
    loss = softmax_cross_entropy(logits, y)
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingDivergedError(step)

    names = list(optimizer.params)
    grads = grad(loss, [optimizer.params[name] for name in names])
    if not all(np.isfinite(g).all() for g in grads):
        raise TrainingDivergedError(step)
    optimizer.step(dict(zip(names, grads, strict=True)))

    correct = int(np.count_nonzero(logits.data.argmax(axis=1) == y))
    return StepOutcome(value, correct, len(y))


def adversarial_train_step(
    net: Network,
    masks: MaskLike | None,
    batch: tuple[npt.NDArray[Any], npt.NDArray[Any]],
    cfg: AdvConfig,
    optimizer: Optimizer,
    rng: np.random.Generator,
    *,
    step: int = 0,
) -> float:
    """Attack the batch with PGD, then descend on the adversarial loss."""
    x, y = batch
    perturbation = pgd_attack(net, masks, x, y, cfg, rng)

    def forward(inputs: npt.NDArray[Any]) -> Tensor:
        return net.forward(inputs, masks)

    return train_step(forward, perturbation.apply(x), y, optimizer, step=step).loss


def scheme_transform(
    scheme: PretrainScheme,
    net: Network,
    masks: MaskLike | None,
    rng: np.random.Generator,
) -> InputTransform | None:
    """Per-batch input transform realizing a pretraining scheme's objective."""
    match scheme:
        case NaturalScheme():
            return None
        case AdversarialScheme(adv=adv):

            def attack(x: npt.NDArray[Any], y: npt.NDArray[Any]) -> npt.NDArray[Any]:
                return pgd_attack(net, masks, x, y, adv, rng).apply(x)

            return attack
        case SmoothingScheme(sigma=sigma):

            def smooth(x: npt.NDArray[Any], y: npt.NDArray[Any]) -> npt.NDArray[Any]:
                return gaussian_augment(x, sigma, rng)

            return smooth
    raise TypeError(f"unsupported pretraining scheme {scheme!r}")
