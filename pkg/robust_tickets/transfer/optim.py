from __future__ import annotations

from collections.abc import Iterable, Mapping
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.autodiff import Tensor
from robust_tickets.config import TrainConfig
from robust_tickets.nn import Network


class SGD:
    """SGD with heavy-ball momentum and L2 weight decay.

    Entries where ``masks`` is zero never move: their update and velocity are
    masked out, so pruned weights keep their stored value and cannot regrow.
    Leaves get a new ``data`` array on every step; arrays are never written
    in place.
    """

    def __init__(
        self,
        params: Mapping[str, Tensor],
        *,
        lr: float,
        momentum: float = 0.0,
        weight_decay: float = 0.0,
        masks: Mapping[str, npt.NDArray[Any]] | None = None,
        frozen: Iterable[str] = (),
    ) -> None:
        skip = set(frozen)
        self.params = {name: p for name, p in params.items() if name not in skip}
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.masks = {
            name: np.asarray(mask, dtype=self.params[name].dtype)
            for name, mask in (masks or {}).items()
            if name in self.params
        }
        self.velocity = {
            name: np.zeros_like(p.data) for name, p in self.params.items()
        }

    @classmethod
    def for_network(
        cls,
        net: Network,
        cfg: TrainConfig,
        *,
        masks: Mapping[str, npt.NDArray[Any]] | None = None,
        frozen: Iterable[str] = (),
    ) -> SGD:
        return cls(
            net.params,
            lr=cfg.base_lr,
            momentum=cfg.momentum,
            weight_decay=cfg.weight_decay,
            masks=masks,
            frozen=frozen,
        )

    def step(self, grads: Mapping[str, npt.NDArray[Any]]) -> None:
        for name, g in grads.items():
            param = self.params.get(name)
            if param is None:
                continue
            direction = g + self.weight_decay * param.data
            velocity = self.momentum * self.velocity[name] + direction
            mask = self.masks.get(name)
            if mask is not None:
                velocity = velocity * mask
            self.velocity[name] = velocity.astype(param.dtype)
            param.data = (param.data - self.lr * velocity).astype(param.dtype)
