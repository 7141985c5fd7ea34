from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.autodiff import Tensor, grad, softmax_cross_entropy, sum_
from robust_tickets.config import AdvConfig
from robust_tickets.exceptions import ContractError
from robust_tickets.nn import MaskLike, Network

logger = logging.getLogger(__name__)

PerSampleLoss = Callable[[Tensor], Tensor]


@dataclass(frozen=True, slots=True)
class Perturbation:
    """Additive input perturbation inside the L-infinity ball of ``epsilon``."""

    delta: npt.NDArray[Any]
    epsilon: float
    losses: npt.NDArray[Any]
    clean_losses: npt.NDArray[Any]
    clip_min: float = 0.0
    clip_max: float = 1.0

    def apply(self, x: npt.NDArray[Any]) -> npt.NDArray[Any]:
        """The attacked input, inside the ball around ``x`` in ``x``'s dtype."""
        eps = x.dtype.type(self.epsilon)
        lower, upper = ball_bounds(x, eps, self.clip_min, self.clip_max)
        return np.clip(x + self.delta.astype(x.dtype), lower, upper)

    def linf(self) -> float:
        return float(np.abs(self.delta).max()) if self.delta.size else 0.0

    @property
    def loss(self) -> float:
        return float(self.losses.mean())

    @property
    def clean_loss(self) -> float:
        return float(self.clean_losses.mean())


def ball_bounds(
    x: npt.NDArray[Any], eps: Any, clip_min: float, clip_max: float
) -> tuple[npt.NDArray[Any], npt.NDArray[Any]]:
    """Elementwise limits of the attacked input, exact in ``x``'s dtype.

    Every value ``v`` between the limits satisfies ``|v - x| <= eps`` when the
    difference is evaluated in ``x``'s own precision.
    """
    lower = np.maximum(x - eps, clip_min).astype(x.dtype)
    upper = np.minimum(x + eps, clip_max).astype(x.dtype)
    # x +- eps can round outward by one ulp
    for _ in range(2):
        upper = np.where(upper - x > eps, np.nextafter(upper, x), upper)
        lower = np.where(x - lower > eps, np.nextafter(lower, x), lower)
    return lower, upper


def _project(
    x: npt.NDArray[Any],
    delta: npt.NDArray[Any],
    bounds: tuple[npt.NDArray[Any], npt.NDArray[Any]],
) -> npt.NDArray[Any]:
    attacked = np.clip(x + delta.astype(x.dtype), *bounds)
    return (attacked - x).astype(x.dtype)


def _evaluate(loss_fn: PerSampleLoss, x: npt.NDArray[Any]) -> npt.NDArray[Any]:
    return np.array(loss_fn(Tensor(x)).data)


def pgd_perturb(
    loss_fn: PerSampleLoss,
    x: npt.ArrayLike,
    cfg: AdvConfig,
    rng: np.random.Generator,
    *,
    init_delta: npt.ArrayLike | None = None,
) -> Perturbation:
    """Signed-gradient ascent on per-sample losses, projected onto the ball.

    ``loss_fn`` maps an input batch to a vector of per-sample losses. With
    ``track_best`` every sample keeps the iterate with its highest loss,
    the unperturbed input included.
    """
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float32)
    eps = x.dtype.type(cfg.epsilon)
    zeros = np.zeros_like(x)
    x = np.clip(x, cfg.clip_min, cfg.clip_max).astype(x.dtype)
    clean = _evaluate(loss_fn, x)
    if cfg.epsilon == 0:
        return Perturbation(zeros, 0.0, clean, clean, cfg.clip_min, cfg.clip_max)

    bounds = ball_bounds(x, eps, cfg.clip_min, cfg.clip_max)
    if init_delta is not None:
        delta = _project(x, np.asarray(init_delta, dtype=x.dtype), bounds)
    elif cfg.init == "random":
        delta = _project(x, rng.uniform(-eps, eps, size=x.shape), bounds)
    else:
        delta = zeros

    batch_shape = (x.shape[0],) + (1,) * (x.ndim - 1)
    best_delta, best_loss = zeros, clean
    step_size = x.dtype.type(cfg.step_size)
    for step in range(cfg.steps + 1):
        inputs = Tensor(np.clip(x + delta, *bounds), requires_grad=True)
        losses = loss_fn(inputs)
        current = np.asarray(losses.data)
        if cfg.track_best:
            improved = current > best_loss
            best_loss = np.where(improved, current, best_loss)
            best_delta = np.where(improved.reshape(batch_shape), delta, best_delta)
        else:
            best_delta, best_loss = delta, current
        if step == cfg.steps:
            break

        (g,) = grad(sum_(losses), [inputs])
        delta = _project(x, delta + step_size * np.sign(g), bounds)
        if np.abs(np.clip(x + delta, *bounds) - x).max() > eps:
            raise ContractError(f"perturbation left the epsilon ball at step {step}")

    logger.debug(
        f"PGD eps={cfg.epsilon:.4f} steps={cfg.steps}: "
        f"clean loss {clean.mean():.4f} -> {best_loss.mean():.4f}"
    )
    return Perturbation(
        best_delta.astype(x.dtype),
        cfg.epsilon,
        best_loss,
        clean,
        cfg.clip_min,
        cfg.clip_max,
    )


def pgd_attack(
    net: Network,
    masks: MaskLike | None,
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    cfg: AdvConfig,
    rng: np.random.Generator,
    *,
    init_delta: npt.ArrayLike | None = None,
) -> Perturbation:
    """Inner maximization of the robust objective against ``f(m * theta, .)``.

    The attack runs on a gradient-free view of ``net``; weights are only read.
    """
    frozen = net.frozen()
    labels = np.asarray(y)

    def loss_fn(inputs: Tensor) -> Tensor:
        logits = frozen.forward(inputs, masks)
        return softmax_cross_entropy(logits, labels, reduction="none")

    data = np.asarray(x, dtype=net.dtype)
    return pgd_perturb(loss_fn, data, cfg, rng, init_delta=init_delta)
