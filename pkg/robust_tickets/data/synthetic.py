"""Procedural shape/texture images with a controllable domain shift.

Every class owns a prototype (silhouette, stripe texture, foreground color).
Samples draw their own placement, size, phase, brightness, background and a
unit-normal noise field. The stripes modulate the foreground by
``texture_contrast``; below the attack radius they are a cue an adversary can
erase. The shifted rendering reuses those draws and only scales the shift
components by the magnitude ``s``, so ``s = 0`` renders the source images
exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from .dataset import Dataset, Task, split_indices

logger = logging.getLogger(__name__)

_SHAPES = ("disc", "square", "diamond", "ring")
_EDGE = 0.04


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_classes: int = Field(default=10, gt=0)
    image_size: int = Field(default=32, ge=8)
    channels: int = Field(default=3, gt=0)
    samples_per_class: int = Field(default=120, gt=0)
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    base_noise: float = Field(default=0.02, ge=0.0)
    texture_contrast: float = Field(default=0.45, ge=0.0, le=1.0)
    seed: int = 0

    @property
    def num_samples(self) -> int:
        return self.num_classes * self.samples_per_class


class ShiftConfig(BaseModel):
    """Domain shift of the target; every component is scaled by ``magnitude``."""

    model_config = ConfigDict(frozen=True)

    magnitude: float = Field(default=0.5, ge=0.0, le=1.0)
    color_shift: float = Field(default=0.35, ge=0.0)
    noise_sigma: float = Field(default=0.12, ge=0.0)
    texture_shift: float = Field(default=0.75, ge=0.0)
    seed: int = 0


@dataclass(frozen=True, slots=True)
class _Prototypes:
    shape: npt.NDArray[np.int64]
    frequency: npt.NDArray[np.float64]
    orientation: npt.NDArray[np.float64]
    color: npt.NDArray[np.float64]


@dataclass(frozen=True, slots=True)
class _Latents:
    labels: npt.NDArray[np.int64]
    center: npt.NDArray[np.float64]
    radius: npt.NDArray[np.float64]
    phase: npt.NDArray[np.float64]
    brightness: npt.NDArray[np.float64]
    background: npt.NDArray[np.float64]
    noise: npt.NDArray[np.float64]


def _prototypes(cfg: GeneratorConfig, count: int) -> _Prototypes:
    rng = np.random.default_rng([cfg.seed, 0])
    return _Prototypes(
        shape=np.arange(count) % len(_SHAPES),
        frequency=rng.uniform(1.5, 5.0, size=count),
        orientation=rng.uniform(0.0, np.pi, size=count),
        color=rng.uniform(0.35, 0.95, size=(count, cfg.channels)),
    )


def _latents(
    cfg: GeneratorConfig,
    n: int,
    rng: np.random.Generator,
    classes: npt.NDArray[np.int64] | None = None,
) -> _Latents:
    labels = rng.integers(0, cfg.num_classes, size=n) if classes is None else classes
    size = cfg.image_size
    return _Latents(
        labels=np.asarray(labels, dtype=np.int64),
        center=rng.uniform(-0.2, 0.2, size=(n, 2)),
        radius=rng.uniform(0.4, 0.65, size=n),
        phase=rng.uniform(0.0, 2 * np.pi, size=n),
        brightness=rng.uniform(0.85, 1.05, size=n),
        background=rng.uniform(0.0, 0.25, size=(n, cfg.channels)),
        noise=rng.standard_normal(size=(n, cfg.channels, size, size)),
    )


def _render(
    cfg: GeneratorConfig,
    protos: _Prototypes,
    latents: _Latents,
    shift: ShiftConfig | None,
) -> npt.NDArray[np.float32]:
    s = shift.magnitude if shift is not None else 0.0
    axis = np.linspace(-1.0, 1.0, cfg.image_size)
    v, u = np.meshgrid(axis, axis, indexing="ij")
    u, v = u[None], v[None]

    cls = latents.labels
    du = u - latents.center[:, 0, None, None]
    dv = v - latents.center[:, 1, None, None]
    radial = np.sqrt(du**2 + dv**2)
    radius = latents.radius[:, None, None]
    distance = np.select(
        [
            protos.shape[cls, None, None] == 0,
            protos.shape[cls, None, None] == 1,
            protos.shape[cls, None, None] == 2,
        ],
        [
            radial,
            np.maximum(np.abs(du), np.abs(dv)),
            (np.abs(du) + np.abs(dv)) * 0.75,
        ],
        default=np.abs(radial - 0.65 * radius) + 0.65 * radius,
    )
    silhouette = 1.0 / (1.0 + np.exp((distance - radius) / _EDGE))

    texture_scale = 1.0 + s * (shift.texture_shift if shift is not None else 0.0)
    frequency = protos.frequency[cls, None, None] * texture_scale
    theta = protos.orientation[cls, None, None]
    stripes = 0.5 + 0.5 * np.sin(
        np.pi * frequency * (u * np.cos(theta) + v * np.sin(theta))
        + latents.phase[:, None, None]
    )

    contrast = cfg.texture_contrast
    shade = (1.0 - contrast + contrast * stripes) * latents.brightness[:, None, None]
    foreground = protos.color[cls][:, :, None, None] * shade[:, None]
    background = latents.background[:, :, None, None]
    mask = silhouette[:, None]
    images = background * (1.0 - mask) + foreground * mask

    noise_level = cfg.base_noise
    if shift is not None:
        direction = np.random.default_rng([shift.seed, 1]).uniform(
            -1.0, 1.0, size=cfg.channels
        )
        images = images + s * shift.color_shift * direction[None, :, None, None]
        noise_level = noise_level + s * shift.noise_sigma
    images = images + noise_level * latents.noise
    return np.clip(images, 0.0, 1.0).astype(np.float32)


def _task(
    name: str,
    cfg: GeneratorConfig,
    images: npt.NDArray[np.float32],
    labels: npt.NDArray[np.int64],
    train_index: npt.NDArray[np.int64],
    test_index: npt.NDArray[np.int64],
) -> Task:
    data = Dataset(images, labels, cfg.num_classes, name)
    return Task(
        name,
        data.subset(train_index, "train"),
        data.subset(test_index, "test"),
    )


def make_shifted_pair(
    base: GeneratorConfig,
    shift: ShiftConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Task, Task]:
    """Source task and its shifted target, both split by the same partition."""
    rng = rng if rng is not None else np.random.default_rng([base.seed, 2])
    protos = _prototypes(base, 2 * base.num_classes)
    latents = _latents(base, base.num_samples, rng)
    train_index, test_index = split_indices(base.num_samples, base.test_fraction, rng)

    source = _render(base, protos, latents, None)
    target = _render(base, protos, latents, shift)
    logger.debug(
        f"Rendered {base.num_samples} synthetic images at shift {shift.magnitude}"
    )
    return (
        _task(
            "synthetic-source", base, source, latents.labels, train_index, test_index
        ),
        _task(
            f"synthetic-target-s{shift.magnitude:g}",
            base,
            target,
            latents.labels,
            train_index,
            test_index,
        ),
    )


def make_ood_dataset(
    base: GeneratorConfig, n: int | None = None, seed: int | None = None
) -> Dataset:
    """Images drawn from class prototypes that no training class uses."""
    n = n if n is not None else base.num_classes * max(base.samples_per_class // 5, 1)
    rng = np.random.default_rng([base.seed if seed is None else seed, 3])
    protos = _prototypes(base, 2 * base.num_classes)
    labels = rng.integers(0, base.num_classes, size=n)
    latents = _latents(base, n, rng, labels + base.num_classes)
    images = _render(base, protos, latents, None)
    return Dataset(images, labels, base.num_classes, "synthetic-ood", "test")

