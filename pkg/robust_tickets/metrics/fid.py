from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg

from robust_tickets.constants import PSD_TOLERANCE
from robust_tickets.data import Dataset
from robust_tickets.exceptions import DimensionError, EmptyInputError, NonPSDError
from robust_tickets.nn import MaskLike, Network

logger = logging.getLogger(__name__)

PENULTIMATE = "penultimate"


@dataclass(frozen=True, slots=True)
class FIDStats:
    """Gaussian fit of a feature cloud.

    ``underdetermined`` flags fewer samples than feature dimensions, where
    the covariance is rank deficient.
    """

    mu: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]
    n: int
    layer: str = PENULTIMATE

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    @property
    def underdetermined(self) -> bool:
        return self.n < self.dim


def feature_stats(features: npt.ArrayLike, layer: str = PENULTIMATE) -> FIDStats:
    """Sample mean and unbiased covariance of an N x D feature matrix."""
    values = np.asarray(features, dtype=np.float64)
    if values.ndim != 2:
        values = values.reshape(values.shape[0], -1)
    n = values.shape[0]
    if n < 2:
        raise EmptyInputError(f"need at least 2 samples for a covariance, got {n}")
    mu = values.mean(axis=0)
    sigma = np.atleast_2d(np.cov(values, rowvar=False, ddof=1))
    sigma = (sigma + sigma.T) / 2
    stats = FIDStats(mu=mu, sigma=sigma, n=n, layer=layer)
    if stats.underdetermined:
        logger.warning(f"{n} samples for {stats.dim} feature dimensions")
    return stats


def extract_features(
    extractor: Network,
    images: npt.NDArray[Any],
    masks: MaskLike | None = None,
    *,
    batch_size: int = 256,
) -> npt.NDArray[np.float64]:
    frozen = extractor.frozen()
    chunks = [
        frozen.features(images[start : start + batch_size], masks).data
        for start in range(0, images.shape[0], batch_size)
    ]
    if not chunks:
        raise EmptyInputError("no images to extract features from")
    return np.concatenate(chunks).astype(np.float64)


def gaussian_stats(
    extractor: Network,
    dataset: Dataset,
    masks: MaskLike | None = None,
    *,
    batch_size: int = 256,
) -> FIDStats:
    """Penultimate-layer Gaussian fit of ``dataset`` under ``extractor``."""
    if len(dataset) < 2:
        raise EmptyInputError(f"{dataset.name}: need at least 2 images")
    features = extract_features(extractor, dataset.images, masks, batch_size=batch_size)
    return feature_stats(features)


def _clamp_psd(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    tolerance = PSD_TOLERANCE * max(1.0, float(np.abs(values).max(initial=0.0)))
    if values.size and values.min() < -tolerance:
        raise NonPSDError(float(values.min()), tolerance)
    return np.clip(values, 0.0, None)


def _sqrtm_psd(matrix: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    values, vectors = scipy.linalg.eigh(matrix)
    root = (vectors * np.sqrt(_clamp_psd(values))) @ vectors.T
    return (root + root.T) / 2


def frechet_distance(a: FIDStats, b: FIDStats) -> float:
    """``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)``.

    Both square roots go through symmetric eigendecompositions; eigenvalues
    slightly below zero are clamped, larger violations raise NonPSDError.
    """
    if a.mu.shape != b.mu.shape or a.sigma.shape != b.sigma.shape:
        raise DimensionError("frechet_distance", a.sigma.shape, b.sigma.shape)
    _clamp_psd(scipy.linalg.eigvalsh(b.sigma))
    root_a = _sqrtm_psd(a.sigma)
    product = root_a @ b.sigma @ root_a
    cross = np.sqrt(_clamp_psd(scipy.linalg.eigvalsh((product + product.T) / 2))).sum()
    diff = a.mu - b.mu
    value = float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2 * cross)
    return max(value, 0.0)


def dataset_fid(
    extractor: Network,
    source: Dataset,
    target: Dataset,
    *,
    batch_size: int = 256,
) -> float:
    stats_a = gaussian_stats(extractor, source, batch_size=batch_size)
    stats_b = gaussian_stats(extractor, target, batch_size=batch_size)
    value = frechet_distance(stats_a, stats_b)
    logger.debug(f"FID {source.name} vs {target.name}: {value:.6f}")
    return value
