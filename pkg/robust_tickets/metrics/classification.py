from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
from sklearn.metrics import roc_auc_score

from robust_tickets.adversarial import pgd_attack
from robust_tickets.autodiff import softmax
from robust_tickets.config import AdvConfig
from robust_tickets.constants import (
    ECE_BINS,
    PROB_FLOOR,
    PROB_ROW_TOLERANCE,
)
from robust_tickets.data import Dataset
from robust_tickets.exceptions import (
    EmptyInputError,
    LabelIndexError,
    MalformedProbabilitiesError,
)
from robust_tickets.nn import MaskLike, Network

EVAL_BATCH = 256


def predict_logits(
    net: Network,
    masks: MaskLike | None,
    images: npt.NDArray[Any],
    *,
    batch_size: int = EVAL_BATCH,
) -> npt.NDArray[Any]:
    frozen = net.frozen()
    chunks = [
        frozen.forward(images[start : start + batch_size], masks).data
        for start in range(0, images.shape[0], batch_size)
    ]
    if not chunks:
        raise EmptyInputError("no images to evaluate")
    return np.concatenate(chunks)


def predict_proba(
    net: Network,
    masks: MaskLike | None,
    images: npt.NDArray[Any],
    *,
    batch_size: int = EVAL_BATCH,
) -> npt.NDArray[np.float64]:
    logits = predict_logits(net, masks, images, batch_size=batch_size)
    return softmax(logits.astype(np.float64))


def accuracy_from_logits(logits: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Fraction of argmax hits; ties go to the lowest class index."""
    scores = np.asarray(logits)
    targets = np.asarray(labels)
    if targets.size == 0:
        raise EmptyInputError("accuracy of an empty set")
    return float(np.mean(scores.argmax(axis=1) == targets))


def accuracy(
    net: Network,
    masks: MaskLike | None,
    dataset: Dataset,
    *,
    batch_size: int = EVAL_BATCH,
) -> float:
    if not len(dataset):
        raise EmptyInputError(f"{dataset.name}: accuracy of an empty dataset")
    logits = predict_logits(net, masks, dataset.images, batch_size=batch_size)
    return accuracy_from_logits(logits, dataset.labels)


def adversarial_accuracy(
    net: Network,
    masks: MaskLike | None,
    dataset: Dataset,
    cfg: AdvConfig,
    rng: np.random.Generator | None = None,
    *,
    batch_size: int = EVAL_BATCH,
) -> float:
    """Fraction classified correctly both clean and under the PGD attack."""
    if not len(dataset):
        raise EmptyInputError(f"{dataset.name}: accuracy of an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(0)
    frozen = net.frozen()
    correct = 0
    for x, y in dataset.batches(batch_size):
        clean = frozen.forward(x, masks).data.argmax(axis=1)
        perturbation = pgd_attack(frozen, masks, x, y, cfg, rng)
        attacked = frozen.forward(perturbation.apply(x), masks).data.argmax(axis=1)
        correct += int(np.count_nonzero((clean == y) & (attacked == y)))
    return correct / len(dataset)


def _check_probabilities(
    probs: npt.ArrayLike, labels: npt.ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.int64]]:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or y.shape != (p.shape[0],):
        raise MalformedProbabilitiesError(
            f"expected N x C probabilities and N labels, got {p.shape} and {y.shape}"
        )
    if p.shape[0] == 0:
        raise EmptyInputError("calibration of an empty set")
    if not np.isfinite(p).all() or (p < 0).any():
        raise MalformedProbabilitiesError("probabilities must be finite and >= 0")
    worst = float(np.abs(p.sum(axis=1) - 1.0).max())
    if worst > PROB_ROW_TOLERANCE:
        raise MalformedProbabilitiesError(
            f"probability rows must sum to 1 (max deviation {worst:.2e})"
        )
    if y.min() < 0 or y.max() >= p.shape[1]:
        raise LabelIndexError(f"labels must lie in [0, {p.shape[1]})")
    return p, y


@dataclass(frozen=True, slots=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


@dataclass(frozen=True, slots=True)
class Calibration:
    ece: float
    nll: float
    bins: tuple[ReliabilityBin, ...]


def reliability_bins(
    probs: npt.ArrayLike, labels: npt.ArrayLike, n_bins: int = ECE_BINS
) -> list[ReliabilityBin]:
    """Equal-width confidence bins over ``(lower, upper]`` of the max probability."""
    p, y = _check_probabilities(probs, labels)
    confidence = p.max(axis=1)
    hits = p.argmax(axis=1) == y
    index = np.clip(np.ceil(confidence * n_bins).astype(np.int64) - 1, 0, n_bins - 1)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    bins: list[ReliabilityBin] = []
    for b in range(n_bins):
        members = index == b
        count = int(np.count_nonzero(members))
        bins.append(
            ReliabilityBin(
                lower=float(edges[b]),
                upper=float(edges[b + 1]),
                count=count,
                accuracy=float(hits[members].mean()) if count else 0.0,
                confidence=float(confidence[members].mean()) if count else 0.0,
            )
        )
    return bins


def calibration(
    probs: npt.ArrayLike, labels: npt.ArrayLike, n_bins: int = ECE_BINS
) -> Calibration:
    p, y = _check_probabilities(probs, labels)
    bins = reliability_bins(p, y, n_bins)
    n = p.shape[0]
    ece = sum(b.count / n * abs(b.accuracy - b.confidence) for b in bins)
    picked = np.maximum(p[np.arange(n), y], PROB_FLOOR)
    nll = float(-np.log(picked).mean())
    return Calibration(ece=float(ece), nll=nll, bins=tuple(bins))


def max_softmax_score(probs: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.asarray(probs, dtype=np.float64).max(axis=1)


def roc_auc(id_scores: npt.ArrayLike, ood_scores: npt.ArrayLike) -> float:
    """AUC for separating in-distribution (positive) from OoD scores.

    Tied scores across the two sets count one half.
    """
    positive = np.asarray(id_scores, dtype=np.float64).ravel()
    negative = np.asarray(ood_scores, dtype=np.float64).ravel()
    if positive.size == 0 or negative.size == 0:
        raise EmptyInputError("roc_auc needs non-empty ID and OoD score sets")
    truth = np.concatenate([np.ones(positive.size), np.zeros(negative.size)])
    return float(roc_auc_score(truth, np.concatenate([positive, negative])))
