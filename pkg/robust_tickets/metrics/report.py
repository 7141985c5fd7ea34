from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.autodiff import softmax
from robust_tickets.config import AdvConfig
from robust_tickets.constants import ECE_BINS
from robust_tickets.data import Dataset
from robust_tickets.nn import MaskLike, Network

from .classification import (
    EVAL_BATCH,
    accuracy_from_logits,
    adversarial_accuracy,
    calibration,
    max_softmax_score,
    predict_logits,
    roc_auc,
)

logger = logging.getLogger(__name__)


class MetricsReport(BaseModel):
    """One evaluated model: the accuracy, calibration and robustness metrics.

    Metrics that were not computed are ``None`` and named in ``skipped``.
    """

    model_config = ConfigDict(frozen=True)

    accuracy: float = Field(ge=0.0, le=1.0)
    adv_accuracy: float | None = Field(default=None, ge=0.0, le=1.0)
    ece: float = Field(ge=0.0, le=1.0)
    nll: float = Field(ge=0.0)
    roc_auc: float | None = Field(default=None, ge=0.0, le=1.0)
    n_samples: int = Field(ge=0)
    attack: AdvConfig | None = None
    ood_dataset: str | None = None
    skipped: tuple[str, ...] = ()


def evaluate_ticket(
    net: Network,
    masks: MaskLike | None,
    dataset: Dataset,
    *,
    adv_cfg: AdvConfig | None = None,
    ood: Dataset | None = None,
    rng: np.random.Generator | None = None,
    n_bins: int = ECE_BINS,
    batch_size: int = EVAL_BATCH,
) -> MetricsReport:
    """Accuracy, ECE, NLL, Adv-Acc (with ``adv_cfg``) and ROC-AUC (with ``ood``)."""
    logits = predict_logits(net, masks, dataset.images, batch_size=batch_size)
    probs = softmax(logits.astype(np.float64))
    calib = calibration(probs, dataset.labels, n_bins)
    skipped: list[str] = []

    adv_acc = None
    if adv_cfg is not None:
        adv_acc = adversarial_accuracy(
            net, masks, dataset, adv_cfg, rng, batch_size=batch_size
        )
    else:
        skipped.append("adv_accuracy")

    auc = None
    if ood is not None and len(ood):
        ood_logits = predict_logits(net, masks, ood.images, batch_size=batch_size)
        auc = roc_auc(
            max_softmax_score(probs),
            max_softmax_score(softmax(ood_logits.astype(np.float64))),
        )
    else:
        skipped.append("roc_auc")

    report = MetricsReport(
        accuracy=accuracy_from_logits(logits, dataset.labels),
        adv_accuracy=adv_acc,
        ece=min(calib.ece, 1.0),
        nll=calib.nll,
        roc_auc=auc,
        n_samples=len(dataset),
        attack=adv_cfg,
        ood_dataset=ood.name if ood is not None else None,
        skipped=tuple(skipped),
    )
    logger.debug(
        f"Evaluated on {dataset.name}: acc={report.accuracy:.4f} "
        f"adv_acc={report.adv_accuracy} ece={report.ece:.4f} nll={report.nll:.4f}"
    )
    return report
