from .classification import (
    Calibration,
    ReliabilityBin,
    accuracy,
    accuracy_from_logits,
    adversarial_accuracy,
    calibration,
    max_softmax_score,
    predict_logits,
    predict_proba,
    reliability_bins,
    roc_auc,
)
from .fid import (
    FIDStats,
    dataset_fid,
    extract_features,
    feature_stats,
    frechet_distance,
    gaussian_stats,
)
from .report import MetricsReport, evaluate_ticket

__all__ = [
    "Calibration",
    "FIDStats",
    "MetricsReport",
    "ReliabilityBin",
    "accuracy",
    "accuracy_from_logits",
    "adversarial_accuracy",
    "calibration",
    "dataset_fid",
    "evaluate_ticket",
    "extract_features",
    "feature_stats",
    "frechet_distance",
    "gaussian_stats",
    "max_softmax_score",
    "predict_logits",
    "predict_proba",
    "reliability_bins",
    "roc_auc",
]
