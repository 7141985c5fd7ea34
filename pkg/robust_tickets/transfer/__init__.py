from .finetune import TransferResult, finetune_whole, linear_eval
from .optim import SGD
from .pretrain import pretrain
from .schedule import lr_at
from .trainer import BatchSource, EpochRecord, FeatureSet, TrainResult, fit

__all__ = [
    "SGD",
    "BatchSource",
    "EpochRecord",
    "FeatureSet",
    "TrainResult",
    "TransferResult",
    "finetune_whole",
    "fit",
    "linear_eval",
    "lr_at",
    "pretrain",
]
