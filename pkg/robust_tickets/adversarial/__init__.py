from .pgd import Perturbation, PerSampleLoss, ball_bounds, pgd_attack, pgd_perturb
from .smoothing import gaussian_augment
from .training import (
    Forward,
    InputTransform,
    Optimizer,
    StepOutcome,
    adversarial_train_step,
    scheme_transform,
    train_step,
)

__all__ = [
    "Forward",
    "InputTransform",
    "Optimizer",
    "PerSampleLoss",
    "Perturbation",
    "StepOutcome",
    "adversarial_train_step",
    "ball_bounds",
    "gaussian_augment",
    "pgd_attack",
    "pgd_perturb",
    "scheme_transform",
    "train_step",
]
