from .config import (
    AdvConfig,
    AdversarialScheme,
    NaturalScheme,
    PretrainScheme,
    SmoothingScheme,
    TrainConfig,
)
from .data import GeneratorConfig, ShiftConfig, Task, load_task, make_shifted_pair
from .exceptions import RobustTicketsError
from .experiments import (
    ExperimentConfig,
    Report,
    load_experiment_config,
    run,
    sparsity_sweep_export,
)
from .metrics import MetricsReport, dataset_fid, evaluate_ticket
from .nn import Checkpoint, MaskSet, Network, build_model, resolve_spec
from .pruning import ImpConfig, LmpConfig, Ticket, imp, lmp, omp
from .transfer import finetune_whole, linear_eval, pretrain

__all__ = [
    "AdvConfig",
    "AdversarialScheme",
    "Checkpoint",
    "ExperimentConfig",
    "GeneratorConfig",
    "ImpConfig",
    "LmpConfig",
    "MaskSet",
    "MetricsReport",
    "NaturalScheme",
    "Network",
    "PretrainScheme",
    "Report",
    "RobustTicketsError",
    "ShiftConfig",
    "SmoothingScheme",
    "Task",
    "Ticket",
    "TrainConfig",
    "build_model",
    "dataset_fid",
    "evaluate_ticket",
    "finetune_whole",
    "imp",
    "linear_eval",
    "lmp",
    "load_experiment_config",
    "load_task",
    "make_shifted_pair",
    "omp",
    "pretrain",
    "resolve_spec",
    "run",
    "sparsity_sweep_export",
]
