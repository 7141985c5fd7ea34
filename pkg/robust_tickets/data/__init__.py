from .augment import augment, flip_horizontal
from .dataset import Batch, Dataset, Task, split_indices
from .io import DatasetManifest, load_dataset, load_task, read_manifest, save_dataset
from .synthetic import GeneratorConfig, ShiftConfig, make_ood_dataset, make_shifted_pair

__all__ = [
    "Batch",
    "Dataset",
    "DatasetManifest",
    "GeneratorConfig",
    "ShiftConfig",
    "Task",
    "augment",
    "flip_horizontal",
    "load_dataset",
    "load_task",
    "make_ood_dataset",
    "make_shifted_pair",
    "read_manifest",
    "save_dataset",
    "split_indices",
]
