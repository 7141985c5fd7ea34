from .checkpoint import (
    Checkpoint,
    CheckpointMetadata,
    load_checkpoint,
    load_masks,
    save_checkpoint,
    save_masks,
)
from .masks import MaskSet
from .network import MaskLike, Network, build_model, forward_masked, weights_digest
from .spec import (
    BasicBlockSpec,
    BottleneckBlockSpec,
    ConvSpec,
    FlattenSpec,
    GlobalAvgPoolSpec,
    HeadSpec,
    LayerSpec,
    LinearSpec,
    MaxPoolSpec,
    NetworkSpec,
    ParamShape,
    micro,
    mini18,
    mini50,
    parameter_shapes,
    resolve_spec,
    trace,
)

__all__ = [
    "BasicBlockSpec",
    "BottleneckBlockSpec",
    "Checkpoint",
    "CheckpointMetadata",
    "ConvSpec",
    "FlattenSpec",
    "GlobalAvgPoolSpec",
    "HeadSpec",
    "LayerSpec",
    "LinearSpec",
    "MaskLike",
    "MaskSet",
    "MaxPoolSpec",
    "Network",
    "NetworkSpec",
    "ParamShape",
    "build_model",
    "forward_masked",
    "load_checkpoint",
    "load_masks",
    "micro",
    "mini18",
    "mini50",
    "parameter_shapes",
    "resolve_spec",
    "save_checkpoint",
    "save_masks",
    "trace",
    "weights_digest",
]
