from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.exceptions import BuildError, ConfigError


class _LayerBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = ""


class ConvSpec(_LayerBase):
    kind: Literal["conv"] = "conv"
    out_channels: int = Field(gt=0)
    kernel: int = Field(default=3, gt=0)
    stride: int = Field(default=1, gt=0)
    padding: int | None = None
    relu: bool = True
    prunable: bool = True

    @property
    def pad(self) -> int:
        return self.kernel // 2 if self.padding is None else self.padding


class BasicBlockSpec(_LayerBase):
    kind: Literal["basic_block"] = "basic_block"
    out_channels: int = Field(gt=0)
    prunable: bool = True


class BottleneckBlockSpec(_LayerBase):
    kind: Literal["bottleneck_block"] = "bottleneck_block"
    mid_channels: int = Field(gt=0)
    out_channels: int = Field(gt=0)
    prunable: bool = True


class MaxPoolSpec(_LayerBase):
    kind: Literal["max_pool"] = "max_pool"
    size: int = Field(default=2, gt=0)


class GlobalAvgPoolSpec(_LayerBase):
    kind: Literal["global_avg_pool"] = "global_avg_pool"


class FlattenSpec(_LayerBase):
    kind: Literal["flatten"] = "flatten"


class LinearSpec(_LayerBase):
    kind: Literal["linear"] = "linear"
    out_features: int = Field(gt=0)
    relu: bool = True
    prunable: bool = True


LayerSpec = Annotated[
    ConvSpec
    | BasicBlockSpec
    | BottleneckBlockSpec
    | MaxPoolSpec
    | GlobalAvgPoolSpec
    | FlattenSpec
    | LinearSpec,
    Field(discriminator="kind"),
]


class HeadSpec(BaseModel):
    """The single classifier head; replaced when transferring to a new task."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_classes: int = Field(gt=0)
    prunable: bool = False


class NetworkSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "custom"
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    head: HeadSpec

    def layer_name(self, index: int) -> str:
        return self.layers[index].name or f"layer{index}"

    def with_head(self, num_classes: int) -> NetworkSpec:
        head = self.head.model_copy(update={"num_classes": num_classes})
        return self.model_copy(update={"head": head})


ParamRole = Literal["weight", "bias", "residual_out", "head"]


@dataclass(frozen=True, slots=True)
class ParamShape:
    name: str
    shape: tuple[int, ...]
    prunable: bool
    fan_in: int
    role: ParamRole


@dataclass(frozen=True, slots=True)
class LayerTrace:
    name: str
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    params: list[ParamShape] = field(default_factory=list)


def _conv_out(
    layer: str, shape: tuple[int, ...], kernel: int, stride: int, pad: int
) -> tuple[int, int]:
    _, h, w = shape
    if kernel > h + 2 * pad or kernel > w + 2 * pad:
        raise BuildError(layer, f"kernel {kernel} larger than padded input {shape}")
    if (h + 2 * pad - kernel) % stride or (w + 2 * pad - kernel) % stride:
        raise BuildError(layer, f"non-integral output size for input {shape}")
    return (h + 2 * pad - kernel) // stride + 1, (w + 2 * pad - kernel) // stride + 1


def _conv_params(
    prefix: str,
    c_in: int,
    c_out: int,
    kernel: int,
    prunable: bool,
    role: ParamRole = "weight",
) -> list[ParamShape]:
    fan_in = c_in * kernel * kernel
    return [
        ParamShape(
            f"{prefix}.weight", (c_out, c_in, kernel, kernel), prunable, fan_in, role
        ),
        ParamShape(f"{prefix}.bias", (c_out,), False, fan_in, "bias"),
    ]


def _linear_params(
    prefix: str, c_in: int, c_out: int, prunable: bool, role: ParamRole = "weight"
) -> list[ParamShape]:
    return [
        ParamShape(f"{prefix}.weight", (c_out, c_in), prunable, c_in, role),
        ParamShape(f"{prefix}.bias", (c_out,), False, c_in, "bias"),
    ]


def _trace_layer(
    name: str, layer: LayerSpec, shape: tuple[int, ...]
) -> tuple[tuple[int, ...], list[ParamShape]]:
    spatial = (
        ConvSpec,
        BasicBlockSpec,
        BottleneckBlockSpec,
        MaxPoolSpec,
        GlobalAvgPoolSpec,
    )
    if isinstance(layer, spatial) and len(shape) != 3:
        raise BuildError(name, f"expects a C×H×W input, got {shape}")

    match layer:
        case ConvSpec():
            h, w = _conv_out(name, shape, layer.kernel, layer.stride, layer.pad)
            params = _conv_params(
                name, shape[0], layer.out_channels, layer.kernel, layer.prunable
            )
            return (layer.out_channels, h, w), params
        case BasicBlockSpec():
            c_in, c_out = shape[0], layer.out_channels
            h, w = _conv_out(name, shape, 3, 1, 1)
            params = _conv_params(f"{name}.conv1", c_in, c_out, 3, layer.prunable)
            params += _conv_params(
                f"{name}.conv2", c_out, c_out, 3, layer.prunable, "residual_out"
            )
            if c_in != c_out:
                params += _conv_params(
                    f"{name}.shortcut", c_in, c_out, 1, layer.prunable
                )
            return (c_out, h, w), params
        case BottleneckBlockSpec():
            c_in, mid, c_out = shape[0], layer.mid_channels, layer.out_channels
            h, w = _conv_out(name, shape, 3, 1, 1)
            params = _conv_params(f"{name}.conv1", c_in, mid, 1, layer.prunable)
            params += _conv_params(f"{name}.conv2", mid, mid, 3, layer.prunable)
            params += _conv_params(
                f"{name}.conv3", mid, c_out, 1, layer.prunable, "residual_out"
            )
            if c_in != c_out:
                params += _conv_params(
                    f"{name}.shortcut", c_in, c_out, 1, layer.prunable
                )
            return (c_out, h, w), params
        case MaxPoolSpec():
            if shape[1] % layer.size or shape[2] % layer.size:
                raise BuildError(name, f"{shape} not divisible by window {layer.size}")
            return (shape[0], shape[1] // layer.size, shape[2] // layer.size), []
        case GlobalAvgPoolSpec():
            return (shape[0],), []
        case FlattenSpec():
            return (math.prod(shape),), []
        case LinearSpec():
            if len(shape) != 1:
                raise BuildError(name, f"expects flat features, got {shape}")
            params = _linear_params(name, shape[0], layer.out_features, layer.prunable)
            return (layer.out_features,), params
    raise BuildError(name, f"unsupported layer {layer!r}")


def trace(spec: NetworkSpec) -> list[LayerTrace]:
    """Propagate shapes through the spec; raises BuildError on the first misfit."""
    shape: tuple[int, ...] = tuple(spec.input_shape)
    traces: list[LayerTrace] = []
    for index, layer in enumerate(spec.layers):
        name = spec.layer_name(index)
        out_shape, params = _trace_layer(name, layer, shape)
        if any(dim <= 0 for dim in out_shape):
            raise BuildError(name, f"produces an empty output {out_shape}")
        traces.append(LayerTrace(name, shape, out_shape, params))
        shape = out_shape

    if len(shape) != 1:
        raise BuildError("head", f"expects flat features, got {shape}")
    head_params = _linear_params(
        "head", shape[0], spec.head.num_classes, spec.head.prunable, "head"
    )
    traces.append(LayerTrace("head", shape, (spec.head.num_classes,), head_params))

    names = [param.name for layer in traces for param in layer.params]
    if len(set(names)) != len(names):
        raise BuildError(spec.name, "duplicate layer names")
    return traces


def parameter_shapes(spec: NetworkSpec) -> list[ParamShape]:
    return [param for layer in trace(spec) for param in layer.params]


def mini18(
    num_classes: int = 10, input_shape: tuple[int, int, int] = (3, 32, 32)
) -> NetworkSpec:
    """Basic-block residual net, four stages of two blocks (about 0.26M weights).

    Stages after the first open with a 2×2 max pool.
    """
    layers: list[LayerSpec] = [ConvSpec(name="stem", out_channels=16)]
    for stage, width in enumerate((16, 32, 48, 64), start=1):
        if stage > 1:
            layers.append(MaxPoolSpec(name=f"stage{stage}.pool"))
        for block in range(2):
            layers.append(
                BasicBlockSpec(name=f"stage{stage}.{block}", out_channels=width)
            )
    layers.append(GlobalAvgPoolSpec(name="pool"))
    return NetworkSpec(
        name="mini18",
        input_shape=input_shape,
        layers=tuple(layers),
        head=HeadSpec(num_classes=num_classes),
    )


def mini50(
    num_classes: int = 10, input_shape: tuple[int, int, int] = (3, 32, 32)
) -> NetworkSpec:
    """Bottleneck residual net with 3/4/6/3 blocks and expansion 4."""
    layers: list[LayerSpec] = [ConvSpec(name="stem", out_channels=16)]
    stages = zip((16, 32, 48, 64), (3, 4, 6, 3), strict=True)
    for stage, (width, blocks) in enumerate(stages, start=1):
        if stage > 1:
            layers.append(MaxPoolSpec(name=f"stage{stage}.pool"))
        for block in range(blocks):
            layers.append(
                BottleneckBlockSpec(
                    name=f"stage{stage}.{block}",
                    mid_channels=width,
                    out_channels=4 * width,
                )
            )
    layers.append(GlobalAvgPoolSpec(name="pool"))
    return NetworkSpec(
        name="mini50",
        input_shape=input_shape,
        layers=tuple(layers),
        head=HeadSpec(num_classes=num_classes),
    )


def micro(
    num_classes: int = 10, input_shape: tuple[int, int, int] = (3, 32, 32)
) -> NetworkSpec:
    """Stem conv, one pooled basic block and global pooling; for quick sweeps."""
    return NetworkSpec(
        name="micro",
        input_shape=input_shape,
        layers=(
            ConvSpec(name="stem", out_channels=8),
            MaxPoolSpec(name="pool1"),
            BasicBlockSpec(name="block", out_channels=12),
            GlobalAvgPoolSpec(name="pool"),
        ),
        head=HeadSpec(num_classes=num_classes),
    )


REFERENCE_SPECS: dict[str, Callable[..., NetworkSpec]] = {
    "micro": micro,
    "mini18": mini18,
    "mini50": mini50,
}


def resolve_spec(
    spec_id: str, num_classes: int, input_shape: tuple[int, int, int]
) -> NetworkSpec:
    try:
        factory = REFERENCE_SPECS[spec_id]
    except KeyError as exc:
        known = ", ".join(sorted(REFERENCE_SPECS))
        raise ConfigError(f"unknown model spec {spec_id!r}; known: {known}") from exc
    return factory(num_classes=num_classes, input_shape=input_shape)
