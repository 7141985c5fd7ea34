from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Mapping
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.autodiff import (
    Tensor,
    add,
    conv2d,
    flatten,
    global_avg_pool,
    matmul,
    max_pool2d,
    mul,
    relu,
    reshape,
    transpose,
)
from robust_tickets.constants import InitScheme
from robust_tickets.exceptions import BuildError, MaskError

from .spec import (
    BasicBlockSpec,
    BottleneckBlockSpec,
    ConvSpec,
    FlattenSpec,
    GlobalAvgPoolSpec,
    LayerSpec,
    LinearSpec,
    MaxPoolSpec,
    NetworkSpec,
    ParamShape,
    parameter_shapes,
)

logger = logging.getLogger(__name__)

MaskLike = Mapping[str, npt.NDArray[Any] | Tensor]

_INIT_GAINS: dict[InitScheme, float] = {
    "kaiming_uniform": math.sqrt(6.0),
    "lecun_uniform": math.sqrt(3.0),
}


def weights_digest(weights: Mapping[str, npt.NDArray[Any]]) -> str:
    hasher = hashlib.sha256()
    for name in sorted(weights):
        array = np.ascontiguousarray(weights[name])
        hasher.update(name.encode())
        hasher.update(f"{array.dtype.str}{array.shape}".encode())
        hasher.update(array.tobytes())
    return hasher.hexdigest()


class Network:
    """A built NetworkSpec with one leaf Tensor per parameter.

    Masks are applied at forward time to the stored weights, so a ticket keeps
    its pretrained values literally and the mask decides what the forward sees.
    """

    def __init__(self, spec: NetworkSpec, params: Mapping[str, Tensor]) -> None:
        self.spec = spec
        self.shapes = {param.name: param for param in parameter_shapes(spec)}
        missing = self.shapes.keys() - params.keys()
        if missing:
            raise MaskError(f"missing parameters: {sorted(missing)}")
        self.params = {name: params[name] for name in self.shapes}

    @property
    def dtype(self) -> np.dtype[Any]:
        return next(iter(self.params.values())).dtype

    def prunable_names(self) -> list[str]:
        return [name for name, param in self.shapes.items() if param.prunable]

    def prunable_shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: self.shapes[name].shape for name in self.prunable_names()}

    def head_names(self) -> list[str]:
        return ["head.weight", "head.bias"]

    def parameter_count(self, *, prunable_only: bool = False) -> int:
        names = self.prunable_names() if prunable_only else list(self.shapes)
        return sum(math.prod(self.shapes[name].shape) for name in names)

    def weights(self) -> dict[str, npt.NDArray[Any]]:
        return {name: tensor.data for name, tensor in self.params.items()}

    def weight_digest(self) -> str:
        return weights_digest(self.weights())

    def trainable(self) -> list[Tensor]:
        return [tensor for tensor in self.params.values() if tensor.requires_grad]

    def copy(self, *, requires_grad: bool = True) -> Network:
        params = {
            name: Tensor(tensor.data.copy(), requires_grad=requires_grad, name=name)
            for name, tensor in self.params.items()
        }
        return Network(self.spec, params)

    def frozen(self) -> Network:
        """View of the same arrays without gradient tracking."""
        params = {
            name: Tensor(tensor.data, name=name) for name, tensor in self.params.items()
        }
        return Network(self.spec, params)

    def with_parameters(self, overrides: Mapping[str, npt.NDArray[Any]]) -> Network:
        params = dict(self.params)
        for name, value in overrides.items():
            if name not in self.shapes:
                raise MaskError(f"unknown parameter {name!r}")
            params[name] = Tensor(
                np.array(value, dtype=self.dtype), requires_grad=True, name=name
            )
        return Network(self.spec, params)

    def replace_head(self, num_classes: int, rng: np.random.Generator) -> Network:
        """Fresh fan-in scaled classifier for a new task; the body is shared."""
        spec = self.spec.with_head(num_classes)
        params = {
            name: tensor
            for name, tensor in self.params.items()
            if name not in self.head_names()
        }
        for shape in parameter_shapes(spec):
            if shape.name in self.head_names():
                params[shape.name] = _init_param(shape, rng, self.dtype)
        logger.debug(f"Replaced head with {num_classes} classes")
        return Network(spec, params)

    def check_masks(self, masks: MaskLike) -> None:
        for name, mask in masks.items():
            if name not in self.shapes or not self.shapes[name].prunable:
                raise MaskError(f"mask {name!r} does not index a prunable weight")
            expected = self.shapes[name].shape
            if tuple(mask.shape) != expected:
                raise MaskError(
                    f"mask {name!r} has shape {tuple(mask.shape)}, "
                    f"weight has {expected}"
                )

    def _weight(self, name: str, masks: MaskLike | None) -> Tensor:
        weight = self.params[name]
        mask = masks.get(name) if masks is not None else None
        if mask is None:
            return weight
        if isinstance(mask, Tensor):
            return mul(weight, mask)
        return mul(weight, np.asarray(mask, dtype=weight.dtype))

    def _conv(
        self,
        x: Tensor,
        prefix: str,
        masks: MaskLike | None,
        *,
        stride: int = 1,
        padding: int = 0,
    ) -> Tensor:
        out = conv2d(x, self._weight(f"{prefix}.weight", masks), stride, padding)
        bias = self.params[f"{prefix}.bias"]
        return add(out, reshape(bias, (1, bias.size, 1, 1)))

    def _linear(self, x: Tensor, prefix: str, masks: MaskLike | None) -> Tensor:
        weight = self._weight(f"{prefix}.weight", masks)
        return add(matmul(x, transpose(weight)), self.params[f"{prefix}.bias"])

    def _shortcut(self, x: Tensor, name: str, masks: MaskLike | None) -> Tensor:
        if f"{name}.shortcut.weight" in self.params:
            return self._conv(x, f"{name}.shortcut", masks)
        return x

    def _layer(
        self, name: str, layer: LayerSpec, x: Tensor, masks: MaskLike | None
    ) -> Tensor:
        match layer:
            case ConvSpec():
                out = self._conv(
                    x, name, masks, stride=layer.stride, padding=layer.pad
                )
                return relu(out) if layer.relu else out
            case BasicBlockSpec():
                h = relu(self._conv(x, f"{name}.conv1", masks, padding=1))
                h = self._conv(h, f"{name}.conv2", masks, padding=1)
                return relu(add(h, self._shortcut(x, name, masks)))
            case BottleneckBlockSpec():
                h = relu(self._conv(x, f"{name}.conv1", masks))
                h = relu(self._conv(h, f"{name}.conv2", masks, padding=1))
                h = self._conv(h, f"{name}.conv3", masks)
                return relu(add(h, self._shortcut(x, name, masks)))
            case MaxPoolSpec():
                return max_pool2d(x, layer.size)
            case GlobalAvgPoolSpec():
                return global_avg_pool(x)
            case FlattenSpec():
                return flatten(x)
            case LinearSpec():
                out = self._linear(x, name, masks)
                return relu(out) if layer.relu else out
        raise BuildError(name, f"unsupported layer {layer!r}")

    def features(
        self, x: Tensor | npt.NDArray[Any], masks: MaskLike | None = None
    ) -> Tensor:
        """Penultimate activations: everything before the classifier head."""
        if masks is not None:
            self.check_masks(masks)
        out = x if isinstance(x, Tensor) else Tensor(np.asarray(x, self.dtype))
        for index, layer in enumerate(self.spec.layers):
            out = self._layer(self.spec.layer_name(index), layer, out, masks)
        return out

    def head_forward(self, features: Tensor, masks: MaskLike | None = None) -> Tensor:
        return self._linear(features, "head", masks)

    def forward(
        self, x: Tensor | npt.NDArray[Any], masks: MaskLike | None = None
    ) -> Tensor:
        return self.head_forward(self.features(x, masks), masks)

    __call__ = forward


def _init_param(
    shape: ParamShape,
    rng: np.random.Generator,
    dtype: npt.DTypeLike,
    gain: float = 1.0,
    blocks: int = 1,
) -> Tensor:
    if shape.role == "bias":
        data = np.zeros(shape.shape, dtype=dtype)
        return Tensor(data, requires_grad=True, name=shape.name)
    bound = 1.0 / math.sqrt(shape.fan_in)
    if shape.role != "head":
        bound *= gain
    if shape.role == "residual_out":
        bound /= math.sqrt(max(blocks, 1))
    data = rng.uniform(-bound, bound, size=shape.shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=shape.name)


def build_model(
    spec: NetworkSpec,
    init: InitScheme = "kaiming_uniform",
    rng: np.random.Generator | None = None,
    dtype: npt.DTypeLike = np.float32,
) -> Network:
    """Initialize every parameter of ``spec`` with fan-in scaled uniform draws.

    Hidden weights use bound ``gain / sqrt(fan_in)``; the last conv of each
    residual block is further divided by ``sqrt(#blocks)`` so the residual sum
    stays bounded without normalization layers. The head uses
    ``1 / sqrt(fan_in)`` and biases start at zero.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    shapes = parameter_shapes(spec)
    blocks = sum(
        isinstance(layer, (BasicBlockSpec, BottleneckBlockSpec))
        for layer in spec.layers
    )
    gain = _INIT_GAINS[init]
    params = {
        shape.name: _init_param(shape, rng, dtype, gain, blocks) for shape in shapes
    }
    network = Network(spec, params)
    logger.debug(
        f"Built {spec.name} with {network.parameter_count()} parameters "
        f"({network.parameter_count(prunable_only=True)} prunable)"
    )
    return network


def forward_masked(
    net: Network, masks: MaskLike, x: Tensor | npt.NDArray[Any]
) -> Tensor:
    """Logits of ``f(m * theta, x)``; masks must match the prunable weights."""
    net.check_masks(masks)
    return net.forward(x, masks)
