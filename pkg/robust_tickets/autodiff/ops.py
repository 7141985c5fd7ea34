from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from robust_tickets.exceptions import DimensionError, LabelIndexError, ShapeError

from .tensor import Array, Tensor

Operand = Tensor | npt.NDArray[np.floating] | float | int
Axis = int | tuple[int, ...] | None


def as_tensor(value: Operand, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(name: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(name, a.shape, b.shape) from exc


def add(a: Operand, b: Operand) -> Tensor:
    ta = as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = as_tensor(b, ta)
    _broadcast_shape("add", ta, tb)

    def backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)

    return Tensor.from_op("add", ta.data + tb.data, (ta, tb), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    ta = as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = as_tensor(b, ta)
    _broadcast_shape("sub", ta, tb)

    def backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, ta.shape), -_unbroadcast(g, tb.shape)

    return Tensor.from_op("sub", ta.data - tb.data, (ta, tb), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    ta = as_tensor(a, b if isinstance(b, Tensor) else None)
    tb = as_tensor(b, ta)
    _broadcast_shape("mul", ta, tb)

    def backward(g: Array) -> tuple[Array | None, Array | None]:
        ga = _unbroadcast(g * tb.data, ta.shape) if ta.requires_grad else None
        gb = _unbroadcast(g * ta.data, tb.shape) if tb.requires_grad else None
        return ga, gb

    return Tensor.from_op("mul", ta.data * tb.data, (ta, tb), backward)


def scale(x: Tensor, factor: float) -> Tensor:
    def backward(g: Array) -> tuple[Array]:
        return (g * factor,)

    return Tensor.from_op("scale", x.data * x.dtype.type(factor), (x,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)

    def backward(g: Array) -> tuple[Array | None, Array | None]:
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return Tensor.from_op("matmul", a.data @ b.data, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError("transpose", x.shape)

    def backward(g: Array) -> tuple[Array]:
        return (g.T,)

    return Tensor.from_op("transpose", x.data.T, (x,), backward)


def relu(x: Tensor) -> Tensor:
    active = x.data > 0

    def backward(g: Array) -> tuple[Array]:
        # subgradient at exactly zero is zero
        return (g * active,)

    out = np.where(active, x.data, 0).astype(x.dtype)
    return Tensor.from_op("relu", out, (x,), backward)


def _normalize_axes(axis: Axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else axis
    return tuple(sorted(a % ndim for a in axes))


def sum(x: Tensor, axis: Axis = None) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)

    def backward(g: Array) -> tuple[Array]:
        return (np.broadcast_to(np.expand_dims(g, axes), x.shape).copy(),)

    return Tensor.from_op("sum", np.asarray(x.data.sum(axis=axes)), (x,), backward)


def mean(x: Tensor, axis: Axis = None) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1

    def backward(g: Array) -> tuple[Array]:
        expanded = np.broadcast_to(np.expand_dims(g, axes), x.shape)
        return ((expanded / count).astype(x.dtype),)

    return Tensor.from_op("mean", np.asarray(x.data.mean(axis=axes)), (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise DimensionError("reshape", x.shape, tuple(shape)) from exc

    def backward(g: Array) -> tuple[Array]:
        return (g.reshape(x.shape),)

    return Tensor.from_op("reshape", out, (x,), backward)


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (x.shape[0], -1))


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of an N×C×H×W batch with F×C×kh×kw filters."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise DimensionError("conv2d", x.shape, w.shape)
    n, c, h, width = x.shape
    f, _, kh, kw = w.shape
    if kh > h + 2 * padding or kw > width + 2 * padding:
        raise DimensionError("conv2d", x.shape, w.shape)
    if (h + 2 * padding - kh) % stride or (width + 2 * padding - kw) % stride:
        raise ShapeError(
            f"conv2d: non-integral output size for input {x.shape}, kernel "
            f"{(kh, kw)}, stride {stride}, padding {padding}"
        )
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (width + 2 * padding - kw) // stride + 1

    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    xp = np.pad(x.data, pad) if padding else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    wmat = w.data.reshape(f, c * kh * kw)
    out = (cols @ wmat.T).reshape(n, ho, wo, f).transpose(0, 3, 1, 2)

    def backward(g: Array) -> tuple[Array | None, Array | None]:
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        gw = (gmat.T @ cols).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[
                        :, :, i : i + stride * ho : stride, j : j + stride * wo : stride
                    ] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding : padding + h, padding : padding + width]
        return gx, gw

    return Tensor.from_op("conv2d", np.ascontiguousarray(out), (x, w), backward)


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; ties route the gradient to the first max."""
    n, c, h, width = x.shape
    if h % size or width % size:
        raise ShapeError(f"max_pool2d: {x.shape} not divisible by window {size}")
    ho, wo = h // size, width // size
    blocks = (
        x.data.reshape(n, c, ho, size, wo, size)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, size * size)
    )
    winner = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, winner, axis=-1)[..., 0]

    def backward(g: Array) -> tuple[Array]:
        routed = np.zeros_like(blocks)
        np.put_along_axis(routed, winner, g[..., None], axis=-1)
        gx = (
            routed.reshape(n, c, ho, wo, size, size)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(x.shape)
        )
        return (gx,)

    return Tensor.from_op("max_pool2d", out, (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    return mean(x, axis=(2, 3))


def log_softmax(logits: Array) -> Array:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: Array) -> Array:
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(
    logits: Tensor,
    labels: npt.ArrayLike,
    reduction: Literal["mean", "none"] = "mean",
) -> Tensor:
    """Cross-entropy of softmax(logits) against integer class labels."""
    targets = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError("softmax_cross_entropy", logits.shape, targets.shape)
    n, classes = logits.shape
    if n and (targets.min() < 0 or targets.max() >= classes):
        raise LabelIndexError(f"labels must lie in [0, {classes}), got {targets}")

    logp = log_softmax(logits.data)
    rows = np.arange(n)
    losses = -logp[rows, targets]

    def backward(g: Array) -> tuple[Array]:
        delta = np.exp(logp)
        delta[rows, targets] -= 1
        if reduction == "mean":
            return (delta * (g / n),)
        return (delta * g[:, None],)

    out = np.asarray(losses.mean() if reduction == "mean" else losses, logits.dtype)
    return Tensor.from_op("softmax_cross_entropy", out, (logits,), backward)
