from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
import numpy.typing as npt

from robust_tickets.exceptions import ContractError

if TYPE_CHECKING:
    from .ops import Operand

Array = npt.NDArray[np.floating[Any]]
BackwardRule = Callable[[Array], Sequence[Array | None]]

DEFAULT_DTYPE = np.float32

_node_ids = itertools.count()


@dataclass(frozen=True, slots=True)
class Operation:
    """One recorded op: the output node, its inputs and its backward rule."""

    name: str
    output_id: int
    inputs: tuple[Tensor, ...]
    backward: BackwardRule


class Tensor:
    """Dense array node participating in reverse-mode differentiation.

    Float arrays keep their dtype (float64 inputs stay float64 for gradient
    checks); anything else becomes float32. Values produced by an op are never
    mutated afterwards; optimizers replace ``data`` on leaf parameters.
    """

    __slots__ = ("data", "requires_grad", "grad", "id", "name", "_op")

    def __init__(
        self,
        data: npt.ArrayLike,
        requires_grad: bool = False,
        *,
        dtype: npt.DTypeLike | None = None,
        name: str | None = None,
    ) -> None:
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif not np.issubdtype(array.dtype, np.floating):
            array = array.astype(DEFAULT_DTYPE)
        self.data: Array = array
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.id = next(_node_ids)
        self.name = name
        self._op: Operation | None = None

    @classmethod
    def from_op(
        cls,
        name: str,
        data: Array,
        inputs: Iterable[Tensor],
        backward: BackwardRule,
    ) -> Tensor:
        parents = tuple(inputs)
        out = cls(data)
        out.requires_grad = any(parent.requires_grad for parent in parents)
        if out.requires_grad:
            out._op = Operation(name, out.id, parents, backward)
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    @property
    def op(self) -> Operation | None:
        return self._op

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single element, got {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad}{label})"
        )

    def __add__(self, other: Operand) -> Tensor:
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> Tensor:
        from .ops import sub

        return sub(self, other)

    def __mul__(self, other: Operand) -> Tensor:
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from .ops import scale

        return scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from .ops import matmul

        return matmul(self, other)


@dataclass(frozen=True, slots=True)
class Tape:
    """Operations reachable from an output, in topological order.

    Node ids grow monotonically, so sorting by output id places every op
    after the ops that produced its inputs.
    """

    operations: tuple[Operation, ...]

    @classmethod
    def record(cls, output: Tensor) -> Tape:
        seen: set[int] = set()
        collected: list[Operation] = []
        stack = [output]
        while stack:
            node = stack.pop()
            op = node.op
            if op is None or op.output_id in seen:
                continue
            seen.add(op.output_id)
            collected.append(op)
            stack.extend(op.inputs)
        collected.sort(key=lambda op: op.output_id)
        return cls(tuple(collected))

    def leaves(self) -> list[Tensor]:
        found: dict[int, Tensor] = {}
        for op in self.operations:
            for tensor in op.inputs:
                if tensor.requires_grad and tensor.op is None:
                    found.setdefault(tensor.id, tensor)
        return [found[key] for key in sorted(found)]


def _propagate(loss: Tensor, tape: Tape, keep: set[int]) -> dict[int, Array]:
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: dict[int, Array] = {loss.id: np.ones_like(loss.data)}
    for op in reversed(tape.operations):
        upstream = grads.get(op.output_id)
        if op.output_id not in keep:
            grads.pop(op.output_id, None)
        if upstream is None:
            continue
        for tensor, grad in zip(op.inputs, op.backward(upstream), strict=True):
            if grad is None or not tensor.requires_grad:
                continue
            previous = grads.get(tensor.id)
            grads[tensor.id] = grad if previous is None else previous + grad
    return grads


def backward(loss: Tensor, tape: Tape | None = None) -> list[Tensor]:
    """Populate ``.grad`` on every leaf that requires grad; returns the leaves.

    Leaves recorded on the tape but not influencing the loss get zeros.
    """
    tape = tape or Tape.record(loss)
    leaves = tape.leaves()
    if loss.requires_grad and loss.op is None:
        leaves.append(loss)
    grads = _propagate(loss, tape, {leaf.id for leaf in leaves})
    for leaf in leaves:
        grad = grads.get(leaf.id)
        leaf.grad = np.zeros_like(leaf.data) if grad is None else grad
    return leaves


def grad(loss: Tensor, wrt: Sequence[Tensor]) -> list[Array]:
    """Gradients of ``loss`` with respect to ``wrt`` without touching ``.grad``."""
    keep = {tensor.id for tensor in wrt}
    grads = _propagate(loss, Tape.record(loss), keep)
    return [
        grads.get(tensor.id, np.zeros_like(tensor.data))
        if tensor.id != loss.id
        else np.ones_like(tensor.data)
        for tensor in wrt
    ]
