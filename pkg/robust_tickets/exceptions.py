from __future__ import annotations

from collections.abc import Sequence


class RobustTicketsError(Exception):
    """Base exception for every error raised by robust_tickets."""


class ConfigError(RobustTicketsError, ValueError):
    """Raised when a configuration violates its declared invariants."""


# tensor layer


class DimensionError(RobustTicketsError, ValueError):
    """Raised when operand shapes are incompatible for an operation."""

    def __init__(self, op: str, *shapes: Sequence[int]) -> None:
        self.op = op
        self.shapes = tuple(tuple(shape) for shape in shapes)
        detail = " vs ".join(str(shape) for shape in self.shapes)
        super().__init__(f"{op}: incompatible shapes {detail}")


class ShapeError(RobustTicketsError, ValueError):
    """Raised when an operation cannot produce an integral output shape."""


class ContractError(RobustTicketsError):
    """Raised when a caller breaks an operation precondition."""


class LabelIndexError(RobustTicketsError, IndexError):
    """Raised when a class label falls outside ``[0, num_classes)``."""


# model layer


class BuildError(RobustTicketsError):
    """Raised when a network spec does not compose."""

    def __init__(self, layer: str, message: str) -> None:
        self.layer = layer
        super().__init__(f"layer {layer!r}: {message}")


class MaskError(RobustTicketsError):
    """Raised when a mask does not match the weights it indexes."""


class CheckpointError(RobustTicketsError):
    """Base exception for checkpoint and mask file errors."""


class CorruptHeaderError(CheckpointError):
    """Raised when the file magic or header cannot be parsed."""


class TruncatedBlobError(CheckpointError):
    """Raised when the binary blob is shorter than the header claims."""


class CheckpointShapeError(CheckpointError):
    """Raised when stored tensors disagree with the network spec."""


# training and pruning


class GroupingError(RobustTicketsError):
    """Raised when a granularity does not apply to a layer."""


class TrainingDivergedError(RobustTicketsError):
    """Raised when a loss becomes non-finite during training."""

    def __init__(
        self,
        step: int,
        *,
        epoch: int | None = None,
        round_index: int | None = None,
    ) -> None:
        self.step = step
        self.epoch = epoch
        self.round_index = round_index
        where = [f"step {step}"]
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if round_index is not None:
            where.append(f"round {round_index}")
        super().__init__(f"training diverged at {', '.join(where)}")

    def at(
        self, *, epoch: int | None = None, round_index: int | None = None
    ) -> TrainingDivergedError:
        return TrainingDivergedError(
            self.step,
            epoch=self.epoch if epoch is None else epoch,
            round_index=self.round_index if round_index is None else round_index,
        )


class WeightMutationError(RobustTicketsError, AssertionError):
    """Raised when weights that must stay frozen were modified."""


# metrics


class EmptyInputError(RobustTicketsError, ValueError):
    """Raised when a metric receives no samples."""


class MalformedProbabilitiesError(RobustTicketsError, ValueError):
    """Raised when probability rows do not sum to one."""


class NonPSDError(RobustTicketsError, ValueError):
    """Raised when a covariance has eigenvalues below the PSD tolerance."""

    def __init__(self, eigenvalue: float, tolerance: float) -> None:
        self.eigenvalue = eigenvalue
        self.tolerance = tolerance
        super().__init__(
            f"matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} "
            f"below tolerance {-tolerance:.1e}"
        )


# data


class DatasetError(RobustTicketsError):
    """Base exception for dataset manifest and blob errors."""


class ChecksumMismatchError(DatasetError):
    """Raised when a blob's digest differs from the manifest."""

    def __init__(self, path: str, expected: str, actual: str) -> None:
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"checksum mismatch for {path}: expected {expected}, got {actual}"
        )


class LabelOverflowError(DatasetError):
    """Raised when a label is not below the declared class count."""


class DatasetShapeError(DatasetError):
    """Raised when blob sizes disagree with the declared shape."""
