from __future__ import annotations

import hashlib
from collections.abc import Iterator, Mapping

import numpy as np
import numpy.typing as npt

from robust_tickets.exceptions import MaskError

BoolArray = npt.NDArray[np.bool_]


class MaskSet(Mapping[str, BoolArray]):
    """Binary masks keyed by prunable parameter name."""

    def __init__(self, masks: Mapping[str, npt.ArrayLike]) -> None:
        converted: dict[str, BoolArray] = {}
        for name, value in masks.items():
            array = np.asarray(value)
            if array.dtype != np.bool_:
                if not np.isin(array, (0, 1)).all():
                    raise MaskError(f"mask {name!r} has entries outside {{0, 1}}")
                array = array.astype(np.bool_)
            converted[name] = array
        self._masks = converted

    @classmethod
    def ones(cls, shapes: Mapping[str, tuple[int, ...]]) -> MaskSet:
        return cls(
            {name: np.ones(shape, dtype=np.bool_) for name, shape in shapes.items()}
        )

    def __getitem__(self, name: str) -> BoolArray:
        return self._masks[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._masks)

    def __len__(self) -> int:
        return len(self._masks)

    def __repr__(self) -> str:
        return f"MaskSet(layers={len(self)}, sparsity={self.sparsity():.4f})"

    def total(self) -> int:
        return sum(mask.size for mask in self._masks.values())

    def zero_count(self) -> int:
        return sum(
            int(mask.size - np.count_nonzero(mask)) for mask in self._masks.values()
        )

    def sparsity(self) -> float:
        total = self.total()
        return self.zero_count() / total if total else 0.0

    def layer_sparsity(self) -> dict[str, float]:
        return {
            name: 1.0 - float(np.count_nonzero(mask)) / mask.size
            for name, mask in self._masks.items()
        }

    def keep_counts(self) -> dict[str, int]:
        return {
            name: int(np.count_nonzero(mask)) for name, mask in self._masks.items()
        }

    def is_nested_in(self, later: MaskSet) -> bool:
        """True when every zero of this mask is still zero in ``later``."""
        return all(
            not np.any(later[name] & ~mask) for name, mask in self._masks.items()
        )

    def apply(self, weights: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        masked = dict(weights)
        for name, mask in self._masks.items():
            masked[name] = weights[name] * mask
        return masked

    def digest(self) -> str:
        hasher = hashlib.sha256()
        for name in sorted(self._masks):
            mask = self._masks[name]
            hasher.update(name.encode())
            hasher.update(str(mask.shape).encode())
            hasher.update(np.packbits(mask, bitorder="little").tobytes())
        return hasher.hexdigest()

    def equals(self, other: MaskSet) -> bool:
        return self.keys() == other.keys() and all(
            np.array_equal(mask, other[name]) for name, mask in self._masks.items()
        )
