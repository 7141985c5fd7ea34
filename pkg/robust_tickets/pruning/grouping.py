from __future__ import annotations

from collections.abc import Mapping
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.constants import Granularity
from robust_tickets.exceptions import GroupingError


def group_view(
    weight: npt.NDArray[Any], granularity: Granularity, name: str = "weight"
) -> npt.NDArray[Any]:
    """2-D view with one pruning group per row.

    ``row`` groups run along the last axis; ``kernel`` and ``channel`` need a
    4-D conv weight and group its k x k kernels or whole output filters.
    """
    match granularity:
        case "element":
            return weight.reshape(-1, 1)
        case "row":
            if weight.ndim < 2:
                raise GroupingError(f"{name}: row grouping needs a 2-D weight")
            return weight.reshape(-1, weight.shape[-1])
        case "kernel" | "channel":
            if weight.ndim != 4:
                raise GroupingError(
                    f"{name}: {granularity} grouping only applies to conv weights, "
                    f"got shape {weight.shape}"
                )
            f, c, kh, kw = weight.shape
            if granularity == "kernel":
                return weight.reshape(f * c, kh * kw)
            return weight.reshape(f, c * kh * kw)
    raise GroupingError(f"unknown granularity {granularity!r}")


def group_size(shape: tuple[int, ...], granularity: Granularity) -> int:
    return int(group_view(np.empty(shape, dtype=np.bool_), granularity).shape[1])


def group_scores(
    weight: npt.ArrayLike, granularity: Granularity, name: str = "weight"
) -> npt.NDArray[np.float64]:
    """Mean absolute value per group (``|w|`` for single elements)."""
    view = group_view(np.asarray(weight, dtype=np.float64), granularity, name)
    return np.abs(view).mean(axis=1)


def expand_group_mask(
    keep: npt.ArrayLike, shape: tuple[int, ...], granularity: Granularity
) -> npt.NDArray[np.bool_]:
    """Broadcast one keep flag per group back to the full weight shape."""
    flags = np.asarray(keep, dtype=np.bool_)
    groups, size = group_view(np.empty(shape, dtype=np.bool_), granularity).shape
    if flags.shape != (groups,):
        raise GroupingError(f"expected {groups} group flags, got {flags.shape}")
    return np.repeat(flags[:, None], size, axis=1).reshape(shape)


def group_counts(
    masks: Mapping[str, npt.NDArray[Any]], granularity: Granularity
) -> dict[str, tuple[int, int]]:
    """``(alive, total)`` group counts per layer; partially alive groups count."""
    counts: dict[str, tuple[int, int]] = {}
    for name, mask in masks.items():
        view = group_view(np.asarray(mask, dtype=np.bool_), granularity, name)
        counts[name] = (int(view.any(axis=1).sum()), int(view.shape[0]))
    return counts
