from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.constants import Granularity, PruneScope
from robust_tickets.exceptions import ConfigError
from robust_tickets.nn import Checkpoint, MaskSet, parameter_shapes

from .grouping import expand_group_mask, group_scores, group_view
from .ticket import Ticket, provenance_for

logger = logging.getLogger(__name__)


def check_sparsity(sparsity: float) -> None:
    if not 0.0 <= sparsity < 1.0:
        raise ConfigError(f"sparsity must lie in [0, 1), got {sparsity}")


def zero_target(size: int, sparsity: float) -> int:
    """Weights to zero for ``sparsity``; the rounding absorbs float noise."""
    return math.ceil(round(sparsity * size, 9))


def allocate_targets(sizes: Mapping[str, int], sparsity: float) -> dict[str, int]:
    """Split the global zero target across layers in proportion to their size.

    Floors first, then one extra zero to the layers with the largest
    remainders (ties in layer order), so the per-layer targets sum exactly to
    the global one.
    """
    total = sum(sizes.values())
    target = zero_target(total, sparsity)
    exact = {name: sparsity * size for name, size in sizes.items()}
    targets = {
        name: min(math.floor(value), sizes[name]) for name, value in exact.items()
    }
    remainders = sorted(
        (name for name in sizes if targets[name] < sizes[name]),
        key=lambda name: -(exact[name] - targets[name]),
    )
    for name in remainders[: max(target - sum(targets.values()), 0)]:
        targets[name] += 1
    return targets


def _prune_groups(
    views: Mapping[str, npt.NDArray[np.bool_]],
    scores: Mapping[str, npt.NDArray[np.float64]],
    target: int,
) -> dict[str, npt.NDArray[np.bool_]]:
    keep = {name: view.any(axis=1) for name, view in views.items()}
    if not views:
        return keep
    alive = {name: view.sum(axis=1) for name, view in views.items()}
    zeros = sum(int(view.size - view.sum()) for view in views.values())
    if zeros >= target:
        return keep

    names = list(views)
    owners = np.concatenate(
        [np.full(int(keep[name].sum()), i) for i, name in enumerate(names)]
    )
    index = np.concatenate([np.flatnonzero(keep[name]) for name in names])
    candidate = np.concatenate([scores[name][keep[name]] for name in names])
    for position in np.argsort(candidate, kind="stable"):
        name = names[owners[position]]
        group = index[position]
        keep[name][group] = False
        zeros += int(alive[name][group])
        if zeros >= target:
            break
    return keep


def magnitude_masks(
    weights: Mapping[str, npt.NDArray[Any]],
    sparsity: float,
    granularity: Granularity = "element",
    scope: PruneScope = "global",
    masks: MaskSet | None = None,
) -> MaskSet:
    """Zero the lowest-scoring surviving groups until ``sparsity`` is reached.

    ``weights`` holds the prunable weights only. Groups already dead in
    ``masks`` stay dead and count toward the target; ties go to the earlier
    layer, then the lower group index.
    """
    check_sparsity(sparsity)
    current = masks
    if current is None:
        current = MaskSet.ones({name: w.shape for name, w in weights.items()})
    views = {
        name: group_view(current[name], granularity, name).copy() for name in weights
    }
    scores = {
        name: group_scores(weight, granularity, name)
        for name, weight in weights.items()
    }
    if scope == "global":
        total = sum(view.size for view in views.values())
        keep = _prune_groups(views, scores, zero_target(total, sparsity))
    else:
        targets = allocate_targets(
            {name: view.size for name, view in views.items()}, sparsity
        )
        keep = {}
        for name in views:
            keep.update(
                _prune_groups(
                    {name: views[name]}, {name: scores[name]}, targets[name]
                )
            )
    return MaskSet(
        {
            name: expand_group_mask(keep[name], weights[name].shape, granularity)
            & current[name]
            for name in weights
        }
    )


def prunable_weights(checkpoint: Checkpoint) -> dict[str, npt.NDArray[Any]]:
    return {
        param.name: checkpoint.weights[param.name]
        for param in parameter_shapes(checkpoint.spec)
        if param.prunable
    }


def omp(
    checkpoint: Checkpoint,
    sparsity: float,
    granularity: Granularity = "element",
    scope: PruneScope = "global",
) -> Ticket:
    """One-shot magnitude pruning of the pretrained weights, no retraining."""
    masks = magnitude_masks(prunable_weights(checkpoint), sparsity, granularity, scope)
    logger.info(
        f"OMP {granularity}/{scope} at {sparsity:g}: "
        f"realized sparsity {masks.sparsity():.4f}"
    )
    return Ticket(
        checkpoint=checkpoint,
        masks=masks,
        sparsity=sparsity,
        granularity=granularity,
        scheme="OMP",
        locus="upstream",
        provenance=provenance_for(checkpoint, scope=scope),
    )
