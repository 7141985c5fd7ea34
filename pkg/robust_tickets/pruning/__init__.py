from .grouping import (
    expand_group_mask,
    group_counts,
    group_scores,
    group_size,
    group_view,
)
from .imp import ImpConfig, geometric_schedule, imp, prune_locus
from .lmp import LmpConfig, MaskScores, keep_plan, lmp, topk_binarize, topk_mask
from .omp import allocate_targets, magnitude_masks, omp, prunable_weights, zero_target
from .ticket import Ticket, TicketProvenance, load_ticket, save_ticket

__all__ = [
    "ImpConfig",
    "LmpConfig",
    "MaskScores",
    "Ticket",
    "TicketProvenance",
    "allocate_targets",
    "expand_group_mask",
    "geometric_schedule",
    "group_counts",
    "group_scores",
    "group_size",
    "group_view",
    "imp",
    "keep_plan",
    "lmp",
    "load_ticket",
    "magnitude_masks",
    "omp",
    "prunable_weights",
    "prune_locus",
    "save_ticket",
    "topk_binarize",
    "topk_mask",
    "zero_target",
]
