from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field

from robust_tickets.constants import (
    Granularity,
    ImpObjective,
    Locus,
    PretrainSchemeName,
    PruneScope,
    TicketScheme,
)
from robust_tickets.exceptions import CheckpointError, MaskError
from robust_tickets.nn import (
    Checkpoint,
    MaskSet,
    Network,
    load_masks,
    parameter_shapes,
    save_masks,
)

from .grouping import group_size

logger = logging.getLogger(__name__)


class TicketProvenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    pretraining_scheme: PretrainSchemeName
    checkpoint_digest: str
    pretrain_seed: int
    source_task: str
    prune_task: str | None = None
    prune_seed: int | None = None
    scope: PruneScope = "global"
    objective: ImpObjective | None = None
    schedule: tuple[float, ...] = ()
    round_index: int | None = None
    extra: dict[str, Any] = Field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Ticket:
    """A subnetwork ``m * theta_pre``: the pretrained checkpoint and a mask."""

    checkpoint: Checkpoint
    masks: MaskSet
    sparsity: float
    granularity: Granularity
    scheme: TicketScheme
    locus: Locus
    provenance: TicketProvenance

    def __post_init__(self) -> None:
        prunable = {
            param.name: param.shape
            for param in parameter_shapes(self.checkpoint.spec)
            if param.prunable
        }
        if set(self.masks) != set(prunable):
            raise MaskError(
                f"ticket masks {sorted(self.masks)} do not cover the prunable "
                f"weights {sorted(prunable)}"
            )
        for name, shape in prunable.items():
            if self.masks[name].shape != shape:
                raise MaskError(f"mask {name!r} does not match weight shape {shape}")

    @property
    def realized_sparsity(self) -> float:
        return self.masks.sparsity()

    @property
    def max_group_size(self) -> int:
        return max(
            (group_size(mask.shape, self.granularity) for mask in self.masks.values()),
            default=1,
        )

    def network(self, *, requires_grad: bool = True) -> Network:
        return self.checkpoint.network(requires_grad=requires_grad)

    def describe(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "locus": self.locus,
            "granularity": self.granularity,
            "sparsity": self.sparsity,
            "realized_sparsity": self.realized_sparsity,
            "mask_digest": self.masks.digest(),
            "layer_sparsity": self.masks.layer_sparsity(),
            "provenance": self.provenance.model_dump(mode="json"),
        }


def save_ticket(ticket: Ticket, path: str | Path) -> Path:
    """Write the mask file at ``path`` and a YAML sidecar beside it."""
    path = Path(path)
    save_masks(ticket.masks, path)
    sidecar = path.with_suffix(".yaml")
    tmp = sidecar.with_suffix(".yaml.tmp")
    tmp.write_text(yaml.safe_dump(ticket.describe(), sort_keys=False))
    tmp.replace(sidecar)
    logger.debug(f"Saved {ticket.scheme} ticket to {path}")
    return path


def load_ticket(path: str | Path, checkpoint: Checkpoint) -> Ticket:
    """Rebuild a ticket from its mask file and sidecar over ``checkpoint``."""
    path = Path(path)
    sidecar = path.with_suffix(".yaml")
    if not sidecar.exists():
        raise FileNotFoundError(f"Ticket metadata not found: {sidecar}")
    with open(sidecar) as file:
        record = yaml.safe_load(file)
    if not isinstance(record, dict):
        raise ValueError("Ticket metadata must contain a dictionary")

    provenance = TicketProvenance.model_validate(record["provenance"])
    if provenance.checkpoint_digest != checkpoint.digest:
        raise CheckpointError(
            f"{path}: ticket was drawn from checkpoint "
            f"{provenance.checkpoint_digest[:12]}, got {checkpoint.digest[:12]}"
        )
    masks = load_masks(path)
    if masks.digest() != record.get("mask_digest", masks.digest()):
        raise CheckpointError(f"{path}: mask digest differs from its metadata")
    return Ticket(
        checkpoint=checkpoint,
        masks=masks,
        sparsity=float(record["sparsity"]),
        granularity=record["granularity"],
        scheme=record["scheme"],
        locus=record["locus"],
        provenance=provenance,
    )


def provenance_for(checkpoint: Checkpoint, **fields: Any) -> TicketProvenance:
    metadata = checkpoint.metadata
    return TicketProvenance(
        pretraining_scheme=metadata.pretraining_scheme,
        checkpoint_digest=checkpoint.digest,
        pretrain_seed=metadata.seed,
        source_task=metadata.source_task,
        **fields,
    )
