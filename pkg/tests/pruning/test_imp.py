from __future__ import annotations

from itertools import pairwise
from pathlib import Path

import numpy as np
import pytest

from robust_tickets.config import TrainConfig
from robust_tickets.exceptions import ConfigError
from robust_tickets.pruning import ImpConfig, geometric_schedule, imp, omp, prune_locus
from tests._support import blob_task, checkpoint_from, mlp_spec

TRAIN = TrainConfig(
    epochs=5, batch_size=8, base_lr=0.05, decay_epochs=(2,), augment=False
)


def test_geometric_schedule() -> None:
    schedule = geometric_schedule(0.2, 4)

    assert schedule == pytest.approx([1 - 0.8**k for k in range(1, 5)])
    with pytest.raises(ConfigError):
        geometric_schedule(1.0, 3)
    with pytest.raises(ConfigError):
        geometric_schedule(0.2, 0)


@pytest.mark.parametrize(
    "schedule", [(), (0.5, 0.3), (0.2, 1.0), (0.2, 0.2)], ids=str
)
def test_explicit_schedules_are_validated(schedule: tuple[float, ...]) -> None:
    with pytest.raises(ConfigError):
        ImpConfig(schedule=schedule).resolved_schedule()


def test_without_training_imp_matches_one_shot_pruning() -> None:
    checkpoint = checkpoint_from(mlp_spec(hidden=8), seed=3)
    cfg = ImpConfig(rate=0.3, rounds=4, epochs_per_round=0)

    tickets = imp(checkpoint, blob_task(), cfg, TRAIN)

    final = tickets[-1]
    assert final.masks.equals(omp(checkpoint, final.sparsity).masks)
    assert [t.provenance.extra["train_steps"] for t in tickets] == [0, 0, 0, 0]


def test_rounds_produce_nested_masks_at_the_scheduled_sparsity(
    tmp_path: Path,
) -> None:
    checkpoint = checkpoint_from(mlp_spec(hidden=8), seed=3)
    cfg = ImpConfig(rate=0.2, rounds=3, epochs_per_round=2)

    tickets = imp(
        checkpoint,
        blob_task(),
        cfg,
        TRAIN,
        rng=np.random.default_rng(0),
        log_dir=tmp_path,
    )

    assert [t.sparsity for t in tickets] == pytest.approx([0.2, 0.36, 0.488])
    for ticket in tickets:
        total = ticket.masks.total()
        assert ticket.sparsity <= ticket.realized_sparsity < ticket.sparsity + 1 / total
        assert ticket.scheme == "IMP-natural"
        assert ticket.provenance.objective == "natural"
    for earlier, later in pairwise(tickets):
        assert earlier.masks.is_nested_in(later.masks)
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "imp-round0.jsonl",
        "imp-round1.jsonl",
        "imp-round2.jsonl",
    ]


def test_imp_never_changes_the_pretrained_weights() -> None:
    checkpoint = checkpoint_from(mlp_spec(), seed=1)
    before = checkpoint.digest

    tickets = imp(
        checkpoint, blob_task(), ImpConfig(rounds=2, epochs_per_round=1), TRAIN
    )

    assert all(t.checkpoint is checkpoint for t in tickets)
    assert checkpoint.network().weight_digest() == before


def test_adversarial_objective_names_the_ticket() -> None:
    checkpoint = checkpoint_from(mlp_spec())
    cfg = ImpConfig(rounds=1, epochs_per_round=1, objective="adversarial")

    (ticket,) = imp(checkpoint, blob_task(), cfg, TRAIN)

    assert ticket.scheme == "IMP-adversarial"
    assert ticket.provenance.objective == "adversarial"


def test_locus_follows_the_pruning_task() -> None:
    checkpoint = checkpoint_from(mlp_spec())
    downstream = blob_task(seed=1, name="shifted")
    cfg = ImpConfig(rounds=1, epochs_per_round=0, locus="downstream")

    (ticket,) = imp(checkpoint, downstream, cfg, TRAIN)

    assert prune_locus(checkpoint, blob_task()) == "upstream"
    assert prune_locus(checkpoint, downstream) == "downstream"
    assert ticket.locus == "downstream"
    assert ticket.provenance.prune_task == "shifted"


@pytest.mark.parametrize(
    ("locus", "task_name"), [("upstream", "shifted"), ("downstream", "blobs")]
)
def test_locus_that_contradicts_the_task_is_rejected(
    locus: str, task_name: str
) -> None:
    checkpoint = checkpoint_from(mlp_spec())
    cfg = ImpConfig.model_validate({"rounds": 1, "epochs_per_round": 0, "locus": locus})

    with pytest.raises(ConfigError, match="pruning"):
        imp(checkpoint, blob_task(name=task_name), cfg, TRAIN)
