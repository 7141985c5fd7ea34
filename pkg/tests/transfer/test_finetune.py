from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.config import TrainConfig
from robust_tickets.data import Task
from robust_tickets.exceptions import ConfigError
from robust_tickets.nn import Checkpoint
from robust_tickets.pruning import omp
from robust_tickets.transfer import finetune_whole, linear_eval
from tests._support import blob_task, checkpoint_from, mlp_spec

CFG = TrainConfig(epochs=2, batch_size=8, base_lr=0.05, decay_epochs=(), augment=False)


@pytest.fixture
def target() -> Task:
    return blob_task(classes=4, seed=1, name="blobs-target")


def test_finetune_keeps_pruned_weights_at_their_stored_value(target: Task) -> None:
    ticket = omp(checkpoint_from(mlp_spec()), 0.6)

    result = finetune_whole(ticket, target, CFG)

    stored = ticket.checkpoint.weights["fc.weight"]
    trained = result.network.weights()["fc.weight"]
    pruned = ~ticket.masks["fc.weight"]
    np.testing.assert_array_equal(trained[pruned], stored[pruned])
    assert not np.array_equal(trained[~pruned], stored[~pruned])
    assert result.masks.equals(ticket.masks)
    assert result.mode == "finetune"
    assert result.network.shapes["head.weight"].shape == (4, 5)
    assert result.steps == 2 * -(-len(target.train) // CFG.batch_size)


def test_linear_eval_trains_only_the_head(target: Task) -> None:
    checkpoint = checkpoint_from(mlp_spec())
    ticket = omp(checkpoint, 0.5)

    result = linear_eval(ticket, target, CFG)

    for name in ("fc.weight", "fc.bias"):
        np.testing.assert_array_equal(
            result.network.weights()[name], checkpoint.weights[name]
        )
    assert result.mode == "linear"
    assert len(result.history) == 2
    assert 0.0 <= result.report.accuracy <= 1.0


def test_transfer_does_not_touch_the_checkpoint(target: Task) -> None:
    checkpoint = checkpoint_from(mlp_spec())
    before = checkpoint.digest

    finetune_whole(omp(checkpoint, 0.3), target, CFG)

    assert checkpoint.network().weight_digest() == before


def test_transfer_rejects_mismatched_inputs(
    natural_checkpoint: Checkpoint, target: Task
) -> None:
    with pytest.raises(ConfigError):
        linear_eval(omp(natural_checkpoint, 0.2), target, CFG)


def test_dense_transfer_learns_the_target(target: Task) -> None:
    ticket = omp(checkpoint_from(mlp_spec(hidden=16)), 0.0)
    cfg = CFG.model_copy(update={"epochs": 30})

    result = finetune_whole(ticket, target, cfg, rng=np.random.default_rng(0))

    assert result.report.accuracy > 1 / target.num_classes
    assert result.history[-1].train_loss < result.history[0].train_loss
