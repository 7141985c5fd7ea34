from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import pytest

from robust_tickets.autodiff import Tensor
from robust_tickets.config import TrainConfig
from robust_tickets.exceptions import TrainingDivergedError
from robust_tickets.nn import build_model
from robust_tickets.transfer import SGD, FeatureSet, fit
from tests._support import blob_task, mlp_spec


def test_fit_records_each_epoch(tmp_path: Path) -> None:
    task = blob_task()
    net = build_model(mlp_spec(), rng=np.random.default_rng(0))
    cfg = TrainConfig(
        epochs=4, batch_size=10, base_lr=0.05, decay_epochs=(2,), augment=False
    )
    log = tmp_path / "train.jsonl"

    def forward(x: npt.NDArray[Any]) -> Tensor:
        return net.forward(x)

    result = fit(
        forward,
        SGD.for_network(net, cfg),
        task.train,
        cfg,
        rng=np.random.default_rng(0),
        log_path=log,
        evaluate=lambda: {"score": 1.0},
    )

    batches = -(-len(task.train) // cfg.batch_size)
    assert result.steps == 4 * batches
    assert [record.epoch for record in result.history] == [0, 1, 2, 3]
    assert [record.lr for record in result.history] == pytest.approx(
        [0.05, 0.05, 0.005, 0.005]
    )
    assert result.history[-1].train_loss < result.history[0].train_loss
    lines = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(lines) == 4
    assert lines[0]["eval"] == {"score": 1.0}


def test_same_seed_gives_the_same_run() -> None:
    task = blob_task()
    cfg = TrainConfig(epochs=2, batch_size=8, decay_epochs=(), augment=False)

    def train() -> str:
        net = build_model(mlp_spec(), rng=np.random.default_rng(1))
        fit(
            lambda x: net.forward(x),
            SGD.for_network(net, cfg),
            task.train,
            cfg,
            rng=np.random.default_rng(2),
        )
        return net.weight_digest()

    assert train() == train()


def test_divergence_reports_the_epoch() -> None:
    features = FeatureSet(
        np.full((4, 1, 1, 6), np.inf, dtype=np.float32), np.zeros(4, dtype=np.int64)
    )
    net = build_model(mlp_spec())
    cfg = TrainConfig(epochs=1, batch_size=4, decay_epochs=(), augment=False)

    with pytest.raises(TrainingDivergedError) as info:
        fit(
            lambda x: net.forward(x),
            SGD.for_network(net, cfg),
            features,
            cfg,
            rng=np.random.default_rng(0),
        )

    assert info.value.epoch == 0
    assert info.value.step == 0


def test_feature_set_batches() -> None:
    features = FeatureSet(np.arange(10.0).reshape(5, 2), np.arange(5))

    sizes = [len(y) for _, y in features.batches(2)]
    rng = np.random.default_rng(0)
    shuffled = np.concatenate([y for _, y in features.batches(2, rng)])

    assert sizes == [2, 2, 1]
    assert sorted(shuffled) == [0, 1, 2, 3, 4]
