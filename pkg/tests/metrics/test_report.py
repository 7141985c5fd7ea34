from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.config import AdvConfig
from robust_tickets.data import GeneratorConfig, Task, make_ood_dataset
from robust_tickets.metrics import accuracy_from_logits, evaluate_ticket, predict_proba
from robust_tickets.nn import Checkpoint


def test_plain_evaluation_skips_attack_and_ood(
    natural_checkpoint: Checkpoint, shifted_pair: tuple[Task, Task]
) -> None:
    source, _ = shifted_pair

    report = evaluate_ticket(natural_checkpoint.network(), None, source.test)

    assert 0.0 <= report.accuracy <= 1.0
    assert report.adv_accuracy is None and report.roc_auc is None
    assert report.skipped == ("adv_accuracy", "roc_auc")
    assert report.n_samples == len(source.test)


def test_full_evaluation(
    natural_checkpoint: Checkpoint,
    shifted_pair: tuple[Task, Task],
    generator_config: GeneratorConfig,
) -> None:
    source, _ = shifted_pair
    ood = make_ood_dataset(generator_config, n=16)

    report = evaluate_ticket(
        natural_checkpoint.network(),
        None,
        source.test,
        adv_cfg=AdvConfig(steps=2),
        ood=ood,
        rng=np.random.default_rng(0),
    )

    assert report.skipped == ()
    assert report.adv_accuracy is not None
    assert report.adv_accuracy <= report.accuracy
    assert report.roc_auc is not None and 0.0 <= report.roc_auc <= 1.0
    assert report.ood_dataset == "synthetic-ood"
    assert report.attack == AdvConfig(steps=2)


def test_predicted_probabilities_agree_with_report(
    natural_checkpoint: Checkpoint, shifted_pair: tuple[Task, Task]
) -> None:
    _, target = shifted_pair
    net = natural_checkpoint.network()

    probs = predict_proba(net, None, target.test.images, batch_size=7)
    report = evaluate_ticket(net, None, target.test)

    assert probs.shape == (len(target.test), target.num_classes)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    assert accuracy_from_logits(probs, target.test.labels) == pytest.approx(
        report.accuracy
    )
