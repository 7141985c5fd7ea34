from __future__ import annotations

import math

import numpy as np
import pytest

from robust_tickets.exceptions import (
    EmptyInputError,
    LabelIndexError,
    MalformedProbabilitiesError,
)
from robust_tickets.metrics import (
    accuracy_from_logits,
    calibration,
    reliability_bins,
    roc_auc,
)


def test_ece_and_nll_match_hand_computed_values() -> None:
    probs = np.array([[0.9, 0.1], [0.7, 0.3]])
    labels = np.array([0, 1])

    result = calibration(probs, labels)

    # one correct at 0.9 confidence, one wrong at 0.7
    assert result.ece == pytest.approx(0.5 * 0.1 + 0.5 * 0.7)
    assert result.nll == pytest.approx(-(math.log(0.9) + math.log(0.3)) / 2)
    assert sum(b.count for b in result.bins) == 2
    assert len(result.bins) == 15


def test_perfectly_calibrated_bins_have_zero_ece() -> None:
    probs = np.tile([0.75, 0.25], (4, 1))
    labels = np.array([0, 0, 0, 1])

    assert calibration(probs, labels).ece == pytest.approx(0.0)


def test_bins_are_closed_on_the_right() -> None:
    bins = reliability_bins(np.array([[0.5, 0.5], [1.0, 0.0]]), [0, 0], n_bins=2)

    assert (bins[0].lower, bins[0].upper, bins[0].count) == (0.0, 0.5, 1)
    assert (bins[1].count, bins[1].confidence) == (1, 1.0)


def test_nll_floors_zero_probabilities() -> None:
    result = calibration(np.array([[1.0, 0.0]]), [1])

    assert math.isfinite(result.nll)
    assert result.nll == pytest.approx(-math.log(1e-12))


def test_malformed_probabilities_are_rejected() -> None:
    calibration(np.array([[0.5, 0.5 + 5e-7]]), [0])

    with pytest.raises(MalformedProbabilitiesError, match="sum to 1"):
        calibration(np.array([[0.5, 0.5 + 2e-6]]), [0])
    with pytest.raises(MalformedProbabilitiesError):
        calibration(np.array([[1.5, -0.5]]), [0])
    with pytest.raises(MalformedProbabilitiesError):
        calibration(np.array([0.5, 0.5]), [0])
    with pytest.raises(LabelIndexError):
        calibration(np.array([[0.5, 0.5]]), [2])
    with pytest.raises(EmptyInputError):
        calibration(np.zeros((0, 2)), np.zeros(0))


def test_roc_auc_extremes_and_ties() -> None:
    assert roc_auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert roc_auc([0.1, 0.2], [0.9, 0.8]) == 0.0
    assert roc_auc([0.5, 0.5], [0.5]) == 0.5
    with pytest.raises(EmptyInputError):
        roc_auc([], [0.3])


def test_roc_auc_is_the_pairwise_win_rate() -> None:
    rng = np.random.default_rng(0)
    ids = rng.normal(1.0, 1.0, size=40)
    oods = rng.normal(0.0, 1.0, size=30)

    wins = (ids[:, None] > oods[None, :]).mean()

    assert roc_auc(ids, oods) == pytest.approx(wins)


def test_accuracy_ties_go_to_the_lowest_class() -> None:
    logits = np.array([[1.0, 1.0], [0.0, 2.0], [3.0, 1.0]])

    assert accuracy_from_logits(logits, [0, 1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(EmptyInputError):
        accuracy_from_logits(np.zeros((0, 2)), [])
