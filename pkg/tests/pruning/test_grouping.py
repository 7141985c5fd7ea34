from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.exceptions import GroupingError
from robust_tickets.pruning import (
    expand_group_mask,
    group_counts,
    group_scores,
    group_size,
    group_view,
)


def test_group_sizes_per_granularity() -> None:
    conv = (4, 3, 3, 3)

    assert group_size(conv, "element") == 1
    assert group_size(conv, "row") == 3
    assert group_size(conv, "kernel") == 9
    assert group_size(conv, "channel") == 27
    assert group_size((5, 6), "row") == 6


def test_conv_only_granularities_reject_linear_weights() -> None:
    with pytest.raises(GroupingError, match="conv"):
        group_view(np.zeros((5, 6)), "kernel", "fc.weight")
    with pytest.raises(GroupingError):
        group_view(np.zeros(5), "row")


def test_scores_are_mean_magnitudes() -> None:
    weight = np.array([[1.0, -3.0], [0.5, 0.5]])

    np.testing.assert_allclose(group_scores(weight, "row"), [2.0, 0.5])
    np.testing.assert_allclose(group_scores(weight, "element"), [1.0, 3.0, 0.5, 0.5])


def test_expand_broadcasts_group_flags() -> None:
    mask = expand_group_mask([True, False], (2, 1, 2, 2), "channel")

    assert mask[0].all() and not mask[1].any()
    with pytest.raises(GroupingError):
        expand_group_mask([True], (2, 1, 2, 2), "channel")


def test_group_counts_treat_partial_groups_as_alive() -> None:
    mask = np.ones((3, 1, 2, 2), dtype=bool)
    mask[0] = False
    mask[1, 0, 0, 0] = False

    assert group_counts({"conv": mask}, "channel") == {"conv": (2, 3)}
    assert group_counts({"conv": mask}, "element") == {"conv": (7, 12)}
