from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.data import Task
from robust_tickets.exceptions import DimensionError, EmptyInputError, NonPSDError
from robust_tickets.metrics import (
    FIDStats,
    dataset_fid,
    feature_stats,
    frechet_distance,
)
from robust_tickets.nn import Checkpoint


def _stats(mu: list[float], sigma: list[list[float]], n: int = 100) -> FIDStats:
    return FIDStats(mu=np.array(mu), sigma=np.array(sigma), n=n)


def test_identical_clouds_have_zero_distance() -> None:
    features = np.random.default_rng(0).normal(size=(50, 4))
    stats = feature_stats(features)

    assert frechet_distance(stats, stats) == pytest.approx(0.0, abs=1e-8)


def test_diagonal_gaussians_match_the_closed_form() -> None:
    a = _stats([0.0, 0.0], [[1.0, 0.0], [0.0, 4.0]])
    b = _stats([1.0, 2.0], [[4.0, 0.0], [0.0, 1.0]])

    # |d mu|^2 = 5, trace term = 5 + 5 - 2 * (2 + 2)
    assert frechet_distance(a, b) == pytest.approx(7.0)
    assert frechet_distance(b, a) == pytest.approx(7.0)


def test_one_dimensional_distance() -> None:
    a = _stats([0.0], [[1.0]])
    b = _stats([3.0], [[9.0]])

    assert frechet_distance(a, b) == pytest.approx(9.0 + (3.0 - 1.0) ** 2)


def test_covariance_is_unbiased() -> None:
    stats = feature_stats(np.array([[0.0, 1.0], [2.0, 1.0]]))

    np.testing.assert_allclose(stats.mu, [1.0, 1.0])
    np.testing.assert_allclose(stats.sigma, [[2.0, 0.0], [0.0, 0.0]])
    assert stats.underdetermined is False


def test_small_negative_eigenvalues_are_clamped() -> None:
    a = _stats([0.0, 0.0], [[1.0, 0.0], [0.0, -1e-12]])

    assert frechet_distance(a, a) == pytest.approx(0.0, abs=1e-6)


def test_indefinite_covariance_raises() -> None:
    good = _stats([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    bad = _stats([0.0, 0.0], [[1.0, 0.0], [0.0, -0.5]])

    with pytest.raises(NonPSDError) as info:
        frechet_distance(good, bad)

    assert info.value.eigenvalue == pytest.approx(-0.5)


def test_input_errors() -> None:
    with pytest.raises(EmptyInputError):
        feature_stats(np.ones((1, 3)))
    with pytest.raises(DimensionError):
        frechet_distance(_stats([0.0], [[1.0]]), _stats([0.0, 0.0], np.eye(2).tolist()))


def test_dataset_fid_of_a_dataset_with_itself_is_zero(
    natural_checkpoint: Checkpoint, shifted_pair: tuple[Task, Task]
) -> None:
    source, target = shifted_pair
    extractor = natural_checkpoint.network()

    same = dataset_fid(extractor, source.test, source.test)
    shifted = dataset_fid(extractor, source.test, target.test)

    assert same == pytest.approx(0.0, abs=1e-6)
    assert shifted > same
