from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.adversarial import (
    PerSampleLoss,
    ball_bounds,
    gaussian_augment,
    pgd_attack,
    pgd_perturb,
)
from robust_tickets.autodiff import Tensor, mul, sum_
from robust_tickets.config import AdvConfig
from robust_tickets.exceptions import ConfigError
from robust_tickets.nn import build_model, micro

EPS = 8 / 255


def _linear_loss(w: np.ndarray) -> PerSampleLoss:
    weights = Tensor(w)

    def loss_fn(x: Tensor) -> Tensor:
        return sum_(mul(x, weights), axis=1)

    return loss_fn


def test_linear_loss_is_pushed_to_the_ball_corner() -> None:
    rng = np.random.default_rng(0)
    w = rng.normal(size=(1, 6))
    x = np.full((3, 6), 0.5)

    result = pgd_perturb(_linear_loss(w), x, AdvConfig(), rng)

    np.testing.assert_allclose(result.delta, np.broadcast_to(EPS * np.sign(w), x.shape))
    assert result.loss > result.clean_loss


def test_clipping_keeps_inputs_in_range() -> None:
    w = np.ones((1, 4))
    x = np.array([[1.0, 0.999, 0.5, 0.0]])

    rng = np.random.default_rng(0)
    result = pgd_perturb(_linear_loss(w), x, AdvConfig(), rng)
    attacked = result.apply(x)

    assert attacked.max() <= 1.0
    assert result.delta[0, 0] == 0.0
    assert result.delta[0, 1] == pytest.approx(1.0 - 0.999)


def test_zero_epsilon_returns_the_clean_input() -> None:
    net = build_model(micro(num_classes=3, input_shape=(3, 8, 8)))
    rng = np.random.default_rng(1)
    x = rng.random((4, 3, 8, 8)).astype(np.float32)
    y = np.array([0, 1, 2, 0])

    result = pgd_attack(net, None, x, y, AdvConfig(epsilon=0.0), rng)

    assert result.linf() == 0.0
    np.testing.assert_array_equal(result.apply(x), x)
    assert result.loss == result.clean_loss


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("init", ["zero", "random"])
def test_attack_stays_in_the_ball_and_never_lowers_the_loss(
    seed: int, init: str
) -> None:
    net = build_model(
        micro(num_classes=3, input_shape=(3, 8, 8)), rng=np.random.default_rng(seed)
    )
    rng = np.random.default_rng(seed)
    x = rng.random((6, 3, 8, 8)).astype(np.float32)
    y = rng.integers(0, 3, size=6)
    cfg = AdvConfig.model_validate({"init": init, "steps": 3})

    result = pgd_attack(net, None, x, y, cfg, rng)

    assert result.linf() <= np.float32(EPS)
    assert np.all(result.losses >= result.clean_losses)
    attacked = result.apply(x)
    assert attacked.min() >= 0.0 and attacked.max() <= 1.0


def test_attack_does_not_modify_weights() -> None:
    net = build_model(micro(num_classes=3, input_shape=(3, 8, 8)))
    before = net.weight_digest()
    x = np.random.default_rng(0).random((2, 3, 8, 8)).astype(np.float32)

    pgd_attack(net, None, x, np.array([0, 1]), AdvConfig(), np.random.default_rng(0))

    assert net.weight_digest() == before


def test_gaussian_augment() -> None:
    x = np.full((2, 3), 0.5, dtype=np.float32)
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state

    assert gaussian_augment(x, 0.0, rng) is x
    assert rng.bit_generator.state == state

    noisy = gaussian_augment(x, 10.0, rng)
    assert noisy.dtype == np.float32
    assert noisy.min() >= 0.0 and noisy.max() <= 1.0
    assert not np.array_equal(noisy, x)

    with pytest.raises(ConfigError):
        gaussian_augment(x, -0.1, rng)


@pytest.mark.parametrize("epsilon", [0.05, EPS, 0.3])
def test_attacked_input_is_within_epsilon_in_float32(epsilon: float) -> None:
    rng = np.random.default_rng(3)
    x = rng.random((64, 48)).astype(np.float32)
    w = rng.normal(size=(1, 48))
    cfg = AdvConfig(epsilon=epsilon, steps=4, step_size=epsilon / 2, init="random")

    attacked = pgd_perturb(_linear_loss(w), x, cfg, rng).apply(x)

    assert attacked.dtype == np.float32
    assert np.abs(attacked - x).max() <= np.float32(epsilon)
    assert attacked.min() >= 0.0 and attacked.max() <= 1.0


def test_ball_bounds_are_tight_in_the_input_precision() -> None:
    x = np.random.default_rng(4).random(10_000).astype(np.float32)
    eps = np.float32(0.05)

    lower, upper = ball_bounds(x, eps, 0.0, 1.0)

    assert np.all(upper - x <= eps) and np.all(x - lower <= eps)
    inner = (x > 0.1) & (x < 0.9)
    np.testing.assert_allclose(upper[inner] - x[inner], eps, atol=1e-6)
    np.testing.assert_allclose(x[inner] - lower[inner], eps, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_larger_radius_never_yields_a_smaller_loss(seed: int) -> None:
    spec = micro(num_classes=3, input_shape=(3, 8, 8))
    net = build_model(spec, rng=np.random.default_rng(seed), dtype=np.float64)
    rng = np.random.default_rng(seed)
    x = rng.random((6, 3, 8, 8))
    y = rng.integers(0, 3, size=6)

    start = np.zeros_like(x)
    losses = []
    for eps in (2 / 255, 4 / 255, 8 / 255, 16 / 255):
        cfg = AdvConfig(epsilon=eps, steps=5, step_size=eps / 4)
        result = pgd_attack(net, None, x, y, cfg, rng, init_delta=start)
        losses.append(result.losses)
        start = result.delta

    for smaller, larger in zip(losses, losses[1:]):
        assert np.all(larger >= smaller - 1e-9)


def test_gaussian_augment_matches_the_noise_variance() -> None:
    x = np.full(200_000, 0.5)
    sigma = 0.05

    noisy = gaussian_augment(x, sigma, np.random.default_rng(5))

    assert noisy.var() == pytest.approx(sigma**2, rel=0.05)
    assert noisy.mean() == pytest.approx(0.5, abs=1e-3)
