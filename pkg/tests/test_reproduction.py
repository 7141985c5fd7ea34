"""Directional checks of the robust-ticket orderings on the synthetic shift pair.

These run small but complete sweeps and take minutes; select them with
``pytest -m reproduction``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from robust_tickets.config import (
    AdvConfig,
    AdversarialScheme,
    NaturalScheme,
    TrainConfig,
)
from robust_tickets.constants import PretrainSchemeName, TransferMode
from robust_tickets.data import GeneratorConfig, ShiftConfig, make_shifted_pair
from robust_tickets.experiments import (
    ExperimentConfig,
    PruningPlan,
    Report,
    SyntheticPair,
    run,
)
from robust_tickets.metrics import dataset_fid
from robust_tickets.nn import resolve_spec
from robust_tickets.transfer import pretrain

pytestmark = pytest.mark.reproduction

# stripes weaker than the attack radius: a cue natural training picks up and
# adversarial training learns to ignore
GENERATOR = GeneratorConfig(
    num_classes=6, image_size=16, samples_per_class=100, texture_contrast=0.1
)
NOISE_SIGMA = 0.25
TRAIN = TrainConfig.scaled(0.2, batch_size=32, base_lr=0.02)
FINETUNE = TrainConfig.scaled(0.1, batch_size=32, base_lr=0.01)
PRUNE_TRAIN = TrainConfig(epochs=3, batch_size=32, decay_epochs=(), augment=False)
ATTACK = AdvConfig(epsilon=8 / 255, steps=5, step_size=2 / 255)


def _sweep(
    out_dir: Path,
    magnitude: float,
    seeds: tuple[int, ...],
    sparsities: tuple[float, ...],
    modes: tuple[TransferMode, ...],
    adv: AdvConfig | None,
) -> Report:
    config = ExperimentConfig(
        model="micro",
        synthetic=SyntheticPair(
            generator=GENERATOR,
            shift=ShiftConfig(magnitude=magnitude, noise_sigma=NOISE_SIGMA),
        ),
        pretrain_schemes=(NaturalScheme(), AdversarialScheme(adv=ATTACK)),
        pruning=(PruningPlan(scheme="omp", sparsities=sparsities),),
        transfer_modes=modes,
        pretrain=TRAIN,
        prune_train=PRUNE_TRAIN,
        finetune=FINETUNE,
        adv=adv,
        ood=False,
        fid=False,
        seeds=seeds,
        out_dir=out_dir,
    )
    report, _ = run(config)
    assert report.ok, [cell.error for cell in report.failed()]
    return report


def _metric(
    report: Report,
    scheme: PretrainSchemeName,
    sparsity: float,
    mode: TransferMode,
    seed: int,
    metric: str = "accuracy",
) -> float:
    for cell in report.cells:
        key = cell.key
        if (key.pretrain_scheme, key.sparsity, key.mode, key.seed) == (
            scheme,
            sparsity,
            mode,
            seed,
        ):
            assert cell.metrics is not None
            value = getattr(cell.metrics, metric)
            assert value is not None
            return float(value)
    raise KeyError((scheme, sparsity, mode, seed))


def _robust_wins(
    report: Report,
    sparsity: float,
    mode: TransferMode,
    seeds: range,
    metric: str = "accuracy",
) -> int:
    return sum(
        _metric(report, "adversarial", sparsity, mode, seed, metric)
        > _metric(report, "natural", sparsity, mode, seed, metric)
        for seed in seeds
    )


SEEDS = range(5)


@pytest.fixture(scope="module")
def core_sweep(tmp_path_factory: pytest.TempPathFactory) -> Report:
    return _sweep(
        tmp_path_factory.mktemp("core"),
        magnitude=0.75,
        seeds=tuple(SEEDS),
        sparsities=(0.5, 0.7),
        modes=("linear", "finetune"),
        adv=ATTACK,
    )


@pytest.mark.parametrize("sparsity", [0.5, 0.7])
def test_robust_tickets_win_linear_evaluation(
    core_sweep: Report, sparsity: float
) -> None:
    assert _robust_wins(core_sweep, sparsity, "linear", SEEDS) >= 4


@pytest.mark.parametrize("sparsity", [0.5, 0.7])
def test_robust_tickets_win_finetuning_more_often_than_not(
    core_sweep: Report, sparsity: float
) -> None:
    assert _robust_wins(core_sweep, sparsity, "finetune", SEEDS) >= 3


@pytest.mark.parametrize("sparsity", [0.5, 0.7])
def test_robust_tickets_keep_higher_adversarial_accuracy(
    core_sweep: Report, sparsity: float
) -> None:
    wins = _robust_wins(core_sweep, sparsity, "finetune", SEEDS, "adv_accuracy")

    assert wins >= 4


def test_robust_advantage_grows_with_domain_shift(tmp_path: Path) -> None:
    seeds = range(3)
    gaps: dict[float, float] = {}
    for magnitude in (0.25, 1.0):
        report = _sweep(
            tmp_path / f"shift-{magnitude:g}",
            magnitude=magnitude,
            seeds=tuple(seeds),
            sparsities=(0.5,),
            modes=("linear",),
            adv=None,
        )
        gaps[magnitude] = float(
            np.median(
                [
                    _metric(report, "adversarial", 0.5, "linear", seed)
                    - _metric(report, "natural", 0.5, "linear", seed)
                    for seed in seeds
                ]
            )
        )

    assert gaps[1.0] > gaps[0.25]


def test_fid_grows_with_shift_magnitude() -> None:
    magnitudes = (0.0, 0.25, 0.5, 0.75, 1.0)
    distances = np.zeros((3, len(magnitudes)))
    for seed in range(3):
        generator = GENERATOR.model_copy(update={"seed": seed})
        source, _ = make_shifted_pair(generator, ShiftConfig(magnitude=0.0))
        spec = resolve_spec("micro", source.num_classes, source.image_shape)
        cfg = TrainConfig(epochs=3, batch_size=32, decay_epochs=(), seed=seed)
        extractor = pretrain(spec, source, NaturalScheme(), cfg).network(
            requires_grad=False
        )
        for column, magnitude in enumerate(magnitudes):
            shift = ShiftConfig(magnitude=magnitude, seed=seed)
            source, target = make_shifted_pair(generator, shift)
            distances[seed, column] = dataset_fid(extractor, source.test, target.test)

    medians = np.median(distances, axis=0)

    assert medians[0] == pytest.approx(0.0, abs=1e-5)
    assert np.all(np.diff(medians) >= -1e-9), medians
