from __future__ import annotations

from pathlib import Path

import pytest
from pydantic import ValidationError

from robust_tickets.config import AdversarialScheme, NaturalScheme, SmoothingScheme
from robust_tickets.experiments import (
    ExperimentConfig,
    PruningPlan,
    dump_experiment_config,
    load_experiment_config,
)


def test_default_sweep_cell_count() -> None:
    config = ExperimentConfig()

    # 2 schemes x 3 sparsities x 2 modes x 1 seed
    assert config.cell_count() == 12


def test_cell_count_sums_grids_over_plans() -> None:
    config = ExperimentConfig(
        pretrain_schemes=(NaturalScheme(), AdversarialScheme(), SmoothingScheme()),
        pruning=(
            PruningPlan(scheme="omp", sparsities=(0.0, 0.5)),
            PruningPlan(scheme="imp", sparsities=(0.2, 0.36, 0.488)),
        ),
        transfer_modes=("finetune",),
        seeds=(0, 1),
    )

    assert config.cell_count() == 3 * 5 * 1 * 2


def test_pruning_plan_sorts_grid() -> None:
    plan = PruningPlan(sparsities=(0.9, 0.0, 0.5))

    assert plan.sparsities == (0.0, 0.5, 0.9)


@pytest.mark.parametrize(
    "sparsities", [(), (0.5, 0.5), (1.0,), (-0.1, 0.2)], ids=str
)
def test_pruning_plan_rejects_bad_grids(sparsities: tuple[float, ...]) -> None:
    with pytest.raises(ValidationError):
        PruningPlan(sparsities=sparsities)


def test_lmp_is_element_wise_only() -> None:
    with pytest.raises(ValidationError, match="element-wise"):
        PruningPlan(scheme="lmp", granularity="channel")


def test_imp_config_takes_the_grid_as_schedule() -> None:
    plan = PruningPlan(
        scheme="imp", sparsities=(0.2, 0.36), granularity="channel", scope="per-layer"
    )

    imp = plan.imp_config()

    assert imp.schedule == (0.2, 0.36)
    assert imp.granularity == "channel"
    assert imp.scope == "per-layer"


def test_experiment_rejects_unknown_model() -> None:
    with pytest.raises(ValidationError, match="unknown model spec"):
        ExperimentConfig(model="resnet1000")


@pytest.mark.parametrize(
    "update",
    [
        {"seeds": (0, 0)},
        {"seeds": (-1,)},
        {"pretrain_schemes": (NaturalScheme(), NaturalScheme())},
        {"pretrain_schemes": ()},
        {"transfer_modes": ("linear", "linear")},
        {"pruning": (PruningPlan(), PruningPlan(sparsities=(0.3,)))},
    ],
)
def test_experiment_rejects_degenerate_axes(update: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(update)


def test_load_expands_environment_variables(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    monkeypatch.setenv("SWEEP_OUT", str(tmp_path / "out"))
    config_file = tmp_path / "experiment.yaml"
    config_file.write_text(
        "model: micro\n"
        "out_dir: ${SWEEP_OUT}\n"
        "pretrain_schemes:\n"
        "  - name: natural\n"
        "  - name: random_smoothing\n"
        "    sigma: 0.1\n"
        "pruning:\n"
        "  - scheme: omp\n"
        "    sparsities: [0.0, 0.8]\n"
        "seeds: [3]\n"
    )

    config = load_experiment_config(config_file)

    assert config.out_dir == tmp_path / "out"
    assert config.model == "micro"
    assert config.pretrain_schemes[1] == SmoothingScheme(sigma=0.1)
    assert config.pruning[0].sparsities == (0.0, 0.8)
    assert config.seeds == (3,)


def test_load_applies_overrides(tmp_path: Path) -> None:
    config_file = tmp_path / "experiment.yaml"
    config_file.write_text("model: micro\n")

    config = load_experiment_config(
        config_file, out_dir=str(tmp_path / "elsewhere"), seeds=None
    )

    assert config.out_dir == tmp_path / "elsewhere"
    assert config.seeds == (0,)


def test_load_rejects_missing_and_non_mapping_files(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_experiment_config(tmp_path / "missing.yaml")

    config_file = tmp_path / "list.yaml"
    config_file.write_text("- model: micro\n")
    with pytest.raises(ValueError, match="must contain a dictionary"):
        load_experiment_config(config_file)


def test_dumped_config_loads_back(tmp_path: Path) -> None:
    config = ExperimentConfig(model="micro", seeds=(1, 2), adv=None, fid=False)

    path = dump_experiment_config(config, tmp_path / "resolved.yaml")

    assert load_experiment_config(path) == config
