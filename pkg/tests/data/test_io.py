from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import yaml

from robust_tickets.data import (
    Task,
    load_dataset,
    load_task,
    read_manifest,
    save_dataset,
)
from robust_tickets.exceptions import (
    ChecksumMismatchError,
    DatasetError,
    DatasetShapeError,
)


def test_task_survives_save_and_load(
    shifted_pair: tuple[Task, Task], tmp_path: Path
) -> None:
    source, _ = shifted_pair

    manifest = save_dataset(source, tmp_path / "source")
    loaded = load_task(manifest)

    assert loaded.name == source.name
    assert loaded.digest() == source.digest()
    assert read_manifest(manifest).splits["train"].count == len(source.train)


def test_uint8_storage_quantizes_to_255_levels(
    shifted_pair: tuple[Task, Task], tmp_path: Path
) -> None:
    source, _ = shifted_pair

    manifest = save_dataset({"test": source.test}, tmp_path, dtype="uint8")
    loaded = load_dataset(manifest, "test")

    np.testing.assert_allclose(loaded.images, source.test.images, atol=0.5 / 255 + 1e-6)
    np.testing.assert_array_equal(loaded.labels, source.test.labels)


def test_modified_blob_fails_the_checksum(
    shifted_pair: tuple[Task, Task], tmp_path: Path
) -> None:
    source, _ = shifted_pair
    manifest = save_dataset(source, tmp_path)
    blob = tmp_path / "train_labels.bin"
    raw = bytearray(blob.read_bytes())
    raw[0] ^= 0x01
    blob.write_bytes(bytes(raw))

    with pytest.raises(ChecksumMismatchError) as info:
        load_dataset(manifest, "train")

    assert info.value.path.endswith("train_labels.bin")
    assert info.value.expected != info.value.actual


def test_manifest_errors(shifted_pair: tuple[Task, Task], tmp_path: Path) -> None:
    source, _ = shifted_pair
    manifest = save_dataset(source, tmp_path)

    with pytest.raises(DatasetError, match="no split"):
        load_dataset(manifest, "validation")
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path / "missing.yaml")

    content = yaml.safe_load(manifest.read_text())
    content["splits"]["train"]["count"] += 1
    manifest.write_text(yaml.safe_dump(content))
    with pytest.raises(DatasetShapeError):
        load_dataset(manifest, "train")

    manifest.write_text("- just\n- a list\n")
    with pytest.raises(DatasetError, match="mapping"):
        read_manifest(manifest)
