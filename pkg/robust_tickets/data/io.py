from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError

from robust_tickets.constants import FORMAT_VERSION
from robust_tickets.exceptions import (
    ChecksumMismatchError,
    DatasetError,
    DatasetShapeError,
)

from .dataset import Dataset, Task

logger = logging.getLogger(__name__)

BlobType = Literal["float32", "uint8"]

_LABEL_DTYPE = np.dtype("<i4")
_BLOB_DTYPES: dict[BlobType, np.dtype[np.generic]] = {
    "float32": np.dtype("<f4"),
    "uint8": np.dtype("u1"),
}


class SplitEntry(BaseModel):
    images: str
    labels: str
    count: int = Field(ge=0)
    images_sha256: str
    labels_sha256: str


class DatasetManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    name: str
    shape: tuple[int, int, int]
    num_classes: int = Field(gt=0)
    dtype: BlobType = "float32"
    scale: float = Field(default=1.0, gt=0.0)
    splits: dict[str, SplitEntry]


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_dataset(
    splits: Mapping[str, Dataset] | Task,
    directory: str | Path,
    *,
    name: str | None = None,
    dtype: BlobType = "float32",
) -> Path:
    """Write one blob pair per split plus ``manifest.yaml``; returns its path."""
    if isinstance(splits, Task):
        name = name or splits.name
        splits = {"train": splits.train, "test": splits.test}
    if not splits:
        raise DatasetError("no splits to save")
    first = next(iter(splits.values()))
    name = name or first.name
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    scale = 1.0 if dtype == "float32" else 1.0 / 255.0
    entries: dict[str, SplitEntry] = {}
    for split, dataset in splits.items():
        if dataset.image_shape != first.image_shape:
            raise DatasetShapeError(f"split {split!r} has a different image shape")
        if dtype == "uint8":
            stored = np.rint(dataset.images * 255.0).astype(_BLOB_DTYPES[dtype])
        else:
            stored = dataset.images.astype(_BLOB_DTYPES[dtype])
        image_bytes = stored.tobytes()
        label_bytes = dataset.labels.astype(_LABEL_DTYPE).tobytes()
        images_file, labels_file = f"{split}_images.bin", f"{split}_labels.bin"
        (directory / images_file).write_bytes(image_bytes)
        (directory / labels_file).write_bytes(label_bytes)
        entries[split] = SplitEntry(
            images=images_file,
            labels=labels_file,
            count=len(dataset),
            images_sha256=_sha256(image_bytes),
            labels_sha256=_sha256(label_bytes),
        )

    manifest = DatasetManifest(
        name=name,
        shape=first.image_shape,
        num_classes=first.num_classes,
        dtype=dtype,
        scale=scale,
        splits=entries,
    )
    path = directory / "manifest.yaml"
    path.write_text(
        yaml.safe_dump(manifest.model_dump(mode="json"), sort_keys=False),
        encoding="utf-8",
    )
    logger.debug(f"Saved dataset {name} ({', '.join(entries)}) to {directory}")
    return path


def read_manifest(manifest_path: str | Path) -> DatasetManifest:
    path = Path(manifest_path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest {path} does not exist")
    document = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(document, dict):
        raise DatasetError(f"{path}: manifest must contain a mapping")
    try:
        return DatasetManifest.model_validate(document)
    except ValidationError as exc:
        raise DatasetError(f"{path}: invalid manifest: {exc}") from exc


def _read_verified(path: Path, expected: str) -> bytes:
    data = path.read_bytes()
    actual = _sha256(data)
    if actual != expected:
        raise ChecksumMismatchError(str(path), expected, actual)
    return data


def load_dataset(manifest_path: str | Path, split: str = "train") -> Dataset:
    """Load and validate one split; checksums are verified before parsing."""
    path = Path(manifest_path)
    manifest = read_manifest(path)
    if split not in manifest.splits:
        raise DatasetError(f"{path}: no split {split!r}")
    entry = manifest.splits[split]
    root = path.parent

    image_bytes = _read_verified(root / entry.images, entry.images_sha256)
    label_bytes = _read_verified(root / entry.labels, entry.labels_sha256)
    blob_dtype = _BLOB_DTYPES[manifest.dtype]
    expected = entry.count * math.prod(manifest.shape) * blob_dtype.itemsize
    if len(image_bytes) != expected:
        raise DatasetShapeError(
            f"{entry.images}: {len(image_bytes)} bytes, expected {expected}"
        )
    if len(label_bytes) != entry.count * _LABEL_DTYPE.itemsize:
        raise DatasetShapeError(f"{entry.labels}: expected {entry.count} labels")

    images = np.frombuffer(image_bytes, dtype=blob_dtype).reshape(
        (entry.count, *manifest.shape)
    )
    if manifest.dtype == "uint8":
        images = images.astype(np.float32) * np.float32(manifest.scale)
    labels = np.frombuffer(label_bytes, dtype=_LABEL_DTYPE)
    return Dataset(
        images.astype(np.float32),
        labels.astype(np.int64),
        manifest.num_classes,
        manifest.name,
        split,
    )


def load_task(manifest_path: str | Path) -> Task:
    manifest = read_manifest(manifest_path)
    return Task(
        manifest.name,
        load_dataset(manifest_path, "train"),
        load_dataset(manifest_path, "test"),
    )
