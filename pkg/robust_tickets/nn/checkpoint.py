from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from robust_tickets.autodiff import Tensor
from robust_tickets.constants import (
    CHECKPOINT_MAGIC,
    FORMAT_VERSION,
    MASK_MAGIC,
    PretrainSchemeName,
)
from robust_tickets.exceptions import (
    CheckpointError,
    CheckpointShapeError,
    CorruptHeaderError,
    TruncatedBlobError,
)

from .masks import MaskSet
from .network import Network, weights_digest
from .spec import NetworkSpec, parameter_shapes

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct("<I")
_FLOAT = np.dtype("<f4")


class CheckpointMetadata(BaseModel):
    model_config = ConfigDict(frozen=True)

    source_task: str
    pretraining_scheme: PretrainSchemeName
    seed: int
    epoch: int = Field(ge=0)
    extra: dict[str, Any] = Field(default_factory=dict)


@dataclass(frozen=True)
class Checkpoint:
    """Pretrained weights with the spec they were built from."""

    spec: NetworkSpec
    weights: Mapping[str, npt.NDArray[Any]]
    metadata: CheckpointMetadata
    digest: str = field(init=False)

    def __post_init__(self) -> None:
        expected = {param.name: param.shape for param in parameter_shapes(self.spec)}
        if expected.keys() != self.weights.keys():
            missing = sorted(expected.keys() - self.weights.keys())
            unknown = sorted(self.weights.keys() - expected.keys())
            raise CheckpointShapeError(
                f"weights do not match spec: missing {missing}, unknown {unknown}"
            )
        for name, shape in expected.items():
            if tuple(self.weights[name].shape) != shape:
                raise CheckpointShapeError(
                    f"{name}: stored shape {self.weights[name].shape}, spec {shape}"
                )
        object.__setattr__(self, "digest", weights_digest(self.weights))

    @classmethod
    def from_network(cls, net: Network, metadata: CheckpointMetadata) -> Checkpoint:
        weights = {name: data.copy() for name, data in net.weights().items()}
        return cls(net.spec, weights, metadata)

    def network(self, *, requires_grad: bool = True) -> Network:
        """A fresh Network whose arrays are copies of the stored weights."""
        params = {
            name: Tensor(np.array(data), requires_grad=requires_grad, name=name)
            for name, data in self.weights.items()
        }
        return Network(self.spec, params)


class _TensorEntry(BaseModel):
    name: str
    shape: tuple[int, ...]
    offset: int = Field(ge=0)
    length: int = Field(ge=0)


class _Header(BaseModel):
    format_version: int
    kind: str
    tensors: list[_TensorEntry]
    blob_bytes: int = Field(ge=0)
    blob_sha256: str
    spec: NetworkSpec | None = None
    metadata: CheckpointMetadata | None = None


def _write_container(path: Path, magic: bytes, header: _Header, blob: bytes) -> None:
    payload = header.model_dump_json(exclude_none=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(magic + _LENGTH.pack(len(payload)) + payload + blob)
    tmp.replace(path)


def _read_container(path: Path, magic: bytes) -> tuple[_Header, bytes]:
    raw = path.read_bytes()
    if raw[: len(magic)] != magic:
        raise CorruptHeaderError(f"{path}: bad magic bytes")
    start = len(magic) + _LENGTH.size
    if len(raw) < start:
        raise CorruptHeaderError(f"{path}: header length missing")
    (length,) = _LENGTH.unpack(raw[len(magic) : start])
    if len(raw) < start + length:
        raise CorruptHeaderError(f"{path}: header shorter than declared")
    try:
        header = _Header.model_validate(json.loads(raw[start : start + length]))
    except (ValueError, ValidationError) as exc:
        raise CorruptHeaderError(f"{path}: unreadable header: {exc}") from exc
    if header.format_version != FORMAT_VERSION:
        raise CorruptHeaderError(
            f"{path}: unsupported format version {header.format_version}"
        )

    blob = raw[start + length :]
    if len(blob) < header.blob_bytes:
        raise TruncatedBlobError(
            f"{path}: blob has {len(blob)} bytes, header declares {header.blob_bytes}"
        )
    blob = blob[: header.blob_bytes]
    if hashlib.sha256(blob).hexdigest() != header.blob_sha256:
        raise CheckpointError(f"{path}: blob checksum mismatch")
    return header, blob


def _pack(
    arrays: Mapping[str, bytes], shapes: Mapping[str, tuple[int, ...]]
) -> tuple[list[_TensorEntry], bytes]:
    entries: list[_TensorEntry] = []
    chunks: list[bytes] = []
    offset = 0
    for name, chunk in arrays.items():
        entries.append(
            _TensorEntry(
                name=name, shape=shapes[name], offset=offset, length=len(chunk)
            )
        )
        chunks.append(chunk)
        offset += len(chunk)
    return entries, b"".join(chunks)


def _slice(blob: bytes, entry: _TensorEntry, path: Path) -> bytes:
    end = entry.offset + entry.length
    if end > len(blob):
        raise TruncatedBlobError(f"{path}: tensor {entry.name!r} runs past the blob")
    return blob[entry.offset : end]


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    arrays = {
        name: np.ascontiguousarray(data, dtype=_FLOAT).tobytes()
        for name, data in checkpoint.weights.items()
    }
    shapes = {name: tuple(data.shape) for name, data in checkpoint.weights.items()}
    entries, blob = _pack(arrays, shapes)
    header = _Header(
        format_version=FORMAT_VERSION,
        kind="checkpoint",
        tensors=entries,
        blob_bytes=len(blob),
        blob_sha256=hashlib.sha256(blob).hexdigest(),
        spec=checkpoint.spec,
        metadata=checkpoint.metadata,
    )
    _write_container(path, CHECKPOINT_MAGIC, header, blob)
    logger.debug(f"Saved checkpoint {checkpoint.digest[:12]} to {path}")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    header, blob = _read_container(path, CHECKPOINT_MAGIC)
    if header.kind != "checkpoint" or header.spec is None or header.metadata is None:
        raise CorruptHeaderError(f"{path}: not a checkpoint file")

    weights: dict[str, npt.NDArray[Any]] = {}
    for entry in header.tensors:
        chunk = _slice(blob, entry, path)
        if entry.length != math.prod(entry.shape) * _FLOAT.itemsize:
            raise CheckpointShapeError(
                f"{path}: tensor {entry.name!r} length does not match {entry.shape}"
            )
        weights[entry.name] = (
            np.frombuffer(chunk, dtype=_FLOAT).astype(np.float32).reshape(entry.shape)
        )
    return Checkpoint(header.spec, weights, header.metadata)


def save_masks(masks: MaskSet, path: str | Path) -> Path:
    path = Path(path)
    arrays = {
        name: np.packbits(mask.reshape(-1), bitorder="little").tobytes()
        for name, mask in masks.items()
    }
    shapes = {name: tuple(mask.shape) for name, mask in masks.items()}
    entries, blob = _pack(arrays, shapes)
    header = _Header(
        format_version=FORMAT_VERSION,
        kind="masks",
        tensors=entries,
        blob_bytes=len(blob),
        blob_sha256=hashlib.sha256(blob).hexdigest(),
    )
    _write_container(path, MASK_MAGIC, header, blob)
    return path


def load_masks(path: str | Path) -> MaskSet:
    path = Path(path)
    header, blob = _read_container(path, MASK_MAGIC)
    if header.kind != "masks":
        raise CorruptHeaderError(f"{path}: not a mask file")

    masks: dict[str, npt.NDArray[np.bool_]] = {}
    for entry in header.tensors:
        size = math.prod(entry.shape)
        if entry.length != (size + 7) // 8:
            raise CheckpointShapeError(
                f"{path}: mask {entry.name!r} length does not match {entry.shape}"
            )
        bits = np.unpackbits(
            np.frombuffer(_slice(blob, entry, path), dtype=np.uint8),
            count=size,
            bitorder="little",
        )
        masks[entry.name] = bits.astype(np.bool_).reshape(entry.shape)
    return MaskSet(masks)
