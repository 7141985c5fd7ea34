import hashlib
import json
from typing import Any

import numpy as np


def rng_streams(
    seed: int | np.random.Generator, count: int
) -> list[np.random.Generator]:
    """Independent generators derived from one seed (or one generator)."""
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63))
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def content_hash(payload: Any) -> str:
    if payload is not None and not isinstance(
        payload, (dict, list, str, int, float, bool)
    ):
        raise ValueError(f"Expected JSON-compatible payload, got {type(payload)}")
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()
