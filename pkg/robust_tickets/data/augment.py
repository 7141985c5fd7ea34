from typing import Any

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view


def flip_horizontal(images: npt.NDArray[Any]) -> npt.NDArray[Any]:
    return np.ascontiguousarray(images[..., ::-1])


def augment(
    images: npt.NDArray[Any],
    rng: np.random.Generator,
    *,
    enabled: bool = True,
    crop_padding: int = 4,
    force_flip: bool | None = None,
) -> npt.NDArray[Any]:
    """Random horizontal flip followed by a zero-padded random crop.

    ``force_flip`` flips every image (True) or none (False) instead of
    drawing a coin per image.
    """
    if not enabled or images.shape[0] == 0:
        return images

    n = images.shape[0]
    if force_flip is None:
        flips = rng.random(n) < 0.5
    else:
        flips = np.full(n, force_flip)
    out = np.where(flips[:, None, None, None], images[..., ::-1], images)

    if crop_padding > 0:
        _, _, h, w = images.shape
        pad = crop_padding
        padded = np.pad(out, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        windows = sliding_window_view(padded, (h, w), axis=(2, 3))
        rows = rng.integers(0, 2 * pad + 1, size=n)
        cols = rng.integers(0, 2 * pad + 1, size=n)
        out = windows[np.arange(n), :, rows, cols]
    return np.ascontiguousarray(out, dtype=images.dtype)
