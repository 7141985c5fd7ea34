from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.constants import INPUT_RANGE
from robust_tickets.exceptions import ConfigError


def gaussian_augment(
    x: npt.NDArray[Any],
    sigma: float,
    rng: np.random.Generator,
    *,
    clip: tuple[float, float] = INPUT_RANGE,
) -> npt.NDArray[Any]:
    """Add i.i.d. N(0, sigma^2) noise and clip back into the input range.

    ``sigma == 0`` returns the input unchanged and draws nothing from ``rng``.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return x
    noise = rng.normal(0.0, sigma, size=x.shape)
    return np.clip(x + noise, clip[0], clip[1]).astype(x.dtype)
