from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from robust_tickets.exceptions import ContractError

from .tensor import Tensor, grad


@dataclass(frozen=True, slots=True)
class GradCheckResult:
    max_relative_error: float
    checked: int
    flagged: tuple[int, ...]

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-6,
    kink_tolerance: float = 1e-3,
) -> GradCheckResult:
    """Compare reverse-mode gradients of scalar ``f`` with central differences.

    Relative error per coordinate is ``|a - cd| / (|a| + |cd| + 1e-12)``.
    Coordinates whose one-sided differences disagree by more than
    ``kink_tolerance`` have a gradient discontinuity inside the eps window;
    they are reported in ``flagged`` and left out of the maximum.
    """
    if x.dtype != np.float64:
        raise ContractError(f"grad_check runs in float64, got {x.dtype}")

    base = np.array(x.data, dtype=np.float64)
    probe = Tensor(base.copy(), requires_grad=True)
    out = f(probe)
    if out.size != 1:
        raise ContractError(f"grad_check needs a scalar function, got {out.shape}")
    (analytic,) = grad(out, [probe])

    def evaluate(values: np.ndarray) -> float:
        return f(Tensor(values)).item()

    f0 = out.item()
    worst = 0.0
    flagged: list[int] = []
    for index in range(base.size):
        shifted = base.copy()
        shifted.flat[index] += eps
        f_plus = evaluate(shifted)
        shifted.flat[index] -= 2 * eps
        f_minus = evaluate(shifted)

        central = (f_plus - f_minus) / (2 * eps)
        forward = (f_plus - f0) / eps
        backward = (f0 - f_minus) / eps
        if abs(forward - backward) > kink_tolerance * (1.0 + abs(central)):
            flagged.append(index)
            continue

        a = float(analytic.flat[index])
        worst = max(worst, abs(a - central) / (abs(a) + abs(central) + 1e-12))

    return GradCheckResult(
        max_relative_error=worst,
        checked=base.size - len(flagged),
        flagged=tuple(flagged),
    )
