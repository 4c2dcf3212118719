"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericError(ArithmeticError):
    pass


@dataclass
class GradCheckReport:
    step: float
    tolerance: float
    max_rel_error: dict = field(default_factory=dict)  # block name -> max relative error

    @property
    def failed_blocks(self) -> list[str]:
        return [k for k, v in self.max_rel_error.items() if not v < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed_blocks

    def worst(self) -> tuple[str, float]:
        name = max(self.max_rel_error, key=self.max_rel_error.get)
        return name, self.max_rel_error[name]


def relative_error(analytic, numeric) -> np.ndarray:
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def gradient_check(loss_fn, params: dict, grads: dict, step: float = 1e-4, tolerance: float = 1e-4,
                   blocks=None) -> GradCheckReport:
    """Compare ``grads`` against central differences of ``loss_fn(params)``.

    ``params`` arrays are perturbed in place and restored.  Every element of
    every checked block is differenced, so keep models small.  ``loss_fn``
    may return a long double; tiny gradients are then not swamped by
    float64 round-off in the loss.
    """
    report = GradCheckReport(step, tolerance)
    for name in blocks or params:
        p = params[name]
        g = np.asarray(grads[name])
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite analytic gradient in {name}")
        num = np.zeros(p.shape)
        flat = p.reshape(-1)
        if not np.shares_memory(flat, p):
            raise ValueError(f"parameter {name} must be contiguous")
        nflat = num.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            x_up = flat[k]
            up = loss_fn(params)
            flat[k] = orig - step
            x_down = flat[k]
            down = loss_fn(params)
            flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite loss while perturbing {name}[{k}]")
            # divide by the step actually taken after rounding
            nflat[k] = (up - down) / (np.longdouble(x_up) - np.longdouble(x_down))
        err = relative_error(g, num)
        report.max_rel_error[name] = float(err.max()) if err.size else 0.0
    return report
