"""Central finite-difference checks for tape gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad, reset_tape


@dataclass
class GradCheckResult:
    max_rel_err: float
    checked: int

    @property
    def ok(self) -> bool:
        return self.checked > 0


_EPS = float(np.finfo(np.float64).eps)


def _roundoff(f_plus: float, f_minus: float, h: float) -> float:
    # bound on the rounding error of the central difference quotient
    return 8.0 * _EPS * max(abs(f_plus), abs(f_minus), 1.0) / h


def _rel_err(a: float, b: float, floor: float, noise: float = 0.0) -> float:
    return max(abs(a - b) - noise, 0.0) / max(abs(a), abs(b), floor)


def analytic_grads(fn: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.zero_grad()
    reset_tape()
    loss = fn()
    backward(loss)
    return [p.grad.copy() for p in params]


def check_gradients(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = 40,
    rng: np.random.Generator | None = None,
    floor: float = 1e-7,
) -> GradCheckResult:
    """Compare tape gradients with central differences coordinate-wise.

    At most ``max_coords`` coordinates per parameter are sampled. ``floor``
    keeps the relative error meaningful where both derivatives vanish, and
    discrepancies below the rounding error of the difference quotient
    (about ``eps |f| / h``) are not counted.
    """
    rng = rng or np.random.default_rng(0)
    grads = analytic_grads(fn, params)
    worst = 0.0
    count = 0
    for p, g in zip(params, grads):
        flat = p.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if max_coords is None or n <= max_coords else rng.choice(n, max_coords, replace=False)
        for i in idx:
            base = flat.copy()
            plus = base.copy()
            plus[i] += h
            minus = base.copy()
            minus[i] -= h
            with no_grad():
                p.assign(plus.reshape(p.shape))
                f_plus = fn().item()
                p.assign(minus.reshape(p.shape))
                f_minus = fn().item()
                p.assign(base.reshape(p.shape))
            numeric = (f_plus - f_minus) / (2 * h)
            noise = _roundoff(f_plus, f_minus, h)
            worst = max(worst, _rel_err(float(g.reshape(-1)[i]), numeric, floor, noise))
            count += 1
    return GradCheckResult(worst, count)


def check_directional(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    trials: int = 20,
    h: float = 1e-5,
    rng: np.random.Generator | None = None,
    floor: float = 1e-7,
) -> GradCheckResult:
    """Directional-derivative check along random unit directions.

    Cheap for models with many parameters: each trial costs two forward passes.
    """
    rng = rng or np.random.default_rng(0)
    grads = analytic_grads(fn, params)
    base = [p.data.copy() for p in params]
    worst = 0.0
    for _ in range(trials):
        dirs = [rng.standard_normal(p.shape) for p in params]
        norm = np.sqrt(np.sum([np.sum(d * d) for d in dirs]))
        dirs = [d / norm for d in dirs]
        analytic = float(np.sum([np.sum(g * d) for g, d in zip(grads, dirs)]))
        with no_grad():
            for p, b, d in zip(params, base, dirs):
                p.assign(b + h * d)
            f_plus = fn().item()
            for p, b, d in zip(params, base, dirs):
                p.assign(b - h * d)
            f_minus = fn().item()
            for p, b in zip(params, base):
                p.assign(b)
        numeric = (f_plus - f_minus) / (2 * h)
        worst = max(worst, _rel_err(analytic, numeric, floor, _roundoff(f_plus, f_minus, h)))
    return GradCheckResult(worst, trials)
