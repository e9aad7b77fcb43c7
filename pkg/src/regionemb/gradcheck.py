"""Central finite differences, the independent oracle for every backward rule."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import Tensor

__all__ = ["finite_diff_grad", "compare_gradients"]


def finite_diff_grad(
    loss_fn: Callable[[], float],
    params: dict[str, Tensor],
    eps: float = 1e-5,
) -> dict[str, np.ndarray]:
    """Per-element (L(p+eps) - L(p-eps)) / (2 eps) for every parameter.

    loss_fn must be deterministic; it is evaluated twice up front and a
    mismatch is an error. Parameters are perturbed in place and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    first = float(loss_fn())
    second = float(loss_fn())
    if first != second:
        raise ValueError(
            f"loss_fn is not deterministic: {first!r} != {second!r} on repeat evaluation"
        )
    grads: dict[str, np.ndarray] = {}
    for name, p in params.items():
        flat = p.data.ravel()
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(loss_fn())
            flat[i] = orig - eps
            down = float(loss_fn())
            flat[i] = orig
            g[i] = (up - down) / (2.0 * eps)
        grads[name] = g.reshape(p.data.shape)
    return grads


def compare_gradients(
    analytic: np.ndarray,
    numeric: np.ndarray,
    small: float = 1e-8,
) -> tuple[float, float]:
    """Worst relative error over elements with |analytic| >= small, and worst
    absolute error over the rest. Either may be 0.0 if its bucket is empty.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != n.shape:
        raise ValueError("gradient shape mismatch")
    err = np.abs(a - n)
    big = np.abs(a) >= small
    max_rel = float((err[big] / np.abs(a[big])).max()) if big.any() else 0.0
    max_abs = float(err[~big].max()) if (~big).any() else 0.0
    return max_rel, max_abs
