from __future__ import annotations

from typing import Callable, List, Optional, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numerical_grad(
    fn: Callable[[], Tensor],
    target: Tensor,
    h: float = 1e-4,
    indices: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. the flat entries ``indices`` of ``target``."""
    flat = target.data.reshape(-1)
    if indices is None:
        indices = np.arange(flat.size)
    out = np.zeros(len(indices))
    with no_grad():
        for j, idx in enumerate(indices):
            original = flat[idx]
            flat[idx] = original + h
            plus = fn().item()
            flat[idx] = original - h
            minus = fn().item()
            flat[idx] = original
            out[j] = (plus - minus) / (2.0 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-4,
    max_entries: Optional[int] = 64,
    rng: Optional[np.random.Generator] = None,
) -> List[float]:
    """Relative error between backprop and finite differences, one value per input.

    ``fn`` must be deterministic and read the inputs' arrays at call time.
    Large inputs are checked on ``max_entries`` randomly sampled positions.
    """
    rng = rng or np.random.default_rng(0)
    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    fn().backward()
    errors: List[float] = []
    for t in inputs:
        analytic = np.zeros(t.size) if t.grad is None else t.grad.reshape(-1)
        if max_entries is not None and t.size > max_entries:
            indices = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        else:
            indices = np.arange(t.size)
        numeric = numerical_grad(fn, t, h, indices)
        errors.append(relative_error(analytic[indices], numeric))
    return errors


__all__ = ["numerical_grad", "relative_error", "grad_check"]
