# reconet/engine/gradcheck.py
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tape, Tensor

# central differences round off at about eps * |f| / h; the floor sits well above that
FLOOR_FACTOR = 1e5


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-6,
    indices: Optional[Sequence[int]] = None,
    floor: Optional[float] = None,
) -> float:
    """Max per-element relative error between the tape gradient of f at x and central differences.

    Each checked element contributes |a - n| / max(|a|, |n|, floor). Without an
    explicit floor it is FLOOR_FACTOR * eps * max(1, |f(x)|) / h, so entries whose
    true gradient is below the rounding level of the difference quotient are
    compared absolutely. ``indices`` restricts the check to those flat positions
    of x (large parameter tensors are sampled).
    """
    x.requires_grad = True
    x.zero_grad()
    with Tape() as tape:
        loss = f(x)
        tape.backward(loss)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    if floor is None:
        floor = FLOOR_FACTOR * np.finfo(np.float64).eps * max(1.0, abs(float(loss.data))) / h

    flat = x.data.reshape(-1)
    positions = np.arange(flat.size) if indices is None else np.asarray(indices, dtype=np.int64)
    numeric = np.empty(len(positions), dtype=np.float64)
    for n, position in enumerate(positions):
        original = flat[position]
        flat[position] = original + h
        plus = float(f(x).data)
        flat[position] = original - h
        minus = float(f(x).data)
        flat[position] = original
        numeric[n] = (plus - minus) / (2 * h)

    expected = analytic.reshape(-1)[positions].astype(np.float64)
    scale = np.maximum(np.maximum(np.abs(expected), np.abs(numeric)), floor)
    return float(np.max(np.abs(expected - numeric) / scale))


def sample_indices(t: Tensor, count: int, rng: np.random.Generator) -> np.ndarray:
    if t.size <= count:
        return np.arange(t.size)
    return rng.choice(t.size, size=count, replace=False)
