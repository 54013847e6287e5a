# reconet/engine/tensor.py
import threading
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from reconet.utils.errors import NumericError, TapeError

DEFAULT_DTYPE = np.float32
GRADCHECK_DTYPE = np.float64

_local = threading.local()
_debug_finite: Optional[bool] = None


def set_debug_finite(enabled: Optional[bool]) -> None:
    """Force NaN/Inf assertions on or off; None falls back to RECONET_DEBUG_FINITE."""
    global _debug_finite
    _debug_finite = enabled


def debug_finite_enabled() -> bool:
    if _debug_finite is not None:
        return _debug_finite
    from reconet.config import get_settings
    return get_settings().DEBUG_FINITE


class Tensor:
    """Dense float array with optional gradient tracking.

    Data is treated as immutable once built; only ``grad`` is written after
    construction (and ``finite_diff_check`` perturbs data in place, restoring it).
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        array = np.asarray(data)
        if dtype is None:
            dtype = GRADCHECK_DTYPE if array.dtype == GRADCHECK_DTYPE else DEFAULT_DTYPE
        self.data = np.ascontiguousarray(array, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        grad = grad.astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """Ordered record of differentiable ops executed while the tape is active.

    Records are appended in execution order, so the record is topological and
    a reverse walk visits every op once. Tapes are thread-local: each worker
    thread owns whatever tape it opened.
    """

    def __init__(self):
        self.records: List[Tuple[Tensor, Tuple[Tensor, ...], BackwardFn]] = []
        self.consumed = False

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self) -> int:
        return len(self.records)

    def record(self, output: Tensor, inputs: Tuple[Tensor, ...], backward_fn: BackwardFn) -> None:
        if self.consumed:
            raise TapeError(
                message="Stale tape",
                details="Ops were recorded on a tape that already ran backward",
                example="Call tape.reset() before reusing a tape"
            )
        self.records.append((output, inputs, backward_fn))

    def reset(self) -> None:
        self.records = []
        self.consumed = False

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeError(
                message="Stale tape",
                details="backward() was already called on this tape",
                example="Reset the tape and recompute the loss before a second backward pass"
            )
        if loss.size != 1:
            raise TapeError(
                message="Non-scalar loss",
                details=f"backward() needs a scalar loss, got shape {loss.shape}",
                example="Reduce with ops.sum or ops.mean first"
            )
        if not self.records:
            raise TapeError(
                message="Empty tape",
                details="No differentiable ops were recorded",
                example="Run the forward pass inside 'with Tape() as tape:'"
            )
        self.consumed = True
        produced = {id(output) for output, _, _ in self.records}
        pending = {id(loss): np.ones_like(loss.data)}
        if id(loss) not in produced:
            if loss.requires_grad:
                loss.accumulate_grad(pending[id(loss)])
            return

        for output, inputs, backward_fn in reversed(self.records):
            grad = pending.pop(id(output), None)
            if grad is None:
                continue
            for tensor, input_grad in zip(inputs, backward_fn(grad)):
                if input_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in produced:
                    if key in pending:
                        pending[key] = pending[key] + input_grad
                    else:
                        pending[key] = input_grad
                else:
                    tensor.accumulate_grad(input_grad)


def _stack() -> List[Tape]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def current_tape() -> Optional[Tape]:
    stack = _stack()
    return stack[-1] if stack else None


def backward(loss: Tensor) -> None:
    tape = current_tape()
    if tape is None:
        raise TapeError(
            message="No active tape",
            details="backward() was called outside a 'with Tape()' block"
        )
    tape.backward(loss)


def make_result(data: np.ndarray, inputs: Tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap an op result, recording it on the active tape when any input is tracked."""
    tape = current_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track, dtype=data.dtype)
    if debug_finite_enabled() and not np.all(np.isfinite(out.data)):
        raise NumericError(
            message="Non-finite tensor",
            details=f"{op} produced NaN or Inf values",
        )
    if track:
        tape.record(out, inputs, backward_fn)
    return out
