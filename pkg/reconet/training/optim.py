# reconet/training/optim.py
from pathlib import Path
from typing import Dict, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from reconet.engine.tensor import Tensor
from reconet.schemas.training import AdamConfig
from reconet.stylenet.checkpoint import read_container, write_atomic, write_container
from reconet.utils.errors import CheckpointError, ShapeError


class AdamState(BaseModel):
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @classmethod
    def fresh(cls, params: Mapping[str, Tensor], config: AdamConfig = AdamConfig()) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
            beta1=config.beta1, beta2=config.beta2, eps=config.eps,
        )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
    lr: float,
) -> AdamState:
    """Bias-corrected Adam; parameters get fresh data arrays, state buffers update in place.

    Parameters without a gradient keep their data and moments. The step count
    is shared and advances once per call.
    """
    for name, param in params.items():
        grad = grads.get(name)
        if grad is not None and grad.shape != param.shape:
            raise ShapeError(message="adam_step: gradient shape mismatch", details=f"'{name}': {grad.shape} vs {param.shape}")
        if state.m[name].shape != param.shape:
            raise ShapeError(message="adam_step: moment shape mismatch", details=f"'{name}': {state.m[name].shape} vs {param.shape}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data = (param.data - update).astype(param.data.dtype)
    return state


def save_adam_state(path: Path, state: AdamState) -> None:
    arrays = {}
    for name in state.m:
        arrays[f"m/{name}"] = state.m[name]
        arrays[f"v/{name}"] = state.v[name]
    metadata = {"step": str(state.step), "beta1": repr(state.beta1), "beta2": repr(state.beta2), "eps": repr(state.eps)}
    write_atomic(path, write_container(arrays, metadata))


def load_adam_state(path: Path) -> AdamState:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(
            message="Optimizer state not found",
            details=f"No optimizer state at: {path}",
            example="Resume from a checkpoint written by reconet train"
        )
    arrays, metadata = read_container(path.read_bytes())
    m = {k[2:]: a for k, a in arrays.items() if k.startswith("m/")}
    v = {k[2:]: a for k, a in arrays.items() if k.startswith("v/")}
    return AdamState(m=m, v=v, step=int(metadata["step"]), beta1=float(metadata["beta1"]),
                     beta2=float(metadata["beta2"]), eps=float(metadata["eps"]))
