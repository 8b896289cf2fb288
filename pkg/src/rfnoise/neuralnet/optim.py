"""Adam with bias-corrected moments."""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from ..kernels import adam_update


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(params, grads, state, cfg):
    """One in-place Adam update of ``params``; returns ``(params, state)``.

    m <- b1 m + (1 - b1) g
    v <- b2 v + (1 - b2) g*g
    params <- params - lr * m_hat / (sqrt(v_hat) + eps)
    with m_hat = m / (1 - b1**t), v_hat = v / (1 - b2**t).
    """
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("params, grads and optimiser state must share a shape")
    if not np.all(np.isfinite(grads)):
        raise DivergenceError("non-finite gradient")
    state.t += 1
    adam_update(params, grads, state.m, state.v, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, state.t)
    return params, state
