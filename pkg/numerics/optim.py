"""
Adam with bias correction over a dict of named float64 parameter arrays.
Defaults follow the published settings: lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import NumericalError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads):
    """
    Apply one Adam update to params in place and return them.

    The whole step is refused (state untouched) when any gradient is
    non-finite or does not match its parameter's shape.
    """
    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter has {value.shape}")
        if not np.all(np.isfinite(grad)):
            logger.error(f"Non-finite gradient for {name} at step {state.t + 1}; step aborted")
            raise NumericalError(f"non-finite gradient for parameter {name}")

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t

    for name, value in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)

        state.m[name] *= state.beta1
        state.m[name] += (1.0 - state.beta1) * g
        state.v[name] *= state.beta2
        state.v[name] += (1.0 - state.beta2) * (g * g)

        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    return params
