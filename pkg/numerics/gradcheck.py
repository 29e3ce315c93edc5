"""
Central finite-difference check of reverse-mode gradients.
"""
import logging
import math

import numpy as np

from core.exceptions import NumericalError
from .autodiff import Node

logger = logging.getLogger(__name__)


def _evaluate(f, params):
    value = float(f({name: Node(array) for name, array in params.items()}).value[0, 0])
    if not math.isfinite(value):
        raise NumericalError("function under check is not finite")
    return value


def reverse_gradients(f, params):
    leaves = {name: Node(array) for name, array in params.items()}
    f(leaves).backward()
    return {name: node.grad for name, node in leaves.items()}


def numeric_gradients(f, params, h=1e-4):
    """(f(theta + h e_i) - f(theta - h e_i)) / 2h for every coordinate."""
    work = {name: np.array(array, dtype=np.float64) for name, array in params.items()}
    numeric = {}
    for name, array in work.items():
        grad = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + h
            plus = _evaluate(f, work)
            array[index] = original - h
            minus = _evaluate(f, work)
            array[index] = original
            grad[index] = (plus - minus) / (2 * h)
        numeric[name] = grad
    return numeric


def grad_check(f, params, h=1e-4):
    """
    Compare reverse-mode and central-difference gradients of f.

    f maps a dict of leaf Nodes (one per entry of params) to a 1x1 Node.
    Returns the max over all coordinates of |a - n| / max(1, |a|, |n|).
    """
    _evaluate(f, params)
    analytic = reverse_gradients(f, params)
    numeric = numeric_gradients(f, params, h)

    worst = 0.0
    for name in params:
        a = analytic[name]
        n = numeric[name]
        denominator = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        error = float(np.max(np.abs(a - n) / denominator)) if a.size else 0.0
        if error > worst:
            worst = error
            logger.debug(f"grad_check: worst coordinate so far in {name}: {error:.3e}")
    return worst
