"""
Reverse-mode differentiation over dense float64 matrices.

Every value is a 2-D numpy array. Operations never broadcast: operands must
agree in shape exactly or a ShapeError is raised. Each operation returns a
Node that remembers its parents and a closure that pushes the node's
gradient back into them; gradients accumulate additively, so a node consumed
twice receives the sum of both paths.
"""
import math

import numpy as np

from core.exceptions import NumericalError, ShapeError

PROBABILITY_FLOOR = 1e-12


def as_matrix(value):
    """Coerce to a finite 2-D float64 array (scalars become 1x1, vectors 1xN)."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        array = array.reshape(1, -1)
    elif array.ndim != 2:
        raise ShapeError(f"expected a matrix, got an array with {array.ndim} dimensions")
    if not np.all(np.isfinite(array)):
        raise NumericalError("matrix contains non-finite entries")
    return array


class Node:
    __slots__ = ('value', 'grad', 'parents', 'backward_rule', 'op')

    def __init__(self, value, parents=(), backward_rule=None, op='leaf'):
        self.value = as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.parents = parents
        self.backward_rule = backward_rule
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.shape})"

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def backward(self):
        """
        Propagate d(self)/d(node) to every ancestor.
        self must be a 1x1 node; its own gradient is seeded with 1.
        """
        if self.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar node, got shape {self.shape}")

        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.backward_rule is not None:
                node.backward_rule(node.grad)


def _require(condition, message):
    if not condition:
        raise ShapeError(message)


def add(a, b):
    _require(a.shape == b.shape, f"add: shapes {a.shape} and {b.shape} differ")

    def rule(g):
        a.grad += g
        b.grad += g

    return Node(a.value + b.value, (a, b), rule, 'add')


def scale(a, factor):
    factor = float(factor)

    def rule(g):
        a.grad += factor * g

    return Node(a.value * factor, (a,), rule, 'scale')


def matmul(a, b):
    _require(
        a.shape[1] == b.shape[0],
        f"matmul: inner dimensions disagree ({a.shape} x {b.shape})",
    )

    def rule(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    return Node(a.value @ b.value, (a, b), rule, 'matmul')


def transpose(a):
    def rule(g):
        a.grad += g.T

    return Node(a.value.T.copy(), (a,), rule, 'transpose')


def gather_rows(table, indices):
    """Rows of table picked by integer indices (repeats allowed)."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    _require(
        indices.size > 0 and indices.min() >= 0 and indices.max() < table.shape[0],
        f"gather_rows: index outside 0..{table.shape[0] - 1}",
    )

    def rule(g):
        np.add.at(table.grad, indices, g)

    return Node(table.value[indices], (table,), rule, 'gather_rows')


def last_row(a):
    def rule(g):
        a.grad[-1:] += g

    return Node(a.value[-1:].copy(), (a,), rule, 'last_row')


def project_rows(h, table, offset=1):
    """
    h . table[offset:]^T without copying the table.
    Used to score a 1xd preference against every candidate embedding.
    """
    _require(h.shape[0] == 1, f"project_rows: expected a row vector, got {h.shape}")
    _require(
        h.shape[1] == table.shape[1],
        f"project_rows: width {h.shape[1]} does not match table width {table.shape[1]}",
    )
    rows = table.value[offset:]

    def rule(g):
        h.grad += g @ rows
        table.grad[offset:] += g.T @ h.value

    return Node(h.value @ rows.T, (h, table), rule, 'project_rows')


def concat_cols(parts):
    _require(len(parts) > 0, "concat_cols: nothing to concatenate")
    rows = parts[0].shape[0]
    _require(
        all(part.shape[0] == rows for part in parts),
        "concat_cols: all parts need the same row count",
    )
    widths = [part.shape[1] for part in parts]
    bounds = np.cumsum([0] + widths)

    def rule(g):
        for part, start, stop in zip(parts, bounds[:-1], bounds[1:]):
            part.grad += g[:, start:stop]

    return Node(np.concatenate([p.value for p in parts], axis=1), tuple(parts), rule, 'concat_cols')


def _softmax_values(logits, mask, scale_by):
    z = logits / scale_by
    if mask is not None:
        z = np.where(mask, -np.inf, z)
    z = z - np.max(z)
    weights = np.exp(z)
    if mask is not None:
        weights = np.where(mask, 0.0, weights)
    return weights / weights.sum()


def masked_row_softmax(logits, mask=None, scale_by=1.0):
    """
    Softmax of logits/scale_by over one row, ignoring positions where mask
    is True. Masked positions come out exactly 0.
    """
    _require(logits.shape[0] == 1, f"masked_row_softmax: expected one row, got {logits.shape}")
    if scale_by <= 0:
        raise ValueError("softmax scale must be positive")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(1, -1)
        _require(mask.shape == logits.shape, "masked_row_softmax: mask length differs from logits")
        if mask.all():
            raise ValueError("every position is masked")

    out = _softmax_values(logits.value, mask, scale_by)

    def rule(g):
        inner = np.sum(g * out)
        logits.grad += out * (g - inner) / scale_by

    return Node(out, (logits,), rule, 'masked_row_softmax')


def masked_mean_rows(a, mask=None):
    """Mean over the rows of a whose mask entry is False, as a 1xd row."""
    keep = np.ones(a.shape[0], dtype=bool) if mask is None else ~np.asarray(mask, dtype=bool).reshape(-1)
    _require(keep.size == a.shape[0], "masked_mean_rows: mask length differs from row count")
    count = int(keep.sum())
    if count == 0:
        raise ValueError("every row is masked")

    def rule(g):
        a.grad[keep] += g / count

    return Node(a.value[keep].mean(axis=0, keepdims=True), (a,), rule, 'masked_mean_rows')


def softmax(logits):
    """Plain max-stabilised row softmax of a numpy row (no graph)."""
    return _softmax_values(as_matrix(logits), None, 1.0)


def softmax_cross_entropy(logits, target_column):
    """
    -log softmax(logits)[target_column], fused so the backward rule is
    exactly probs - onehot(target).
    """
    _require(logits.shape[0] == 1, f"softmax_cross_entropy: expected one row, got {logits.shape}")
    if not 0 <= target_column < logits.shape[1]:
        raise ValueError(f"target column {target_column} outside 0..{logits.shape[1] - 1}")

    probs = _softmax_values(logits.value, None, 1.0)
    loss = -math.log(max(probs[0, target_column], PROBABILITY_FLOOR))

    def rule(g):
        delta = probs.copy()
        delta[0, target_column] -= 1.0
        logits.grad += g[0, 0] * delta

    node = Node(loss, (logits,), rule, 'softmax_cross_entropy')
    return node, probs


def cross_entropy(scores, target):
    """
    -log(scores[target]) for a normalized 1xm score row and a 1-based
    ItemId target. The probability is floored at 1e-12 before the log.
    """
    scores = as_matrix(scores)
    if not 1 <= target <= scores.shape[1]:
        raise ValueError(f"target {target} outside 1..{scores.shape[1]}")
    if abs(scores.sum() - 1.0) > 1e-6:
        raise ValueError("scores are not normalized")
    return -math.log(max(scores[0, target - 1], PROBABILITY_FLOOR))
