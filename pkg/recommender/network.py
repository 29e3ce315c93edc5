"""
Forward pass, loss and gradients for every model variant.

A session window of n slots is embedded (E), optionally shifted by
position embeddings (C = E + P), summarised by attention queried with a
learned vector q (alpha, h_o), and optionally re-read by multi-head
attention queried with a preference estimate (beta_i, h_p). Candidate scores
are a softmax of h . v_j over the real items j = 1..m; the same V serves as
input lookup and output projection.
"""
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import FormatError, ShapeError
from numerics.autodiff import (
    add,
    concat_cols,
    gather_rows,
    last_row,
    masked_mean_rows,
    masked_row_softmax,
    matmul,
    project_rows,
    softmax,
    softmax_cross_entropy,
    transpose,
)


@dataclass
class ForwardTrace:
    scores: np.ndarray
    mask: np.ndarray
    E: np.ndarray = None
    C: np.ndarray = None
    alpha: np.ndarray = None
    h_o: np.ndarray = None
    beta: list = field(default_factory=list)
    h_p: np.ndarray = None
    h: np.ndarray = None
    logits: object = None
    leaves: dict = None


def embed(fixed, leaves, hp):
    """E = V[slots] (pads hit the zero row), C = E + P unless position embeddings are off."""
    if len(fixed.slots) != hp.n:
        raise ShapeError(f"window has {len(fixed.slots)} slots, model expects n={hp.n}")
    slots = np.asarray(fixed.slots, dtype=np.int64)
    m = leaves['V'].shape[0] - 1
    if slots.max() > m or slots.min() < 0:
        raise FormatError(f"ItemId outside 0..{m} in window {fixed.slots}")

    E = gather_rows(leaves['V'], slots)
    C = add(E, leaves['P']) if hp.use_position_embeddings else E
    return E, C, slots == 0


def _attention_mask(mask, hp):
    return mask if hp.use_pad_mask else None


def position_sensitive_attention(C, q, mask, hp):
    """alpha = softmax(q C^T / sqrt(d)), h_o = alpha C."""
    logits = matmul(q, transpose(C))
    alpha = masked_row_softmax(logits, _attention_mask(mask, hp), math.sqrt(hp.d))
    return alpha, matmul(alpha, C)


def prospective_attention(query, C, mask, leaves, hp):
    """
    Per head: beta_i = softmax((query Q_i)(C K_i)^T / scale), head_i = beta_i (C W_i).
    h_p = [head_1 .. head_b] W.
    """
    scale_by = math.sqrt(hp.d) if hp.attention_scale_mode == 'full_d' else math.sqrt(hp.head_width)
    attention_mask = _attention_mask(mask, hp)
    betas, heads = [], []
    for i in range(1, hp.b + 1):
        keys = matmul(C, leaves[f'K_{i}'])
        logits = matmul(matmul(query, leaves[f'Q_{i}']), transpose(keys))
        beta = masked_row_softmax(logits, attention_mask, scale_by)
        betas.append(beta)
        heads.append(matmul(beta, matmul(C, leaves[f'W_{i}'])))
    return betas, matmul(concat_cols(heads), leaves['W'])


def score(h, V):
    """Logits h . v_j for j = 1..m (the padding row is never a candidate) and their softmax."""
    logits = project_rows(h, V, offset=1)
    return logits, softmax(logits.value)


def popularity_scores(fixed, m):
    """Within-session item frequency, normalised; absent items score 0."""
    counts = Counter(item for item in fixed.slots if item != 0)
    scores = np.zeros((1, m))
    for item, count in counts.items():
        scores[0, item - 1] = count
    return scores / scores.sum()


def forward(fixed, params, hp, target=None, leaves=None, m=None):
    """
    Run one window through the variant named by hp.variant.
    POP needs no params, only the catalogue size m.
    """
    m = params.m if params is not None else m
    if hp.variant == 'POP':
        slots = np.asarray(fixed.slots)
        return ForwardTrace(scores=popularity_scores(fixed, m), mask=slots == 0)

    leaves = params.leaves() if leaves is None else leaves
    E, C, mask = embed(fixed, leaves, hp)
    trace = ForwardTrace(scores=None, mask=mask, E=E.value, C=C.value, leaves=leaves)

    if hp.variant == 'MEAN':
        h = masked_mean_rows(E, mask)
    elif hp.variant == 'ORACLE':
        if target is None:
            raise ValueError("the ORACLE variant reads the target; none was given")
        if not 1 <= target <= m:
            raise FormatError(f"target {target} outside 1..{m}")
        query = gather_rows(leaves['V'], [target])
        logits = matmul(query, transpose(E))
        alpha = masked_row_softmax(logits, _attention_mask(mask, hp), math.sqrt(hp.d))
        h = matmul(alpha, E)
        trace.alpha = alpha.value
        trace.h_o = h.value
    else:
        alpha, h_o = position_sensitive_attention(C, leaves['q'], mask, hp)
        trace.alpha = alpha.value
        trace.h_o = h_o.value
        h = h_o
        if hp.uses_prospective:
            query = last_row(C) if hp.variant == 'LAST_OP' else h_o
            betas, h_p = prospective_attention(query, C, mask, leaves, hp)
            trace.beta = [beta.value for beta in betas]
            trace.h_p = h_p.value
            h = h_p if hp.variant == 'P' else add(h_o, h_p)

    trace.logits, trace.scores = score(h, leaves['V'])
    trace.h = h.value
    return trace


def loss(trace, target):
    """-log of the target's score; a 1x1 Node ready for backward()."""
    if trace.logits is None:
        raise ValueError("this variant has no trainable parameters")
    node, _ = softmax_cross_entropy(trace.logits, target - 1)
    return node


def backward(trace, loss_node, hp):
    """Gradients of loss_node for every parameter; the padding row of V gets none."""
    loss_node.backward()
    grads = {name: leaf.grad for name, leaf in trace.leaves.items()}
    grads['V'][0] = 0.0
    if not hp.use_position_embeddings:
        grads['P'][:] = 0.0
    return grads


def example_gradients(fixed, params, hp):
    """(loss value, gradients) for one window."""
    trace = forward(fixed, params, hp, target=fixed.target)
    node = loss(trace, fixed.target)
    return float(node.value[0, 0]), backward(trace, node, hp)
