"""
Model analyses: how the preference prediction lines up with the item
embeddings, and where the position-sensitive attention puts its weight.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from core.exceptions import FlagError
from corpus.sessions import to_fixed
from recommender.network import forward

logger = logging.getLogger(__name__)

ATTENTION_VARIANTS = ('O', 'P', 'OP', 'LAST_OP', 'ORACLE')
EXPORT_MAX_LEN = 8


@dataclass(frozen=True)
class CosineReport:
    avg: float
    next: float
    examples: int
    skipped_pairs: int


def prediction_vector(trace):
    """h_o for O, h_p for P, h_o + h_p for the combined variants."""
    return trace.h.reshape(-1)


def cosine_analysis(params, hp, fixed_examples):
    """
    Mean cosine similarity between each example's prediction and every real
    item embedding, and between the prediction and the target's embedding.
    Pairs where either vector has zero norm are skipped and counted.
    """
    if not hp.is_learned:
        raise FlagError("cosine analysis needs a learned variant")

    items = params.V[1:]
    item_norms = np.linalg.norm(items, axis=1)
    usable = item_norms > 0.0
    skipped = 0
    all_sims, next_sims = [], []

    for fixed in fixed_examples:
        target = fixed.target if hp.variant == 'ORACLE' else None
        prediction = prediction_vector(forward(fixed, params, hp, target=target))
        norm = float(np.linalg.norm(prediction))
        if norm == 0.0:
            skipped += items.shape[0] + 1
            continue

        sims = (items[usable] @ prediction) / (item_norms[usable] * norm)
        skipped += int(np.count_nonzero(~usable))
        if sims.size:
            all_sims.append(float(sims.mean()))

        if usable[fixed.target - 1]:
            target_vector = items[fixed.target - 1]
            next_sims.append(float(target_vector @ prediction / (item_norms[fixed.target - 1] * norm)))
        else:
            skipped += 1

    if skipped:
        logger.warning(f"Cosine analysis skipped {skipped} zero-norm pairs")
    return CosineReport(
        avg=float(np.mean(all_sims)) if all_sims else 0.0,
        next=float(np.mean(next_sims)) if next_sims else 0.0,
        examples=len(fixed_examples),
        skipped_pairs=skipped,
    )


def attention_columns(max_len=EXPORT_MAX_LEN):
    return ['length'] + [f'pos_{i}' for i in range(1, max_len + 1)]


def attention_trace_export(params, hp, examples, max_len=EXPORT_MAX_LEN):
    """
    Mean position-sensitive attention by session length. Row l averages the
    weights on the last l window slots of every test prefix with exactly l
    items; longer prefixes, truncated or not, are left out. Columns beyond l
    stay empty. Rows sum to 1 when pads are masked.
    """
    if hp.variant not in ATTENTION_VARIANTS:
        raise FlagError(f"variant {hp.variant} has no position-sensitive attention to export")

    limit = min(max_len, hp.n)
    sums = {length: np.zeros(length) for length in range(1, limit + 1)}
    counts = dict.fromkeys(sums, 0)
    for example in examples:
        length = len(example.input)
        if length > limit:
            continue
        fixed = to_fixed(example, hp.n)
        target = fixed.target if hp.variant == 'ORACLE' else None
        alpha = forward(fixed, params, hp, target=target).alpha.reshape(-1)
        sums[length] += alpha[-length:]
        counts[length] += 1

    rows = []
    for length in range(1, max_len + 1):
        row = {'length': length}
        if counts.get(length):
            for position, value in enumerate(sums[length] / counts[length], start=1):
                row[f'pos_{position}'] = value
        rows.append(row)

    logger.info(
        f"Exported attention for {sum(counts.values())} prefixes across "
        f"{sum(1 for c in counts.values() if c)} lengths"
    )
    return pd.DataFrame(rows, columns=attention_columns(max_len))
