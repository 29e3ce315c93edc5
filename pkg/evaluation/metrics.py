"""
Ranking metrics for next-item prediction with exactly one relevant item.

Ranks are 1-based; equal scores are ordered by ascending ItemId. The ideal
DCG is 1, so NDCG@k reduces to 1/log2(rank+1) inside the cutoff.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from recommender.network import forward

logger = logging.getLogger(__name__)

METRICS = ('recall', 'mrr', 'ndcg')
DEFAULT_CUTOFFS = (5, 10, 20)


def rank_of_target(scores, target):
    """1 + items scoring strictly higher + equal-scoring items with a smaller ItemId."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not 1 <= target <= scores.size:
        raise ValueError(f"target {target} outside 1..{scores.size}")
    value = scores[target - 1]
    higher = int(np.count_nonzero(scores > value))
    tied_before = int(np.count_nonzero(scores[:target - 1] == value))
    return 1 + higher + tied_before


def metrics_at_k(rank, k):
    if rank < 1 or k < 1:
        raise ValueError("rank and k must be at least 1")
    if rank > k:
        return 0, 0.0, 0.0
    return 1, 1.0 / rank, 1.0 / math.log2(rank + 1)


def per_example(ranks, metric, k):
    """Vector of one metric at cutoff k for every rank."""
    ranks = np.asarray(ranks, dtype=np.float64)
    hit = ranks <= k
    if metric == 'recall':
        return hit.astype(np.float64)
    if metric == 'mrr':
        return np.where(hit, 1.0 / ranks, 0.0)
    if metric == 'ndcg':
        return np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0)
    raise ValueError(f"unknown metric '{metric}'")


@dataclass
class MetricsReport:
    cutoffs: tuple
    ranks: np.ndarray
    targets: np.ndarray

    @property
    def count(self):
        return int(self.ranks.size)

    def values(self, metric, k):
        return per_example(self.ranks, metric, k)

    def mean(self, metric, k):
        return float(self.values(metric, k).mean()) if self.count else 0.0

    def rows(self):
        """(k, recall, mrr, ndcg) per cutoff."""
        return [
            (k, self.mean('recall', k), self.mean('mrr', k), self.mean('ndcg', k))
            for k in self.cutoffs
        ]


def evaluate_scores(score_fn, examples, cutoffs=DEFAULT_CUTOFFS, threads=1):
    """
    Rank each example's target under score_fn(example) -> 1xm scores.
    Work may be spread over threads; results keep example order.
    """
    def rank(example):
        return rank_of_target(score_fn(example), example.target)

    if threads > 1 and len(examples) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ranks = list(pool.map(rank, examples))
    else:
        ranks = [rank(example) for example in examples]

    return MetricsReport(
        cutoffs=tuple(cutoffs),
        ranks=np.asarray(ranks, dtype=np.int64),
        targets=np.asarray([e.target for e in examples], dtype=np.int64),
    )


def model_scorer(params, hp, m=None):
    """Score function for a trained model; ORACLE is given the label it conditions on."""
    def score_fn(fixed):
        target = fixed.target if hp.variant == 'ORACLE' else None
        return forward(fixed, params, hp, target=target, m=m).scores
    return score_fn


def evaluate_model(params, hp, fixed_examples, cutoffs=DEFAULT_CUTOFFS, threads=1, m=None):
    report = evaluate_scores(model_scorer(params, hp, m), fixed_examples, cutoffs, threads)
    logger.info(
        f"Evaluated {hp.variant} on {report.count} examples: "
        + ', '.join(f"recall@{k}={r:.4f}" for k, r, _, _ in report.rows())
    )
    return report
