"""
Mini-batch training of the learned variants.

The objective is the summed negative log-likelihood of each target, and
each mini-batch also sums (not averages) its per-example gradients before a
single Adam step. Examples are reshuffled every epoch from one seeded
generator, so equal seeds give identical trajectories.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import EmptyCorpusError, FlagError, NumericalError
from corpus.sessions import to_fixed
from evaluation.metrics import evaluate_model
from numerics.optim import AdamState, adam_step
from recommender.checkpoint import save_checkpoint
from recommender.network import example_gradients
from recommender.params import init_params

logger = logging.getLogger(__name__)

VALIDATION_CUTOFF = 20


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    checkpoint: str = None
    best_checkpoint: str = None
    best_validation_recall: float = None
    best_epoch: int = None
    validation_recalls: list = field(default_factory=list)
    params: object = None

    @property
    def epochs(self):
        return len(self.epoch_losses)


def batch_gradients(params, hp, batch, pool=None):
    """
    Summed loss and gradients of a batch. Per-example passes may run on a
    pool; the reduction always follows batch order.
    """
    if pool is not None and len(batch) > 1:
        results = list(pool.map(lambda fixed: example_gradients(fixed, params, hp), batch))
    else:
        results = [example_gradients(fixed, params, hp) for fixed in batch]

    total_loss = 0.0
    total = None
    for value, grads in results:
        total_loss += value
        if total is None:
            total = {name: grad.copy() for name, grad in grads.items()}
        else:
            for name, grad in grads.items():
                total[name] += grad
    return total_loss, total


def train(corpus, config, validation=None, initial_params=None):
    """
    Fit config.hp on corpus.train. With a validation corpus (or
    config.validate, which holds out the last 20% of training sessions),
    recall@20 on the validation test side is measured after every epoch and
    the best epoch's parameters are written next to the checkpoint with a
    '.best' suffix.
    """
    hp = config.hp
    if not hp.is_learned:
        raise FlagError(f"variant {hp.variant} has nothing to train")
    if not corpus.train:
        raise EmptyCorpusError("no training examples")
    if config.validate and validation is None:
        corpus = validation = corpus.validation_split(threads=config.threads)

    examples = [to_fixed(example, hp.n) for example in corpus.train]
    validation_examples = (
        [to_fixed(example, hp.n) for example in validation.test] if validation is not None else None
    )
    params = initial_params.copy() if initial_params is not None else init_params(corpus.m, hp)
    state = AdamState(lr=hp.lr)
    rng = np.random.default_rng(config.shuffle_seed)
    report = TrainReport(checkpoint=config.checkpoint_path)
    named = params.as_dict()

    logger.info(
        f"Training {hp.variant} on {len(examples)} examples: d={hp.d} n={hp.n} b={hp.b} "
        f"lr={hp.lr} batch={hp.batch_size} epochs={hp.epochs}"
    )
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    step = 0
    try:
        for epoch in range(1, hp.epochs + 1):
            started = time.perf_counter()
            order = rng.permutation(len(examples))
            epoch_loss = 0.0
            for start in range(0, len(order), hp.batch_size):
                batch = [examples[i] for i in order[start:start + hp.batch_size]]
                batch_loss, grads = batch_gradients(params, hp, batch, pool)
                if not math.isfinite(batch_loss):
                    logger.error(f"Non-finite loss at epoch {epoch}, step {step + 1}; stopping")
                    raise NumericalError(f"training loss became non-finite at epoch {epoch}")
                adam_step(state, named, grads)
                params.zero_padding_row()
                epoch_loss += batch_loss
                step += 1
                if step % config.log_every == 0:
                    logger.info(f"epoch {epoch} step {step}: batch loss {batch_loss / len(batch):.6f}")

            report.epoch_losses.append(epoch_loss / len(examples))
            report.epoch_seconds.append(time.perf_counter() - started)
            logger.info(
                f"epoch {epoch}/{hp.epochs}: mean loss {report.epoch_losses[-1]:.6f} "
                f"({report.epoch_seconds[-1]:.2f}s)"
            )

            if config.checkpoint_path:
                save_checkpoint(config.checkpoint_path, params, hp)

            if validation_examples:
                recall = evaluate_model(params, hp, validation_examples, (VALIDATION_CUTOFF,)).mean(
                    'recall', VALIDATION_CUTOFF
                )
                report.validation_recalls.append(recall)
                if report.best_validation_recall is None or recall > report.best_validation_recall:
                    report.best_validation_recall = recall
                    report.best_epoch = epoch
                    if config.checkpoint_path:
                        report.best_checkpoint = f"{config.checkpoint_path}.best"
                        save_checkpoint(report.best_checkpoint, params, hp)
                logger.info(f"epoch {epoch}: validation recall@{VALIDATION_CUTOFF} {recall:.4f}")
    finally:
        if pool is not None:
            pool.shutdown()

    report.params = params
    return report
