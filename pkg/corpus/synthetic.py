"""
Synthetic session corpora with known structure, used to check that the
models pick up order, recency and prospective-preference signals.
Sessions use ItemIds 1..num_items directly.
"""
import numpy as np

from .sessions import Corpus, Example, Session, Vocab


def transition_sessions(num_items=50, num_sessions=500, length=6, seed=0):
    """Each item is always followed by the same successor (a fixed permutation)."""
    rng = np.random.default_rng(seed)
    successor = rng.permutation(num_items) + 1
    sessions = []
    for _ in range(num_sessions):
        item = int(rng.integers(1, num_items + 1))
        items = [item]
        for _ in range(length - 1):
            item = int(successor[item - 1])
            items.append(item)
        sessions.append(Session(tuple(items)))
    return sessions


def copy_target_sessions(num_items=30, num_sessions=300, length=6, seed=0):
    """Distinct items; the last item repeats one earlier item chosen uniformly."""
    rng = np.random.default_rng(seed)
    sessions = []
    for _ in range(num_sessions):
        inputs = rng.choice(num_items, size=length - 1, replace=False) + 1
        target = inputs[rng.integers(0, length - 1)]
        sessions.append(Session(tuple(int(i) for i in inputs) + (int(target),)))
    return sessions


def penultimate_successor_sessions(num_items=40, num_sessions=400, length=5, seed=0):
    """
    Inputs are distinct items from the first half of the vocabulary; the
    target is the fixed successor (in the second half) of the second-to-last
    input item, so only the order of the inputs determines the answer.
    """
    rng = np.random.default_rng(seed)
    half = num_items // 2
    successor = rng.permutation(half) + half + 1
    sessions = []
    for _ in range(num_sessions):
        inputs = rng.choice(half, size=length - 1, replace=False) + 1
        target = successor[inputs[-2] - 1]
        sessions.append(Session(tuple(int(i) for i in inputs) + (int(target),)))
    return sessions


GENERATORS = {
    'transition': transition_sessions,
    'copy': copy_target_sessions,
    'penultimate': penultimate_successor_sessions,
}


def final_examples(sessions):
    """One example per session: the whole prefix predicting the last item."""
    return [Example(tuple(s.items[:-1]), s.items[-1]) for s in sessions]


def synthetic_corpus(kind, num_items, train_sessions, test_sessions, length, seed=0, augmented=True):
    """
    A ready Corpus from one generator. With augmented=False only the final
    prefix of each session is used, which keeps the generator's rule exact.
    """
    sessions = GENERATORS[kind](num_items, train_sessions + test_sessions, length, seed)
    train, test = sessions[:train_sessions], sessions[train_sessions:]
    vocab = Vocab(str(item) for item in range(1, num_items + 1))
    if augmented:
        return Corpus.build(num_items, vocab, train, test)
    return Corpus(num_items, vocab, train, test, final_examples(train), final_examples(test))
