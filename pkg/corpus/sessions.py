"""
Session ingestion and the preprocessing protocol: parse, filter to a fixed
point, index items densely, split by session order, augment into prefixes
and cut each prefix to a fixed left-padded window.

ItemIds are dense integers 1..m; 0 is reserved for padding and never
appears in a session.
"""
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from core.exceptions import EmptyCorpusError, FormatError, StorageError

logger = logging.getLogger(__name__)

PAD = 0

SESSION_FORMATS = {
    'whitespace': None,
    'comma': ',',
    'tab': '\t',
}


@dataclass(frozen=True)
class Session:
    items: tuple

    @property
    def length(self):
        return len(self.items)


@dataclass(frozen=True)
class Example:
    input: tuple
    target: int


@dataclass(frozen=True)
class FixedExample:
    slots: tuple
    pad_count: int
    target: int

    @property
    def n(self):
        return len(self.slots)

    def decode(self):
        """The input items without the leading padding."""
        return self.slots[self.pad_count:]


class Vocab:
    """Bijection between raw item tokens and ItemIds 1..m."""

    def __init__(self, tokens=()):
        self._tokens = [None]
        self._ids = {}
        for token in tokens:
            self.add(token)

    def add(self, token):
        if token not in self._ids:
            self._ids[token] = len(self._tokens)
            self._tokens.append(token)
        return self._ids[token]

    def id_of(self, token):
        return self._ids[token]

    def token_of(self, item_id):
        if not 1 <= item_id < len(self._tokens):
            raise KeyError(item_id)
        return self._tokens[item_id]

    def tokens(self):
        return list(self._tokens[1:])

    def __len__(self):
        return len(self._tokens) - 1

    def __contains__(self, token):
        return token in self._ids


@dataclass
class Corpus:
    m: int
    vocab: Vocab
    train_sessions: list
    test_sessions: list
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)

    @classmethod
    def build(cls, m, vocab, train_sessions, test_sessions, threads=1):
        corpus = cls(m, vocab, list(train_sessions), list(test_sessions))
        corpus.train = augment_all(corpus.train_sessions, threads)
        corpus.test = augment_all(corpus.test_sessions, threads)
        corpus.check()
        return corpus

    def check(self):
        for example in self.train + self.test:
            for item in example.input + (example.target,):
                if not 1 <= item <= self.m:
                    raise FormatError(f"ItemId {item} outside 1..{self.m}")

    def validation_split(self, fraction=0.2, threads=1):
        """
        Tuning corpus: the first 80% of training sessions train, the last
        20% of training sessions are held out for validation.
        """
        fit, held_out = split_holdout(self.train_sessions, fraction)
        return Corpus.build(self.m, self.vocab, fit, held_out, threads)

    def stats(self):
        sessions = self.train_sessions + self.test_sessions
        examples = self.train + self.test
        return {
            'items': self.m,
            'train_sessions': len(self.train_sessions),
            'test_sessions': len(self.test_sessions),
            'avg_length': _mean(s.length for s in sessions),
            'aug_train': len(self.train),
            'aug_test': len(self.test),
            'aug_avg_length': _mean(len(e.input) + 1 for e in examples),
        }


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def parse_sessions(path, format='whitespace'):
    """
    Read one session per line, tokens in chronological order.
    Lines starting with '#' are ignored; lines without tokens are skipped
    and counted.
    """
    if format not in SESSION_FORMATS:
        raise FormatError(f"unknown session format '{format}'")
    separator = SESSION_FORMATS[format]

    try:
        text = Path(path).read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as exc:
        raise StorageError(f"cannot read session file {path}: {exc}") from exc

    sessions = []
    skipped = 0
    for line_number, line in enumerate(text.splitlines(), start=1):
        if line.startswith('#'):
            continue
        stripped = line.strip()
        if not stripped:
            skipped += 1
            continue
        if separator is None:
            tokens = stripped.split()
        else:
            tokens = [token.strip() for token in stripped.split(separator)]
            if any(token == '' for token in tokens):
                raise FormatError(f"{path}:{line_number}: empty item token")
        sessions.append(Session(tuple(tokens)))

    if skipped:
        logger.warning(f"{path}: skipped {skipped} line(s) with no tokens")
    logger.info(f"Parsed {len(sessions)} sessions from {path}")
    return sessions


def filter_sessions(raw_sessions, min_item_count=5, min_session_len=2):
    """
    Indices of the sessions that survive, together with their surviving items.

    Rare items are dropped and short sessions removed, repeatedly, until
    neither rule removes anything.
    """
    if min_item_count < 1:
        raise ValueError("min_item_count must be at least 1")
    if min_session_len < 2:
        raise ValueError("min_session_len must be at least 2")

    alive = {index: session.items for index, session in enumerate(raw_sessions)}
    rounds = 0
    while True:
        rounds += 1
        counts = Counter(item for items in alive.values() for item in items)
        changed = False
        survivors = {}
        for index, items in alive.items():
            kept = tuple(item for item in items if counts[item] >= min_item_count)
            if len(kept) != len(items):
                changed = True
            if len(kept) >= min_session_len:
                survivors[index] = kept
            else:
                changed = True
        alive = survivors
        if not changed:
            break

    logger.info(
        f"Filtering kept {len(alive)} of {len(raw_sessions)} sessions after {rounds} round(s)"
    )
    return [(index, alive[index]) for index in sorted(alive)]


def index_sessions(filtered, vocab=None):
    """Map raw tokens to ItemIds in first-appearance order."""
    vocab = vocab if vocab is not None else Vocab()
    sessions = [Session(tuple(vocab.add(token) for token in items)) for _, items in filtered]
    return sessions, vocab


def filter_and_index(raw_sessions, min_item_count=5, min_session_len=2):
    filtered = filter_sessions(raw_sessions, min_item_count, min_session_len)
    if not filtered:
        raise EmptyCorpusError("empty corpus: every session was removed by filtering")
    sessions, vocab = index_sessions(filtered)
    return sessions, vocab, len(vocab)


def augment(session):
    """Every prefix of length >= 1 paired with the item that follows it."""
    items = tuple(session.items)
    if len(items) < 2:
        raise ValueError("augment needs a session of length 2 or more")
    return [Example(items[:k - 1], items[k - 1]) for k in range(2, len(items) + 1)]


def augment_all(sessions, threads=1):
    """Augment many sessions; output order follows input order."""
    if threads > 1 and len(sessions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(augment, sessions))
    else:
        chunks = [augment(session) for session in sessions]
    return [example for chunk in chunks for example in chunk]


def to_fixed(example, n):
    """Keep the last n input items and left-pad with 0 up to length n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not example.input:
        raise ValueError("example input is empty")
    kept = tuple(example.input[-n:])
    pad_count = n - len(kept)
    return FixedExample((PAD,) * pad_count + kept, pad_count, example.target)


def split_holdout(sessions, fraction=None, cut=None):
    """
    Order-preserving split. With a fraction, the last ceil(fraction * S)
    sessions become the test side; with a cut index, sessions[cut:] do.
    """
    sessions = list(sessions)
    total = len(sessions)
    if (fraction is None) == (cut is None):
        raise ValueError("give exactly one of fraction or cut")
    if fraction is not None:
        if not 0 < fraction < 1:
            raise ValueError("holdout fraction must lie strictly between 0 and 1")
        test_size = math.ceil(fraction * total - 1e-9)
        cut = total - test_size
    if not 0 < cut < total:
        raise ValueError(f"split leaves one side empty ({cut} train / {total - cut} test)")
    return sessions[:cut], sessions[cut:]
