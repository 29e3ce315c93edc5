"""
On-disk layout of a prepared corpus directory:

    vocab.tsv         item_id <TAB> token
    train.sessions    one ItemId session per line
    test.sessions
    train.examples    augmented prefix <TAB> target
    test.examples
    stats.tsv         dataset statistics (one row)
"""
import logging
from pathlib import Path

import pandas as pd

from core.exceptions import FormatError, StorageError
from .sessions import Corpus, Session, Vocab, parse_sessions

logger = logging.getLogger(__name__)

STATS_COLUMNS = [
    'items', 'train_sessions', 'test_sessions', 'avg_length',
    'aug_train', 'aug_test', 'aug_avg_length',
]


def _write_lines(path, lines):
    path.write_text(''.join(f"{line}\n" for line in lines), encoding='utf-8')


def write_corpus(corpus, out_dir):
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        vocab = pd.DataFrame({
            'item_id': range(1, corpus.m + 1),
            'token': corpus.vocab.tokens(),
        })
        vocab.to_csv(out_dir / 'vocab.tsv', sep='\t', index=False, lineterminator='\n')
        for side in ('train', 'test'):
            sessions = getattr(corpus, f'{side}_sessions')
            examples = getattr(corpus, side)
            _write_lines(out_dir / f'{side}.sessions', (' '.join(map(str, s.items)) for s in sessions))
            _write_lines(
                out_dir / f'{side}.examples',
                (f"{' '.join(map(str, e.input))}\t{e.target}" for e in examples),
            )
        stats = pd.DataFrame([corpus.stats()], columns=STATS_COLUMNS)
        stats.to_csv(out_dir / 'stats.tsv', sep='\t', index=False, float_format='%.4f', lineterminator='\n')
    except OSError as exc:
        raise StorageError(f"cannot write corpus to {out_dir}: {exc}") from exc

    logger.info(f"Wrote corpus with {corpus.m} items to {out_dir}")
    return out_dir


def _read_id_sessions(path):
    sessions = []
    for session in parse_sessions(path):
        try:
            sessions.append(Session(tuple(int(token) for token in session.items)))
        except ValueError as exc:
            raise FormatError(f"{path}: non-integer ItemId ({exc})") from exc
    return sessions


def load_corpus(corpus_dir, threads=1):
    corpus_dir = Path(corpus_dir)
    if not (corpus_dir / 'vocab.tsv').exists():
        raise StorageError(f"{corpus_dir} is not a prepared corpus (vocab.tsv missing)")

    try:
        vocab_frame = pd.read_csv(corpus_dir / 'vocab.tsv', sep='\t', dtype={'token': str}, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise StorageError(f"cannot read vocabulary in {corpus_dir}: {exc}") from exc
    expected = list(range(1, len(vocab_frame) + 1))
    if vocab_frame['item_id'].tolist() != expected:
        raise FormatError(f"{corpus_dir}/vocab.tsv: item ids are not dense 1..m")
    vocab = Vocab(vocab_frame['token'].tolist())

    train = _read_id_sessions(corpus_dir / 'train.sessions')
    test = _read_id_sessions(corpus_dir / 'test.sessions')
    return Corpus.build(len(vocab), vocab, train, test, threads)
