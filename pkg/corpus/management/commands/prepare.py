"""
Management Command: prepare
===========================
Turn raw session files into a prepared corpus directory.

Sessions are filtered (rare items, short sessions) until stable, mapped to
dense ItemIds, split chronologically into train and test, augmented into
prefix examples and written together with the dataset statistics.
"""
from pathlib import Path

from core.commands import SessrecCommand, positive_int
from core.exceptions import EmptyCorpusError, FlagError, StorageError
from core.validators import validate_fraction
from corpus.models import CorpusSnapshot
from corpus.sessions import (
    SESSION_FORMATS,
    Corpus,
    Session,
    filter_sessions,
    index_sessions,
    parse_sessions,
    split_holdout,
)
from corpus.storage import STATS_COLUMNS, write_corpus
from corpus.synthetic import GENERATORS


class Command(SessrecCommand):
    help = "Filter, index, split and augment session files into a corpus directory."

    def add_arguments(self, parser):
        parser.add_argument('--input', help='Session file (training sessions, or all sessions with --holdout).')
        parser.add_argument('--test', help='Separate test session file.')
        parser.add_argument('--holdout', type=float, help='Fraction of the last sessions held out for testing.')
        parser.add_argument('--min-item-count', type=positive_int, default=5)
        parser.add_argument('--min-session-len', type=positive_int, default=2)
        parser.add_argument('--format', choices=tuple(SESSION_FORMATS), default='whitespace')
        parser.add_argument('--synthetic', choices=tuple(GENERATORS),
                            help='Generate a synthetic corpus instead of reading --input.')
        parser.add_argument('--synthetic-items', type=positive_int, default=50)
        parser.add_argument('--synthetic-sessions', type=positive_int, default=500)
        parser.add_argument('--synthetic-length', type=positive_int, default=6)
        parser.add_argument('--seed', type=int, default=0)
        self.add_threads_argument(parser)
        self.add_out_argument(parser)

    def check_flags(self, options):
        if options['synthetic']:
            if options['input'] or options['test']:
                raise FlagError('--synthetic replaces --input and --test')
            if options['holdout'] is None:
                options['holdout'] = 0.2
        elif not options['input']:
            raise FlagError('--input is required (or --synthetic)')
        if (options['test'] is None) == (options['holdout'] is None):
            raise FlagError('give exactly one of --test or --holdout')
        if options['holdout'] is not None:
            validate_fraction(options['holdout'])
        if options['min_session_len'] < 2:
            raise FlagError('--min-session-len must be at least 2')
        if options['synthetic'] and options['synthetic_length'] < 3:
            raise FlagError('--synthetic-length must be at least 3')

    def raw_sessions(self, options):
        """(all raw sessions, number of leading sessions that came from the training file or None)."""
        if options['synthetic']:
            generated = GENERATORS[options['synthetic']](
                options['synthetic_items'], options['synthetic_sessions'],
                options['synthetic_length'], options['seed'],
            )
            sessions = [Session(tuple(str(item) for item in s.items)) for s in generated]
            source = Path(options['out']) / 'synthetic.sessions'
            try:
                source.parent.mkdir(parents=True, exist_ok=True)
                source.write_text(''.join(f"{' '.join(s.items)}\n" for s in sessions), encoding='utf-8')
            except OSError as exc:
                raise StorageError(f"cannot write {source}: {exc}") from exc
            self.stdout.write(f"Generated {len(sessions)} '{options['synthetic']}' sessions into {source}")
            return sessions, None, str(source)

        train = parse_sessions(options['input'], options['format'])
        if options['test']:
            test = parse_sessions(options['test'], options['format'])
            return train + test, len(train), f"{options['input']} + {options['test']}"
        return train, None, options['input']

    def run(self, **options):
        self.check_flags(options)
        raw, train_count, source = self.raw_sessions(options)

        filtered = filter_sessions(raw, options['min_item_count'], options['min_session_len'])
        if not filtered:
            raise EmptyCorpusError('empty corpus: every session was removed by filtering')
        sessions, vocab = index_sessions(filtered)
        if train_count is None:
            train, test = split_holdout(sessions, fraction=options['holdout'])
            rule = f"holdout {options['holdout']}"
        else:
            cut = sum(1 for index, _ in filtered if index < train_count)
            train, test = sessions[:cut], sessions[cut:]
            if not train or not test:
                raise EmptyCorpusError(f"filtering left {len(train)} train and {len(test)} test sessions")
            rule = 'separate test file'

        corpus = Corpus.build(len(vocab), vocab, train, test, options['threads'])
        write_corpus(corpus, options['out'])
        stats = corpus.stats()

        self.stdout.write('\t'.join(STATS_COLUMNS))
        self.stdout.write('\t'.join(
            f"{stats[c]:.4f}" if isinstance(stats[c], float) else str(stats[c]) for c in STATS_COLUMNS
        ))
        self.record('corpus snapshot', lambda: CorpusSnapshot.objects.create(
            out_dir=str(options['out']),
            source=source,
            holdout_rule=rule,
            min_item_count=options['min_item_count'],
            min_session_len=options['min_session_len'],
            **stats,
        ))
        self.stdout.write(self.style.SUCCESS(f"Prepared corpus in {options['out']}"))
