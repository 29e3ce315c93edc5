import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from core.exceptions import EmptyCorpusError, FormatError, StorageError
from .models import CorpusSnapshot
from .sessions import (
    Corpus,
    Example,
    Session,
    augment,
    augment_all,
    filter_and_index,
    filter_sessions,
    parse_sessions,
    split_holdout,
    to_fixed,
)
from .storage import STATS_COLUMNS, load_corpus, write_corpus
from .synthetic import copy_target_sessions, penultimate_successor_sessions, synthetic_corpus, transition_sessions


def raw(*lines):
    return [Session(tuple(line.split())) for line in lines]


class WorkspaceMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()
        super().tearDown()

    def write(self, name, text):
        path = self.root / name
        path.write_text(text, encoding='utf-8')
        return path


class ParseSessionsTests(WorkspaceMixin, SimpleTestCase):

    def test_tokens_keep_file_order(self):
        path = self.write('s.txt', '# header\na b c\n\nx\nb a\n')
        sessions = parse_sessions(path)
        self.assertEqual([s.items for s in sessions], [('a', 'b', 'c'), ('x',), ('b', 'a')])

    def test_empty_file(self):
        self.assertEqual(parse_sessions(self.write('empty.txt', '')), [])

    def test_comma_format_rejects_empty_tokens(self):
        with self.assertRaises(FormatError):
            parse_sessions(self.write('s.csv', 'a,,b\n'), format='comma')

    def test_unreadable_file(self):
        with self.assertRaises(StorageError):
            parse_sessions(self.root / 'missing.txt')


class FilterTests(SimpleTestCase):

    def test_threshold_boundary_keeps_items_seen_five_times(self):
        sessions, vocab, m = filter_and_index(raw(*['a b'] * 5))
        self.assertEqual(m, 2)
        self.assertEqual(len(sessions), 5)
        self.assertEqual(sessions[0].items, (1, 2))

    def test_cascade_ends_in_an_empty_corpus(self):
        with self.assertRaises(EmptyCorpusError):
            filter_and_index(raw('a b', 'c'))

    def test_count_one_filters_length_only(self):
        sessions, _, m = filter_and_index(raw('a b', 'c', 'd e f'), min_item_count=1)
        self.assertEqual([s.items for s in sessions], [(1, 2), (3, 4, 5)])
        self.assertEqual(m, 5)

    def test_result_is_a_fixed_point(self):
        lines = ['a b c', 'a b', 'c d', 'a b c d', 'a c', 'b d', 'e a', 'a b d', 'c b', 'd a b']
        kept = filter_sessions(raw(*lines), min_item_count=4)
        counts = {}
        for _, items in kept:
            self.assertGreaterEqual(len(items), 2)
            for item in items:
                counts[item] = counts.get(item, 0) + 1
        self.assertTrue(all(count >= 4 for count in counts.values()))
        self.assertNotIn('e', counts)

    def test_vocab_round_trips(self):
        _, vocab, m = filter_and_index(raw(*['x y z'] * 5))
        for item_id in range(1, m + 1):
            self.assertEqual(vocab.id_of(vocab.token_of(item_id)), item_id)

    def test_invalid_thresholds(self):
        with self.assertRaises(ValueError):
            filter_sessions([], min_session_len=1)


class AugmentTests(SimpleTestCase):

    def test_every_prefix_predicts_its_successor(self):
        self.assertEqual(augment(Session((1, 2, 3, 4))), [
            Example((1,), 2), Example((1, 2), 3), Example((1, 2, 3), 4),
        ])

    def test_minimal_session(self):
        self.assertEqual(augment(Session((5, 9))), [Example((5,), 9)])

    def test_single_item_session_is_rejected(self):
        with self.assertRaises(ValueError):
            augment(Session((5,)))

    def test_example_count_identity(self):
        sessions = transition_sessions(num_items=20, num_sessions=40, length=5) + [Session((1, 2))]
        total_length = sum(s.length for s in sessions)
        self.assertEqual(len(augment_all(sessions, threads=4)), total_length - len(sessions))
        self.assertEqual(augment_all(sessions, threads=4), augment_all(sessions, threads=1))


class FixedLengthTests(SimpleTestCase):

    def test_left_padding(self):
        fixed = to_fixed(Example((7, 8), 1), 5)
        self.assertEqual(fixed.slots, (0, 0, 0, 7, 8))
        self.assertEqual(fixed.pad_count, 3)

    def test_exact_fit(self):
        fixed = to_fixed(Example((1, 2, 3), 4), 3)
        self.assertEqual((fixed.slots, fixed.pad_count), ((1, 2, 3), 0))

    def test_truncates_to_the_last_items(self):
        self.assertEqual(to_fixed(Example((1, 2, 3, 4, 5, 6), 7), 4).slots, (3, 4, 5, 6))

    def test_decode_then_encode_is_idempotent(self):
        for example in augment(Session((3, 1, 4, 1, 5, 9, 2))):
            for n in (1, 3, 10):
                fixed = to_fixed(example, n)
                self.assertEqual(to_fixed(Example(fixed.decode(), fixed.target), n), fixed)


class HoldoutTests(SimpleTestCase):

    def test_last_fifth_is_held_out(self):
        train, test = split_holdout(list(range(10)), fraction=0.2)
        self.assertEqual((train, test), (list(range(8)), [8, 9]))

    def test_ceiling(self):
        train, test = split_holdout(list(range(5)), fraction=0.2)
        self.assertEqual((len(train), len(test)), (4, 1))

    def test_empty_side_is_an_error(self):
        with self.assertRaises(ValueError):
            split_holdout(list(range(3)), fraction=0.9)
        with self.assertRaises(ValueError):
            split_holdout(list(range(3)), cut=0)


class StorageTests(WorkspaceMixin, SimpleTestCase):

    def test_written_corpus_loads_back(self):
        corpus = synthetic_corpus('transition', 12, 20, 5, length=4)
        write_corpus(corpus, self.root / 'c')
        loaded = load_corpus(self.root / 'c')
        self.assertEqual(loaded.m, 12)
        self.assertEqual(loaded.train, corpus.train)
        self.assertEqual(loaded.test, corpus.test)
        self.assertEqual(loaded.vocab.tokens(), corpus.vocab.tokens())

    def test_not_a_corpus(self):
        with self.assertRaises(StorageError):
            load_corpus(self.root)

    def test_stats(self):
        corpus = Corpus.build(4, None, [Session((1, 2, 3)), Session((2, 4))], [Session((1, 4))])
        stats = corpus.stats()
        self.assertEqual(list(stats), STATS_COLUMNS)
        self.assertEqual((stats['aug_train'], stats['aug_test']), (3, 1))
        self.assertAlmostEqual(stats['avg_length'], 7 / 3)
        self.assertAlmostEqual(stats['aug_avg_length'], (2 + 3 + 2 + 2) / 4)


class SyntheticTests(SimpleTestCase):

    def test_transitions_are_deterministic(self):
        successors = {}
        for session in transition_sessions(num_items=10, num_sessions=50, length=6, seed=1):
            for a, b in zip(session.items, session.items[1:]):
                self.assertEqual(successors.setdefault(a, b), b)

    def test_copy_target_repeats_an_earlier_item(self):
        for session in copy_target_sessions(num_items=30, num_sessions=50, length=6):
            self.assertEqual(len(set(session.items[:-1])), 5)
            self.assertIn(session.items[-1], session.items[:-1])

    def test_penultimate_successor(self):
        successors = {}
        for session in penultimate_successor_sessions(num_items=40, num_sessions=100, length=5):
            key = session.items[-3]
            self.assertEqual(successors.setdefault(key, session.items[-1]), session.items[-1])
            self.assertGreater(session.items[-1], 20)

    def test_same_seed_same_corpus(self):
        self.assertEqual(transition_sessions(seed=4), transition_sessions(seed=4))


class PrepareCommandTests(WorkspaceMixin, TestCase):

    def call(self, *args):
        out = StringIO()
        call_command('prepare', *args, stdout=out)
        return out.getvalue()

    def test_tiny_fixture_reports_every_statistic(self):
        source = self.write('s.txt', 'a b c\na b\nb c a\nc a b\na c\n')
        output = self.call('--input', str(source), '--holdout', '0.2', '--min-item-count', '1',
                           '--out', str(self.root / 'c'))
        self.assertIn('\t'.join(STATS_COLUMNS), output)
        stats = (self.root / 'c' / 'stats.tsv').read_text().splitlines()
        self.assertEqual(stats[0].split('\t'), STATS_COLUMNS)
        self.assertEqual(stats[1].split('\t')[:3], ['3', '4', '1'])
        self.assertEqual(CorpusSnapshot.objects.get().items, 3)

    def test_holdout_splits_sessions_before_augmentation(self):
        source = self.write('s.txt', ''.join(f"a b c\n" for _ in range(10)))
        self.call('--input', str(source), '--holdout', '0.2', '--out', str(self.root / 'c'))
        corpus = load_corpus(self.root / 'c')
        self.assertEqual((len(corpus.train_sessions), len(corpus.test_sessions)), (8, 2))
        self.assertEqual((len(corpus.train), len(corpus.test)), (16, 4))

    def test_rerun_is_byte_identical(self):
        source = self.write('s.txt', 'a b c\nb c\nc a b\na b\nc b a\nb a\n')
        args = ['--input', str(source), '--holdout', '0.3', '--min-item-count', '2']
        self.call(*args, '--out', str(self.root / 'one'))
        self.call(*args, '--out', str(self.root / 'two'))
        for name in ('vocab.tsv', 'train.examples', 'test.examples', 'stats.tsv'):
            self.assertEqual((self.root / 'one' / name).read_bytes(), (self.root / 'two' / name).read_bytes())

    def test_separate_test_file(self):
        train = self.write('train.txt', 'a b\nb a\n')
        test = self.write('test.txt', 'a b a\n')
        self.call('--input', str(train), '--test', str(test), '--min-item-count', '1', '--out', str(self.root / 'c'))
        corpus = load_corpus(self.root / 'c')
        self.assertEqual((len(corpus.train_sessions), len(corpus.test_sessions)), (2, 1))

    def test_empty_corpus_exits_with_format_code(self):
        source = self.write('s.txt', 'a b\nc\n')
        with self.assertRaises(CommandError) as caught:
            self.call('--input', str(source), '--holdout', '0.2', '--out', str(self.root / 'c'))
        self.assertEqual(caught.exception.returncode, 4)

    def test_flags_are_checked_before_files(self):
        with self.assertRaises(CommandError) as caught:
            self.call('--input', str(self.root / 'missing.txt'), '--out', str(self.root / 'c'))
        self.assertEqual(caught.exception.returncode, 2)

    def test_missing_input_exits_with_io_code(self):
        with self.assertRaises(CommandError) as caught:
            self.call('--input', str(self.root / 'missing.txt'), '--holdout', '0.2', '--out', str(self.root / 'c'))
        self.assertEqual(caught.exception.returncode, 3)

    def test_synthetic_corpus(self):
        self.call('--synthetic', 'transition', '--synthetic-items', '10', '--synthetic-sessions', '30',
                  '--out', str(self.root / 'c'))
        self.assertTrue((self.root / 'c' / 'synthetic.sessions').exists())
        corpus = load_corpus(self.root / 'c')
        self.assertEqual(len(corpus.test_sessions), 6)
