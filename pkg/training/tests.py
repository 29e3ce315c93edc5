import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from core.exceptions import FlagError, SessrecError, StorageError
from corpus.sessions import Corpus, Example, Session, Vocab, to_fixed
from corpus.storage import write_corpus
from corpus.synthetic import synthetic_corpus
from recommender.checkpoint import load_checkpoint
from recommender.hyperparams import HyperParams
from recommender.network import example_gradients
from recommender.params import init_params
from .config import INITIAL_GRID, TrainConfig, build_train_config, read_config_file
from .forms import HyperParamsForm, TrainConfigForm
from .grid import boundary_warnings, grid_points, grid_search, point_hyperparams, sweep_n
from .models import GridSearch, TrainingRun
from .trainer import batch_gradients, train


def single_example_corpus():
    vocab = Vocab(['a', 'b', 'c', 'd', 'e'])
    session = Session((1, 2, 3))
    return Corpus(5, vocab, [session], [session], [Example((1, 2), 3)], [Example((1, 2), 3)])


def small_transition_corpus(num_items=10, sessions=60):
    return synthetic_corpus('transition', num_items, sessions, sessions // 4, length=5, seed=0)


class WorkspaceMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()
        super().tearDown()


class ConfigTests(WorkspaceMixin, SimpleTestCase):

    def write_config(self, text):
        path = self.root / 'train.cfg'
        path.write_text(text, encoding='utf-8')
        return path

    def test_file_values_and_comments(self):
        path = self.write_config('# model\nd = 32\nvariant = last  # recency\nlr=0.01\n\n')
        self.assertEqual(read_config_file(path), {'d': '32', 'variant': 'last', 'lr': '0.01'})
        config = build_train_config(path, environ={})
        self.assertEqual((config.hp.d, config.hp.variant, config.hp.lr), (32, 'LAST_OP', 0.01))

    def test_environment_beats_file_and_flags_beat_environment(self):
        path = self.write_config('d=32\nn=15\nb=2\n')
        environ = {'SESSREC_N': '20', 'SESSREC_B': '4'}
        config = build_train_config(path, overrides={'b': 8}, environ=environ)
        self.assertEqual((config.hp.d, config.hp.n, config.hp.b), (32, 20, 8))

    def test_defaults(self):
        config = build_train_config(environ={})
        self.assertEqual(config.hp, HyperParams())
        self.assertEqual((config.hp.batch_size, config.hp.epochs, config.hp.lr), (128, 30, 1e-3))
        self.assertEqual(config.shuffle_seed, 0)

    def test_unknown_key(self):
        with self.assertRaises(FlagError):
            read_config_file(self.write_config('depth=3\n'))

    def test_missing_file(self):
        with self.assertRaises(StorageError):
            read_config_file(self.root / 'none.cfg')

    def test_lists_only_for_grid(self):
        path = self.write_config('d=32,64\n')
        with self.assertRaises(FlagError):
            build_train_config(path, environ={})
        config = build_train_config(path, environ={}, allow_grid=True)
        self.assertEqual(config.grid, {'d': ['32', '64']})

    def test_invalid_values_are_flag_errors(self):
        cases = (
            {'epochs': 0},
            {'variant': 'rnn'},
            {'d': 10, 'b': 4},
            {'attention_scale_mode': 'diagonal'},
        )
        for overrides in cases:
            with self.subTest(overrides=overrides), self.assertRaises(FlagError):
                build_train_config(overrides=overrides, environ={})


class FormTests(SimpleTestCase):

    def test_booleans_accept_text(self):
        form = TrainConfigForm({'use_pad_mask': 'off', 'use_position_embeddings': 'Yes', 'validate': '1'})
        self.assertTrue(form.is_valid(), form.errors)
        hp = form.hyperparams()
        self.assertFalse(hp.use_pad_mask)
        self.assertTrue(hp.use_position_embeddings)

    def test_scale_spelling(self):
        form = HyperParamsForm({'attention_scale_mode': 'per-head'})
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.hyperparams().attention_scale_mode, 'per_head')

    def test_indivisible_heads(self):
        self.assertFalse(HyperParamsForm({'d': '10', 'b': '3'}).is_valid())


class TrainerTests(WorkspaceMixin, SimpleTestCase):

    def test_memorises_a_single_example(self):
        hp = HyperParams(d=8, n=3, b=1, variant='O', lr=0.05, epochs=200, batch_size=1)
        report = train(single_example_corpus(), TrainConfig(hp=hp))
        self.assertEqual(report.epochs, 200)
        self.assertLess(report.epoch_losses[-1], 1e-2)

    def test_zero_learning_rate_changes_nothing(self):
        hp = HyperParams(d=8, n=3, b=2, variant='OP', lr=0.0, epochs=3, batch_size=4)
        corpus = small_transition_corpus()
        before = init_params(corpus.m, hp)
        report = train(corpus, TrainConfig(hp=hp))
        for name, array in before.as_dict().items():
            np.testing.assert_array_equal(report.params.as_dict()[name], array)

    def test_same_seed_same_trajectory(self):
        hp = HyperParams(d=8, n=4, b=2, variant='LAST_OP', lr=0.01, epochs=3, batch_size=8, seed=5)
        corpus = small_transition_corpus()
        first = train(corpus, TrainConfig(hp=hp, shuffle_seed=9))
        second = train(corpus, TrainConfig(hp=hp, shuffle_seed=9, threads=3))
        self.assertEqual(first.epoch_losses, second.epoch_losses)
        for name, array in first.params.as_dict().items():
            np.testing.assert_array_equal(second.params.as_dict()[name], array)

    def test_batch_gradient_is_the_sum_of_example_gradients(self):
        hp = HyperParams(d=8, n=4, b=2, variant='OP')
        corpus = small_transition_corpus()
        params = init_params(corpus.m, hp)
        batch = [to_fixed(example, hp.n) for example in corpus.train[:3]]
        total_loss, total = batch_gradients(params, hp, batch)
        expected_loss = 0.0
        expected = {name: np.zeros_like(array) for name, array in params.as_dict().items()}
        for fixed in batch:
            value, grads = example_gradients(fixed, params, hp)
            expected_loss += value
            for name, grad in grads.items():
                expected[name] += grad
        self.assertAlmostEqual(total_loss, expected_loss, places=12)
        for name, grad in total.items():
            np.testing.assert_allclose(grad, expected[name], atol=1e-12)

    def test_padding_row_stays_zero_and_loss_settles(self):
        hp = HyperParams(d=16, n=4, b=1, variant='O', lr=0.01, epochs=10, batch_size=16)
        report = train(small_transition_corpus(), TrainConfig(hp=hp))
        self.assertFalse(report.params.V[0].any())
        for earlier, later in zip(report.epoch_losses[3:], report.epoch_losses[4:]):
            self.assertLessEqual(later, earlier + 1e-3)

    def test_checkpoints_and_best_epoch(self):
        hp = HyperParams(d=8, n=4, b=1, variant='O', lr=0.02, epochs=3, batch_size=16)
        path = self.root / 'model.ckpt'
        report = train(small_transition_corpus(), TrainConfig(hp=hp, checkpoint_path=str(path), validate=True))
        self.assertEqual(len(report.validation_recalls), 3)
        self.assertEqual(report.best_validation_recall, max(report.validation_recalls))
        params, header = load_checkpoint(path)
        self.assertEqual(header.variant, 'O')
        self.assertTrue(Path(f"{path}.best").exists())

    def test_pop_has_nothing_to_train(self):
        with self.assertRaises(FlagError):
            train(small_transition_corpus(), TrainConfig(hp=HyperParams(variant='POP')))


class GridTests(SimpleTestCase):

    def setUp(self):
        self.corpus = synthetic_corpus('transition', 50, 100, 20, length=5, seed=1)
        self.hp = HyperParams(d=16, n=4, b=1, variant='O', epochs=6, batch_size=32, lr=0.05)

    def test_points_follow_listed_order(self):
        points = list(grid_points({'d': ['64', '32'], 'b': ['2', '1']}))
        self.assertEqual(points[0], {'d': '64', 'b': '2'})
        self.assertEqual(points[1], {'d': '64', 'b': '1'})
        self.assertEqual(len(points), 4)

    def test_initial_search_ranges_are_a_valid_grid(self):
        overrides = {name: ','.join(values) for name, values in INITIAL_GRID.items()}
        config = build_train_config(overrides=overrides, environ={}, allow_grid=True)
        points = list(grid_points(config.grid))
        self.assertEqual(len(points), 27)
        for values in points:
            point_hyperparams(config.hp, values)

    def test_singleton_grid(self):
        result = grid_search(self.corpus, TrainConfig(hp=self.hp, grid={'d': ['16']}))
        self.assertEqual(len(result.points), 1)
        self.assertEqual(result.best_hp.d, 16)
        self.assertIsNotNone(result.best.recall)

    def test_learning_beats_zero_learning_rate(self):
        result = grid_search(self.corpus, TrainConfig(hp=self.hp, grid={'lr': ['0', '0.05']}))
        self.assertEqual(result.best_hp.lr, 0.05)
        self.assertGreater(result.points[1].recall, result.points[0].recall)

    def test_failing_points_are_recorded(self):
        result = grid_search(self.corpus, TrainConfig(hp=self.hp, grid={'b': ['3', '1']}))
        self.assertFalse(result.points[0].ok)
        self.assertIn('divisible', result.points[0].error)
        self.assertEqual(result.best_hp.b, 1)

    def test_all_points_failing(self):
        with self.assertRaises(SessrecError):
            grid_search(self.corpus, TrainConfig(hp=self.hp, grid={'b': ['3', '5']}))

    def test_boundary_warnings(self):
        axes = {'d': ['32', '64', '128'], 'n': ['10', '15', '20']}
        warnings = boundary_warnings(axes, {'d': '128', 'n': '15'})
        self.assertEqual(len(warnings), 1)
        self.assertIn('upper boundary', warnings[0])

    def test_sweep_reports_one_row_per_n(self):
        hp = self.hp.with_changes(epochs=1)
        rows = sweep_n(self.corpus, TrainConfig(hp=hp), [1, 3])
        self.assertEqual([row[0] for row in rows], [1, 3])
        for _, recall, mrr, ndcg in rows:
            self.assertGreaterEqual(recall, ndcg)
            self.assertGreaterEqual(ndcg, mrr)


class TrainingCommandTests(WorkspaceMixin, TestCase):

    def setUp(self):
        super().setUp()
        self.corpus_dir = self.root / 'corpus'
        write_corpus(small_transition_corpus(num_items=30, sessions=80), self.corpus_dir)

    def call(self, name, *args):
        out = StringIO()
        call_command(name, *args, stdout=out)
        return out.getvalue()

    def test_train_writes_checkpoint_and_records_the_run(self):
        config = self.root / 'c.cfg'
        config.write_text('d=8\nn=4\nb=2\nepochs=2\nbatch_size=32\nlr=0.01\n', encoding='utf-8')
        checkpoint = self.root / 'op.ckpt'
        output = self.call('train', '--variant', 'op', '--config', str(config), '--corpus', str(self.corpus_dir),
                           '--checkpoint', str(checkpoint), '--no-pad-mask', '--threads', '1')
        self.assertIn('Trained OP for 2 epochs', output)
        _, header = load_checkpoint(checkpoint)
        self.assertEqual((header.d, header.n, header.b, header.use_pad_mask), (8, 4, 2, False))
        run = TrainingRun.objects.get()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(len(run.epoch_losses), 2)

    def test_epoch_log_is_identical_across_runs(self):
        logs = []
        for run in (1, 2):
            log = self.root / f'log{run}.tsv'
            self.call('train', '--variant', 'o', '--d', '8', '--n', '4', '--b', '1', '--epochs', '2',
                      '--batch-size', '32', '--seed', '5', '--corpus', str(self.corpus_dir),
                      '--checkpoint', str(self.root / f'o{run}.ckpt'), '--threads', '1', '--out', str(log))
            logs.append(log.read_bytes())
        self.assertEqual(logs[0], logs[1])
        self.assertEqual(logs[0].decode().splitlines()[0], 'epoch\tloss')

    def test_train_needs_a_checkpoint_path(self):
        with self.assertRaises(CommandError) as caught:
            self.call('train', '--variant', 'o', '--corpus', str(self.corpus_dir))
        self.assertEqual(caught.exception.returncode, 2)

    def test_missing_corpus(self):
        with self.assertRaises(CommandError) as caught:
            self.call('train', '--variant', 'o', '--corpus', str(self.root / 'nope'),
                      '--checkpoint', str(self.root / 'x.ckpt'))
        self.assertEqual(caught.exception.returncode, 3)

    def test_grid_command_writes_table(self):
        out = self.root / 'grid.tsv'
        self.call('grid', '--variant', 'o', '--d', '8,16', '--n', '3', '--epochs', '1', '--batch-size', '32',
                  '--corpus', str(self.corpus_dir), '--out', str(out), '--threads', '1')
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0].split('\t'), ['d', 'recall@20', 'status', 'error'])
        self.assertEqual(len(lines), 3)
        search = GridSearch.objects.get()
        self.assertEqual(search.points.count(), 2)
        self.assertIsNotNone(search.best_recall)

    def test_grid_without_axes(self):
        with self.assertRaises(CommandError) as caught:
            self.call('grid', '--variant', 'o', '--corpus', str(self.corpus_dir), '--out', str(self.root / 'g.tsv'))
        self.assertEqual(caught.exception.returncode, 2)

    def test_sweep_command(self):
        out = self.root / 'sweep.tsv'
        self.call('sweep', '--variant', 'o', '--n-values', '2,4', '--epochs', '1', '--corpus', str(self.corpus_dir),
                  '--out', str(out), '--threads', '1')
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], 'n\trecall@20\tmrr@20\tndcg@20')
        self.assertEqual([line.split('\t')[0] for line in lines[1:]], ['2', '4'])
