import math
import os
import tempfile
import unittest
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from threadpoolctl import threadpool_info

from core.exceptions import FlagError, FormatError
from corpus.sessions import FixedExample, to_fixed
from corpus.storage import write_corpus
from corpus.synthetic import synthetic_corpus
from recommender.hyperparams import HyperParams
from recommender.network import forward
from recommender.params import init_params
from training.config import TrainConfig
from training.trainer import train
from .analysis import attention_columns, attention_trace_export, cosine_analysis
from .bench import bench_inference
from .metrics import MetricsReport, evaluate_model, evaluate_scores, metrics_at_k, rank_of_target
from .models import EvaluationRun
from .reports import bench_frame, compare_frame, details_frame, metrics_frame, read_details, write_table
from .significance import paired_t_test, relative_improvement

SLOW = os.getenv('SESSREC_SLOW_TESTS') == '1'


def sort_rank(scores, target):
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return order.index(target - 1) + 1


class WorkspaceMixin:

    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()
        super().tearDown()


class RankTests(SimpleTestCase):

    def test_unique_maximum(self):
        self.assertEqual(rank_of_target([0.1, 0.7, 0.2], 2), 1)

    def test_ties_break_by_item_id(self):
        uniform = [0.25] * 4
        self.assertEqual(rank_of_target(uniform, 1), 1)
        self.assertEqual(rank_of_target(uniform, 4), 4)

    def test_matches_full_sort(self):
        rng = np.random.default_rng(0)
        for trial in range(1000):
            m = int(rng.integers(1, 40))
            if trial % 2:
                raw = rng.integers(0, 3, size=m).astype(float) + 1.0
            else:
                raw = rng.random(m)
            scores = (raw / raw.sum()).tolist()
            target = int(rng.integers(1, m + 1))
            self.assertEqual(rank_of_target(scores, target), sort_rank(scores, target))

    def test_target_outside_catalogue(self):
        with self.assertRaises(ValueError):
            rank_of_target([0.5, 0.5], 3)


class MetricsTests(SimpleTestCase):

    def test_rank_one(self):
        self.assertEqual(metrics_at_k(1, 5), (1, 1.0, 1.0))

    def test_rank_three_at_twenty(self):
        recall, mrr, ndcg = metrics_at_k(3, 20)
        self.assertEqual(recall, 1)
        self.assertAlmostEqual(mrr, 1 / 3)
        self.assertEqual(ndcg, 0.5)

    def test_outside_cutoff(self):
        self.assertEqual(metrics_at_k(21, 20), (0, 0.0, 0.0))

    def test_monotone_in_k_and_ordered(self):
        report = MetricsReport(cutoffs=(1, 5, 10, 20), ranks=np.arange(1, 30), targets=np.ones(29, dtype=int))
        for metric in ('recall', 'mrr', 'ndcg'):
            values = [report.values(metric, k) for k in report.cutoffs]
            for low, high in zip(values, values[1:]):
                self.assertTrue((low <= high).all())
        for k in report.cutoffs:
            recall = report.values('recall', k)
            self.assertTrue((recall >= report.values('mrr', k)).all())
            self.assertTrue((recall >= report.values('ndcg', k)).all())

    def test_brute_force_means(self):
        rng = np.random.default_rng(3)
        examples = [FixedExample((1,), 0, int(rng.integers(1, 31))) for _ in range(200)]
        table = {id(e): rng.integers(0, 4, size=30).astype(float) + 1 for e in examples}

        report = evaluate_scores(lambda e: table[id(e)] / table[id(e)].sum(), examples, (5, 10), threads=4)
        for k in (5, 10):
            expected = [metrics_at_k(sort_rank(table[id(e)].tolist(), e.target), k) for e in examples]
            for column, metric in enumerate(('recall', 'mrr', 'ndcg')):
                self.assertAlmostEqual(report.mean(metric, k), np.mean([row[column] for row in expected]), places=12)


class SignificanceTests(SimpleTestCase):

    def test_identical_samples(self):
        result = paired_t_test([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        self.assertEqual((result.t, result.significant), (0.0, False))

    def test_symmetric_differences(self):
        result = paired_t_test([1, 1, 0, 0], [0, 0, 1, 1])
        self.assertEqual(result.t, 0.0)
        self.assertFalse(result.significant)

    def test_textbook_formula(self):
        d = [0.1, 0.2, 0.15, 0.05, 0.1]
        mean = sum(d) / 5
        sd = math.sqrt(sum((x - mean) ** 2 for x in d) / 4)
        expected = mean / (sd / math.sqrt(5))
        result = paired_t_test(d, [0.0] * 5)
        self.assertAlmostEqual(result.t, expected, places=10)
        self.assertAlmostEqual(result.t, 4.70679, places=4)
        self.assertTrue(result.significant)

    def test_constant_nonzero_difference(self):
        result = paired_t_test([1, 1, 1], [0, 0, 0])
        self.assertTrue(result.infinite)
        self.assertTrue(result.significant)
        self.assertEqual(result.t, math.inf)

    def test_small_effect_is_not_significant(self):
        self.assertFalse(paired_t_test([0.5, 0.6, 0.4, 0.55], [0.5, 0.5, 0.5, 0.5]).significant)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            paired_t_test([1, 2, 3], [1, 2])

    def test_relative_improvement(self):
        self.assertAlmostEqual(relative_improvement(0.55, 0.5), 10.0)
        self.assertIsNone(relative_improvement(0.5, 0.0))


class CosineTests(SimpleTestCase):

    def test_prediction_equal_to_target_embedding(self):
        hp = HyperParams(d=4, n=3, b=1, variant='MEAN')
        params = init_params(6, hp)
        report = cosine_analysis(params, hp, [FixedExample((0, 0, 4), 2, 4)])
        self.assertAlmostEqual(report.next, 1.0, places=12)

    def test_prediction_orthogonal_to_every_item(self):
        hp = HyperParams(d=4, n=2, b=1, variant='O')
        params = init_params(3, hp)
        e = np.eye(4)
        params.V[1:] = [e[0], e[1], (e[0] + e[1]) / math.sqrt(2)]
        params.P[:] = [e[2] - e[0], e[2] - e[1]]
        report = cosine_analysis(params, hp, [FixedExample((1, 2), 0, 3)])
        self.assertAlmostEqual(report.avg, 0.0, places=12)
        self.assertAlmostEqual(report.next, 0.0, places=12)

    def test_zero_prediction_is_skipped(self):
        hp = HyperParams(d=2, n=2, b=1, variant='MEAN')
        params = init_params(2, hp)
        params.V[1:] = [[1.0, 0.0], [-1.0, 0.0]]
        report = cosine_analysis(params, hp, [FixedExample((1, 2), 0, 1)])
        self.assertGreater(report.skipped_pairs, 0)
        self.assertEqual((report.avg, report.next), (0.0, 0.0))

    def test_trained_model_points_at_the_next_item(self):
        corpus = synthetic_corpus('transition', 30, 120, 30, length=5, seed=2)
        hp = HyperParams(d=16, n=4, b=1, variant='O', lr=0.02, epochs=5, batch_size=32)
        params = train(corpus, TrainConfig(hp=hp)).params
        report = cosine_analysis(params, hp, [to_fixed(e, hp.n) for e in corpus.test])
        self.assertGreater(report.next, report.avg)

    def test_pop_has_no_prediction(self):
        with self.assertRaises(FlagError):
            cosine_analysis(None, HyperParams(variant='POP'), [])


class AttentionExportTests(WorkspaceMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.corpus = synthetic_corpus('transition', 20, 10, 20, length=5, seed=0)
        self.hp = HyperParams(d=8, n=5, b=2, variant='OP')
        self.params = init_params(20, self.hp)

    def test_rows_are_distributions(self):
        frame = attention_trace_export(self.params, self.hp, self.corpus.test)
        self.assertEqual(list(frame.columns), attention_columns(8))
        self.assertEqual(frame.loc[0, 'pos_1'], 1.0)
        for length in range(1, 5):
            row = frame.iloc[length - 1]
            cells = row[[f'pos_{i}' for i in range(1, length + 1)]]
            self.assertAlmostEqual(cells.sum(), 1.0, delta=1e-6)
            self.assertTrue(row[[f'pos_{i}' for i in range(length + 1, 9)]].isna().all())
        self.assertTrue(frame.iloc[5][attention_columns(8)[1:]].isna().all())

    def test_csv_layout(self):
        path = write_table(attention_trace_export(self.params, self.hp, self.corpus.test), self.root / 'a.csv', sep=',')
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'length,' + ','.join(f'pos_{i}' for i in range(1, 9)))
        self.assertEqual(lines[1], '1,1.000000,,,,,,,')
        self.assertEqual(len(lines), 9)

    def test_variants_without_attention(self):
        with self.assertRaises(FlagError):
            attention_trace_export(self.params, self.hp.with_changes(variant='MEAN'), self.corpus.test)


class BenchTests(SimpleTestCase):

    def setUp(self):
        corpus = synthetic_corpus('transition', 20, 5, 10, length=5)
        self.examples = [to_fixed(e, 5) for e in corpus.test]

    def test_latencies_are_positive_and_finite(self):
        hp = HyperParams(d=8, n=5, b=2, variant='OP')
        report = bench_inference(init_params(20, hp), hp, self.examples, repetitions=2, warmup=1)
        self.assertEqual(report.timings, 2 * len(self.examples))
        for value in (report.mean_ms, report.p95_ms, report.eps):
            self.assertTrue(math.isfinite(value) and value > 0)

    def test_variants_side_by_side(self):
        rows = []
        for variant in ('O', 'OP'):
            hp = HyperParams(d=8, n=5, b=2, variant=variant)
            rows.append((variant, bench_inference(init_params(20, hp), hp, self.examples, warmup=0)))
        frame = bench_frame(rows)
        self.assertEqual(list(frame['variant']), ['O', 'OP'])
        self.assertEqual(list(frame.columns), ['variant', 'mean_ms', 'p95_ms', 'eps'])

    def test_empty_example_set(self):
        with self.assertRaises(FlagError):
            bench_inference(None, HyperParams(variant='POP'), [], m=20)

    def test_blas_runs_on_one_thread_while_timing(self):
        hp = HyperParams(d=8, n=5, b=2, variant='OP')
        pools = []

        def recording_forward(*args, **kwargs):
            pools.append(threadpool_info())
            return forward(*args, **kwargs)

        with mock.patch('evaluation.bench.forward', side_effect=recording_forward):
            bench_inference(init_params(20, hp), hp, self.examples, warmup=0)
        self.assertEqual(len(pools), len(self.examples))
        for info in pools:
            self.assertTrue(all(pool['num_threads'] == 1 for pool in info))

    @unittest.skipUnless(SLOW, 'set SESSREC_SLOW_TESTS=1 for large-shape checks')
    def test_large_catalogue_shape(self):
        hp = HyperParams(d=128, n=10, b=1, variant='OP')
        params = init_params(40727, hp)
        rng = np.random.default_rng(0)
        examples = [FixedExample(tuple(int(i) for i in rng.integers(1, 40728, size=10)), 0, 1) for _ in range(50)]
        report = bench_inference(params, hp, examples, warmup=1)
        self.assertTrue(math.isfinite(report.mean_ms))


class ReportTests(WorkspaceMixin, SimpleTestCase):

    def report(self, ranks):
        return MetricsReport(cutoffs=(5, 20), ranks=np.asarray(ranks), targets=np.arange(1, len(ranks) + 1))

    def test_metrics_table(self):
        frame = metrics_frame('OP', self.report([1, 3, 30]))
        self.assertEqual(list(frame.columns), ['variant', 'k', 'recall', 'mrr', 'ndcg', 'N'])
        self.assertEqual(list(frame['k']), [5, 20])
        self.assertAlmostEqual(frame.loc[0, 'recall'], 2 / 3)
        self.assertEqual(frame.loc[0, 'N'], 3)

    def test_details_round_trip_and_self_comparison(self):
        path = write_table(details_frame(self.report([1, 2, 7, 40])), self.root / 'd.tsv')
        details = read_details(path)
        frame = compare_frame(details, details, (5, 20))
        self.assertEqual(len(frame), 6)
        self.assertTrue((frame['t'] == 0.0).all())
        self.assertTrue((frame['significant'] == 'no').all())
        self.assertTrue((frame['improvement_pct'] == 0.0).all())

    def test_mismatched_test_sets(self):
        a = details_frame(self.report([1, 2, 3]))
        b = details_frame(self.report([1, 2]))
        with self.assertRaises(FormatError):
            compare_frame(a, b, (5,))


class OracleVersusMeanTests(SimpleTestCase):
    """The target's own embedding as attention query beats uniform pooling when the target repeats an input."""

    def test_oracle_beats_mean(self):
        corpus = synthetic_corpus('copy', 30, 300, 100, length=6, seed=0, augmented=False)
        ranks = {}
        for variant in ('ORACLE', 'MEAN'):
            hp = HyperParams(d=16, n=5, b=1, variant=variant, lr=0.02, epochs=15, batch_size=32)
            params = train(corpus, TrainConfig(hp=hp)).params
            fixed = [to_fixed(e, hp.n) for e in corpus.test]
            ranks[variant] = evaluate_model(params, hp, fixed, (1, 5))
        oracle, mean = ranks['ORACLE'].values('recall', 1), ranks['MEAN'].values('recall', 1)
        self.assertGreater(oracle.mean(), mean.mean())
        self.assertTrue(paired_t_test(oracle, mean).significant)


class ReproductionTests(SimpleTestCase):
    """Memorisation and order-sensitivity checks on synthetic corpora; minutes, not seconds."""

    def test_memorises_deterministic_transitions(self):
        corpus = synthetic_corpus('transition', 50, 500, 50, length=6, seed=0)
        hp = HyperParams(d=32, n=5, b=1, variant='O', lr=1e-3, epochs=200, batch_size=64)
        params = train(corpus, TrainConfig(hp=hp)).params
        fixed = [to_fixed(e, hp.n) for e in corpus.train]
        self.assertGreaterEqual(evaluate_model(params, hp, fixed, (1,)).mean('recall', 1), 0.95)

    def test_position_embeddings_help_on_order_sensitive_data(self):
        corpus = synthetic_corpus('penultimate', 40, 400, 200, length=5, seed=0, augmented=False)
        results = {}
        for use_pe in (True, False):
            hp = HyperParams(d=32, n=4, b=2, variant='OP', use_position_embeddings=use_pe,
                             lr=0.01, epochs=60, batch_size=32)
            params = train(corpus, TrainConfig(hp=hp)).params
            fixed = [to_fixed(e, hp.n) for e in corpus.test]
            results[use_pe] = evaluate_model(params, hp, fixed, (1, 20))
        with_pe, without_pe = results[True].values('recall', 20), results[False].values('recall', 20)
        self.assertGreater(with_pe.mean(), without_pe.mean())
        self.assertTrue(paired_t_test(with_pe, without_pe).significant)


class EvaluationCommandTests(WorkspaceMixin, TestCase):

    def setUp(self):
        super().setUp()
        self.corpus_dir = self.root / 'corpus'
        write_corpus(synthetic_corpus('transition', 25, 60, 15, length=5, seed=0), self.corpus_dir)
        self.checkpoint = self.root / 'op.ckpt'
        self.call('train', '--variant', 'op', '--d', '8', '--n', '4', '--b', '2', '--epochs', '2',
                  '--batch-size', '32', '--seed', '1', '--corpus', str(self.corpus_dir),
                  '--checkpoint', str(self.checkpoint), '--threads', '1')

    def call(self, name, *args):
        out = StringIO()
        call_command(name, *args, stdout=out)
        return out.getvalue()

    def evaluate(self, out, *extra):
        return self.call('eval', '--corpus', str(self.corpus_dir), '--out', str(out), '--threads', '2', *extra)

    def test_pipeline_produces_a_metrics_report(self):
        out = self.root / 'metrics.tsv'
        self.evaluate(out, '--checkpoint', str(self.checkpoint))
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0], 'variant\tk\trecall\tmrr\tndcg\tN')
        self.assertEqual([line.split('\t')[1] for line in lines[1:]], ['5', '10', '20'])
        self.assertTrue(all(line.startswith('OP\t') for line in lines[1:]))
        run = EvaluationRun.objects.get()
        self.assertEqual((run.label, run.rows.count()), ('honest', 3))

    def test_same_seed_same_bytes(self):
        second = self.root / 'again.ckpt'
        self.call('train', '--variant', 'op', '--d', '8', '--n', '4', '--b', '2', '--epochs', '2',
                  '--batch-size', '32', '--seed', '1', '--corpus', str(self.corpus_dir),
                  '--checkpoint', str(second), '--threads', '3')
        self.assertEqual(second.read_bytes(), self.checkpoint.read_bytes())
        self.evaluate(self.root / 'a.tsv', '--checkpoint', str(self.checkpoint))
        self.evaluate(self.root / 'b.tsv', '--checkpoint', str(second))
        self.assertEqual((self.root / 'a.tsv').read_bytes(), (self.root / 'b.tsv').read_bytes())

    def test_pop_needs_no_checkpoint(self):
        out = self.root / 'pop.tsv'
        self.evaluate(out, '--variant', 'pop', '--n', '4', '--k', '1,5')
        self.assertEqual(len(out.read_text().splitlines()), 3)

    def test_learned_variant_needs_a_checkpoint(self):
        with self.assertRaises(CommandError) as caught:
            self.evaluate(self.root / 'x.tsv', '--variant', 'o')
        self.assertEqual(caught.exception.returncode, 2)

    def test_flag_contradicting_the_checkpoint(self):
        with self.assertRaises(CommandError) as caught:
            self.evaluate(self.root / 'x.tsv', '--checkpoint', str(self.checkpoint), '--no-position-embeddings')
        self.assertEqual(caught.exception.returncode, 4)
        with self.assertRaises(CommandError) as caught:
            self.evaluate(self.root / 'x.tsv', '--checkpoint', str(self.checkpoint), '--variant', 'o')
        self.assertEqual(caught.exception.returncode, 4)

    def test_checkpoint_for_another_catalogue(self):
        other = self.root / 'other'
        write_corpus(synthetic_corpus('transition', 12, 20, 5, length=5), other)
        with self.assertRaises(CommandError) as caught:
            self.call('eval', '--corpus', str(other), '--checkpoint', str(self.checkpoint),
                      '--out', str(self.root / 'x.tsv'))
        self.assertEqual(caught.exception.returncode, 4)

    def test_oracle_only_in_analysis_mode(self):
        with self.assertRaises(CommandError) as caught:
            self.evaluate(self.root / 'x.tsv', '--variant', 'oracle')
        self.assertEqual(caught.exception.returncode, 2)
        self.assertFalse((self.root / 'x.tsv').exists())

    def test_bad_cutoffs(self):
        with self.assertRaises(CommandError) as caught:
            self.evaluate(self.root / 'x.tsv', '--checkpoint', str(self.checkpoint), '--k', '20,5')
        self.assertEqual(caught.exception.returncode, 2)

    def test_compare_two_models(self):
        self.evaluate(self.root / 'op.tsv', '--checkpoint', str(self.checkpoint), '--details', str(self.root / 'op.details'))
        self.evaluate(self.root / 'pop.tsv', '--variant', 'pop', '--n', '4', '--details', str(self.root / 'pop.details'))
        out = self.root / 'compare.tsv'
        self.call('compare', '--candidate', str(self.root / 'op.details'), '--baseline', str(self.root / 'pop.details'),
                  '--out', str(out))
        lines = out.read_text().splitlines()
        self.assertEqual(lines[0].split('\t'), ['metric', 'k', 'a', 'b', 'improvement_pct', 't', 'significant', 'N'])
        self.assertEqual(len(lines), 10)

    def test_analysis_commands(self):
        self.call('export_attention', '--corpus', str(self.corpus_dir), '--checkpoint', str(self.checkpoint),
                  '--out', str(self.root / 'attention.csv'))
        self.assertTrue((self.root / 'attention.csv').read_text().startswith('length,pos_1,'))

        self.call('cosine', '--corpus', str(self.corpus_dir), '--checkpoint', str(self.checkpoint),
                  '--out', str(self.root / 'cosine.tsv'))
        header, row = (self.root / 'cosine.tsv').read_text().splitlines()
        self.assertEqual(header, 'variant\tavg\tnext')
        self.assertTrue(row.startswith('OP\t'))

        self.call('bench', '--corpus', str(self.corpus_dir), '--checkpoint', str(self.checkpoint),
                  '--limit', '10', '--out', str(self.root / 'bench.tsv'))
        self.assertEqual(len((self.root / 'bench.tsv').read_text().splitlines()), 2)

        output = self.call('inspect_checkpoint', '--checkpoint', str(self.checkpoint))
        self.assertIn('variant\tOP', output)
        self.assertIn('m\t25', output)
