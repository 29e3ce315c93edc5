import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import FlagError, FormatError, ShapeError, StorageError
from corpus.sessions import FixedExample
from numerics.autodiff import Node
from numerics.gradcheck import grad_check
from .checkpoint import MAGIC, CheckpointHeader, decode, encode, load_checkpoint, save_checkpoint
from .hyperparams import VARIANTS, HyperParams, parse_variant
from .network import (
    embed,
    example_gradients,
    forward,
    loss,
    popularity_scores,
    position_sensitive_attention,
    prospective_attention,
    score,
)
from .params import init_params, param_shapes

LEARNED = ('O', 'P', 'OP', 'LAST_OP', 'ORACLE', 'MEAN')


def random_window(rng, n, m):
    pads = int(rng.integers(0, n))
    items = tuple(int(i) for i in rng.integers(1, m + 1, size=n - pads))
    return FixedExample((0,) * pads + items, pads, int(rng.integers(1, m + 1)))


def loop_attention(query, keys, values, mask, scale_by):
    """Softmax attention written out element by element."""
    n, width = len(keys), len(query)
    logits = [sum(query[k] * keys[j][k] for k in range(width)) / scale_by for j in range(n)]
    live = [j for j in range(n) if mask is None or not mask[j]]
    top = max(logits[j] for j in live)
    weights = [math.exp(logits[j] - top) if j in live else 0.0 for j in range(n)]
    total = sum(weights)
    weights = [w / total for w in weights]
    out = [sum(weights[j] * values[j][k] for j in range(n)) for k in range(len(values[0]))]
    return weights, out


def loop_matvec(row, matrix):
    return [sum(row[i] * matrix[i][k] for i in range(len(row))) for k in range(len(matrix[0]))]


class HyperParamsTests(SimpleTestCase):

    def test_cli_names_map_to_variants(self):
        self.assertEqual(parse_variant('last'), 'LAST_OP')
        self.assertEqual(parse_variant('OP'), 'OP')
        self.assertEqual(parse_variant('pop'), 'POP')

    def test_unknown_variant(self):
        with self.assertRaises(FlagError):
            parse_variant('transformer')

    def test_heads_must_divide_width(self):
        with self.assertRaises(FlagError):
            HyperParams(d=10, b=4)

    def test_head_width(self):
        self.assertEqual(HyperParams(d=64, b=4).head_width, 16)


class ParamsTests(SimpleTestCase):

    def test_shapes(self):
        shapes = param_shapes(20, HyperParams(d=8, n=5, b=2))
        self.assertEqual(shapes['V'], (21, 8))
        self.assertEqual(shapes['P'], (5, 8))
        self.assertEqual(shapes['Q_2'], (8, 4))
        self.assertEqual(shapes['W'], (8, 8))
        self.assertEqual(list(shapes)[:3], ['V', 'P', 'q'])

    def test_padding_row_starts_at_zero_and_init_is_bounded(self):
        params = init_params(20, HyperParams(d=16, n=5))
        self.assertFalse(params.V[0].any())
        for array in params.as_dict().values():
            self.assertLessEqual(np.abs(array).max(), 0.25)

    def test_same_seed_same_parameters(self):
        hp = HyperParams(d=8, n=5, b=2, seed=3)
        a, b = init_params(20, hp), init_params(20, hp)
        for name, array in a.as_dict().items():
            np.testing.assert_array_equal(array, b.as_dict()[name])

    def test_different_seeds_give_different_parameters(self):
        hp = HyperParams(d=8, n=5, b=2)
        a, b = init_params(20, hp, seed=1), init_params(20, hp, seed=2)
        self.assertFalse(np.array_equal(a.V[1:], b.V[1:]))
        for name in ('P', 'q', 'Q_1', 'K_2', 'W'):
            self.assertFalse(np.array_equal(a.as_dict()[name], b.as_dict()[name]), name)


class ForwardTests(SimpleTestCase):

    def setUp(self):
        self.m = 20
        self.window = FixedExample((0, 0, 3, 7, 12), 2, 5)

    def test_window_length_must_match(self):
        hp = HyperParams(d=8, n=4, b=2, variant='O')
        with self.assertRaises(ShapeError):
            forward(self.window, init_params(self.m, hp), hp)

    def test_item_outside_catalogue(self):
        hp = HyperParams(d=8, n=5, b=2, variant='O')
        with self.assertRaises(FormatError):
            forward(FixedExample((0, 0, 3, 7, 21), 2, 5), init_params(self.m, hp), hp)

    def test_oracle_needs_the_target(self):
        hp = HyperParams(d=8, n=5, b=2, variant='ORACLE')
        with self.assertRaises(ValueError):
            forward(self.window, init_params(self.m, hp), hp)

    def test_popularity_counts_items_in_the_window(self):
        scores = popularity_scores(FixedExample((0, 2, 2, 5), 1, 3), 5)
        np.testing.assert_allclose(scores, [[0.0, 2 / 3, 0.0, 0.0, 1 / 3]])

    def test_pop_needs_no_parameters(self):
        hp = HyperParams(n=5, variant='POP')
        trace = forward(self.window, None, hp, m=self.m)
        self.assertAlmostEqual(trace.scores.sum(), 1.0)
        with self.assertRaises(ValueError):
            loss(trace, self.window.target)

    def test_padding_row_and_disabled_positions_get_no_gradient(self):
        hp = HyperParams(d=8, n=5, b=2, variant='OP', use_position_embeddings=False, use_pad_mask=False)
        _, grads = example_gradients(self.window, init_params(self.m, hp), hp)
        self.assertFalse(grads['V'][0].any())
        self.assertFalse(grads['P'].any())

    def test_o_and_op_differ_only_by_the_prospective_term(self):
        params = init_params(self.m, HyperParams(d=8, n=5, b=2))
        o = forward(self.window, params, HyperParams(d=8, n=5, b=2, variant='O'))
        op = forward(self.window, params, HyperParams(d=8, n=5, b=2, variant='OP'))
        np.testing.assert_allclose(op.h, o.h_o + op.h_p, atol=1e-12)
        np.testing.assert_array_equal(o.alpha, op.alpha)


class ModelPropertyTests(SimpleTestCase):

    def setUp(self):
        self.m = 20
        self.window = FixedExample((0, 3, 7, 9, 12), 1, 5)
        self.swapped = FixedExample((0, 7, 3, 9, 12), 1, 5)

    def test_position_embeddings_make_attention_order_sensitive(self):
        hp = HyperParams(d=8, n=5, b=2, variant='O')
        params = init_params(self.m, hp)
        alpha = forward(self.window, params, hp).alpha[0]
        swapped = forward(self.swapped, params, hp).alpha[0]
        self.assertFalse(np.allclose(swapped, alpha[[0, 2, 1, 3, 4]], rtol=0, atol=1e-9))

    def test_without_position_embeddings_attention_follows_the_items(self):
        hp = HyperParams(d=8, n=5, b=2, variant='O', use_position_embeddings=False)
        params = init_params(self.m, hp)
        alpha = forward(self.window, params, hp).alpha[0]
        swapped = forward(self.swapped, params, hp).alpha[0]
        np.testing.assert_allclose(swapped, alpha[[0, 2, 1, 3, 4]], rtol=0, atol=1e-12)

    def test_stored_positions_are_ignored_when_disabled(self):
        hp = HyperParams(d=8, n=5, b=2, variant='OP', use_position_embeddings=False)
        params = init_params(self.m, hp)
        shifted = params.copy()
        shifted.P[:] = 123.0
        np.testing.assert_array_equal(
            forward(self.window, shifted, hp).scores, forward(self.window, params, hp).scores
        )

    def test_zero_head_projections_reduce_op_to_o(self):
        hp = HyperParams(d=8, n=5, b=2)
        params = init_params(self.m, hp)
        for array in params.Q + params.K + params.Wh + [params.W]:
            array[:] = 0.0
        o = forward(self.window, params, hp.with_changes(variant='O'))
        op = forward(self.window, params, hp.with_changes(variant='OP'))
        np.testing.assert_allclose(op.scores, o.scores, rtol=0, atol=1e-15)

    def test_item_rows_learn_from_both_input_and_scoring(self):
        hp = HyperParams(d=8, n=5, b=2, variant='OP')
        params = init_params(self.m, hp)
        trace = forward(self.window, params, hp)
        _, grads = example_gradients(self.window, params, hp)

        def scoring_part(item):
            return (trace.scores[0, item - 1] - (item == self.window.target)) * trace.h[0]

        # item 15 is only a candidate, item 3 is also in the window
        np.testing.assert_allclose(grads['V'][15], scoring_part(15), atol=1e-12)
        self.assertGreater(np.abs(grads['V'][15]).max(), 0.0)
        self.assertGreater(np.abs(grads['V'][3] - scoring_part(3)).max(), 1e-8)

    def test_zero_preference_scores_uniformly(self):
        params = init_params(self.m, HyperParams(d=8, n=5, b=2))
        _, scores = score(Node(np.zeros((1, 8))), Node(params.V))
        np.testing.assert_allclose(scores, np.full((1, self.m), 1 / self.m), rtol=0, atol=1e-15)

    def test_mean_of_one_item_scores_by_its_embedding(self):
        hp = HyperParams(d=8, n=5, b=2, variant='MEAN')
        params = init_params(self.m, hp)
        trace = forward(FixedExample((0, 0, 0, 0, 7), 4, 2), params, hp)
        logits = params.V[7] @ params.V[1:].T
        expected = np.exp(logits - logits.max())
        np.testing.assert_allclose(trace.scores[0], expected / expected.sum(), rtol=0, atol=1e-12)

    def test_zero_positions_leave_embeddings_unchanged(self):
        hp = HyperParams(d=8, n=5, b=2)
        params = init_params(self.m, hp)
        params.P[:] = 0.0
        E, C, mask = embed(self.window, params.leaves(), hp)
        np.testing.assert_array_equal(C.value, E.value)
        np.testing.assert_array_equal(mask, [True, False, False, False, False])


class ModelGradientTests(SimpleTestCase):
    """Whole-model reverse gradients against central differences."""

    def test_every_learned_variant(self):
        m = 20
        window = FixedExample((0, 4, 9, 4, 17), 1, 6)
        for variant in LEARNED:
            with self.subTest(variant=variant):
                hp = HyperParams(d=8, n=5, b=2, variant=variant, seed=0)
                params = init_params(m, hp)

                def f(leaves):
                    trace = forward(window, None, hp, target=window.target, leaves=leaves, m=m)
                    return loss(trace, window.target)

                self.assertLess(grad_check(f, params.as_dict(), h=1e-4), 1e-3)

    def test_per_head_scale_without_pad_mask(self):
        m = 12
        window = FixedExample((0, 0, 3, 3, 8), 2, 1)
        hp = HyperParams(d=8, n=5, b=4, variant='LAST_OP', attention_scale_mode='per_head', use_pad_mask=False)

        def f(leaves):
            return loss(forward(window, None, hp, target=window.target, leaves=leaves, m=m), window.target)

        self.assertLess(grad_check(f, init_params(m, hp).as_dict()), 1e-3)


class AttentionOracleTests(SimpleTestCase):
    """Vectorised attention against element-by-element loops, 100 random instances each."""

    def instances(self, seed):
        rng = np.random.default_rng(seed)
        for index in range(100):
            b = int(rng.choice([1, 2, 4]))
            d = int(rng.choice([w for w in (4, 8, 16) if w % b == 0]))
            n = int(rng.integers(1, 9))
            masked = bool(index % 2)
            hp = HyperParams(d=d, n=n, b=b, use_pad_mask=masked,
                             attention_scale_mode='per_head' if index % 3 == 0 else 'full_d')
            pads = int(rng.integers(0, n))
            mask = np.arange(n) < pads
            yield rng, hp, mask

    def test_position_sensitive_attention(self):
        for rng, hp, mask in self.instances(1):
            C = rng.normal(size=(hp.n, hp.d))
            q = rng.normal(size=(1, hp.d))
            alpha, h_o = position_sensitive_attention(Node(C), Node(q), mask, hp)
            weights, out = loop_attention(
                q[0].tolist(), C.tolist(), C.tolist(), mask if hp.use_pad_mask else None, math.sqrt(hp.d)
            )
            np.testing.assert_allclose(alpha.value[0], weights, rtol=0, atol=1e-12)
            np.testing.assert_allclose(h_o.value[0], out, rtol=0, atol=1e-12)

    def test_prospective_attention(self):
        for rng, hp, mask in self.instances(2):
            C = rng.normal(size=(hp.n, hp.d))
            query = rng.normal(size=(1, hp.d))
            leaves = {'W': Node(rng.normal(size=(hp.d, hp.d)))}
            for i in range(1, hp.b + 1):
                for prefix in ('Q', 'K', 'W'):
                    leaves[f'{prefix}_{i}'] = Node(rng.normal(size=(hp.d, hp.head_width)))

            betas, h_p = prospective_attention(Node(query), Node(C), mask, leaves, hp)

            scale_by = math.sqrt(hp.d if hp.attention_scale_mode == 'full_d' else hp.head_width)
            rows = C.tolist()
            concat = []
            for i in range(1, hp.b + 1):
                projected_query = loop_matvec(query[0].tolist(), leaves[f'Q_{i}'].value.tolist())
                keys = [loop_matvec(row, leaves[f'K_{i}'].value.tolist()) for row in rows]
                values = [loop_matvec(row, leaves[f'W_{i}'].value.tolist()) for row in rows]
                weights, head = loop_attention(
                    projected_query, keys, values, mask if hp.use_pad_mask else None, scale_by
                )
                np.testing.assert_allclose(betas[i - 1].value[0], weights, rtol=0, atol=1e-12)
                concat.extend(head)
            expected = loop_matvec(concat, leaves['W'].value.tolist())
            np.testing.assert_allclose(h_p.value[0], expected, rtol=0, atol=1e-12)


class SimplexTests(SimpleTestCase):
    """Attention rows and score vectors are distributions over 1000 random windows per variant."""

    def test_attention_and_scores_are_normalised(self):
        m, n = 20, 5
        for variant in VARIANTS:
            with self.subTest(variant=variant):
                rng = np.random.default_rng(7)
                hp = HyperParams(d=8, n=n, b=2, variant=variant)
                params = None if variant == 'POP' else init_params(m, hp)
                for _ in range(1000):
                    window = random_window(rng, n, m)
                    trace = forward(window, params, hp, target=window.target, m=m)
                    self.assertAlmostEqual(trace.scores.sum(), 1.0, delta=1e-6)
                    rows = ([trace.alpha] if trace.alpha is not None else []) + list(trace.beta)
                    for row in rows:
                        self.assertAlmostEqual(row[0][~trace.mask].sum(), 1.0, delta=1e-9)
                        self.assertTrue((row[0][trace.mask] == 0.0).all())


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.hp = HyperParams(d=8, n=5, b=2, variant='LAST_OP', use_position_embeddings=False,
                              attention_scale_mode='per_head')
        self.params = init_params(20, self.hp)
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'model.ckpt'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        save_checkpoint(self.path, self.params, self.hp)
        loaded, header = load_checkpoint(self.path)
        self.assertEqual(header, CheckpointHeader.from_hyperparams(self.hp, 20))
        for name, array in self.params.as_dict().items():
            np.testing.assert_array_equal(loaded.as_dict()[name], array.astype(np.float32).astype(np.float64))
        self.assertEqual(encode(loaded, header), self.path.read_bytes())
        self.assertFalse(Path(f"{self.path}.tmp").exists())

    def test_header_records_training_flags(self):
        header = CheckpointHeader.from_hyperparams(self.hp, 20)
        _, decoded = decode(encode(self.params, header))
        self.assertFalse(decoded.use_position_embeddings)
        self.assertTrue(decoded.use_pad_mask)
        self.assertEqual(decoded.attention_scale_mode, 'per_head')
        self.assertEqual(decoded.variant, 'LAST_OP')

    def test_bad_magic(self):
        with self.assertRaises(FormatError):
            decode(b'NOPE' + bytes(40))

    def test_truncated(self):
        blob = encode(self.params, CheckpointHeader.from_hyperparams(self.hp, 20))
        self.assertTrue(blob.startswith(MAGIC))
        with self.assertRaises(FormatError):
            decode(blob[:-3])

    def test_trailing_bytes(self):
        blob = encode(self.params, CheckpointHeader.from_hyperparams(self.hp, 20))
        with self.assertRaises(FormatError):
            decode(blob + b'\x00')

    def test_header_and_tensor_shapes_must_agree(self):
        header = CheckpointHeader.from_hyperparams(self.hp.with_changes(n=6), 20)
        with self.assertRaises(FormatError):
            decode(encode(self.params, header))

    def test_missing_file(self):
        with self.assertRaises(StorageError):
            load_checkpoint(self.path)
