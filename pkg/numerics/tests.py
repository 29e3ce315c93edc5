import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import NumericalError, ShapeError
from .autodiff import (
    Node,
    add,
    concat_cols,
    cross_entropy,
    gather_rows,
    last_row,
    masked_mean_rows,
    masked_row_softmax,
    matmul,
    project_rows,
    scale,
    softmax,
    softmax_cross_entropy,
    transpose,
)
from .gradcheck import grad_check, numeric_gradients, reverse_gradients
from .optim import AdamState, adam_step


def reduce_to_scalar(node, seed=0):
    """u . node . w with fixed random u, w: a 1x1 node depending on every entry."""
    rng = np.random.default_rng(seed)
    rows, cols = node.shape
    u = Node(rng.normal(size=(1, rows)))
    w = Node(rng.normal(size=(cols, 1)))
    return matmul(matmul(u, node), w)


class NodeTests(SimpleTestCase):

    def test_values_are_float64_matrices(self):
        node = Node([[1, 2, 3]])
        self.assertEqual(node.value.dtype, np.float64)
        self.assertEqual(node.shape, (1, 3))

    def test_vectors_become_rows(self):
        self.assertEqual(Node(np.zeros(3)).shape, (1, 3))

    def test_higher_rank_arrays_are_rejected(self):
        with self.assertRaises(ShapeError):
            Node(np.zeros((2, 2, 2)))

    def test_non_finite_values_are_rejected(self):
        with self.assertRaises(NumericalError):
            Node([[1.0, math.nan]])

    def test_add_needs_equal_shapes(self):
        with self.assertRaises(ShapeError):
            add(Node(np.zeros((2, 3))), Node(np.zeros((3, 2))))

    def test_matmul_needs_matching_inner_dimension(self):
        with self.assertRaises(ShapeError):
            matmul(Node(np.zeros((2, 3))), Node(np.zeros((2, 3))))

    def test_backward_needs_a_scalar(self):
        with self.assertRaises(ShapeError):
            Node(np.zeros((2, 2))).backward()

    def test_shared_subexpression_accumulates(self):
        x = Node([[3.0]])
        y = matmul(x, x)
        add(y, x).backward()
        self.assertEqual(x.grad[0, 0], 7.0)

    def test_matmul_matches_a_scalar_triple_loop(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        expected = [[sum(a[i, k] * b[k, j] for k in range(4)) for j in range(2)] for i in range(3)]
        np.testing.assert_allclose(matmul(Node(a), Node(b)).value, expected, rtol=0, atol=1e-12)


class OpGradientTests(SimpleTestCase):
    """Each op against central differences; tolerance 1e-6."""

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def check(self, build, **shapes):
        params = {name: self.rng.normal(size=shape) for name, shape in shapes.items()}
        error = grad_check(lambda leaves: reduce_to_scalar(build(leaves)), params)
        self.assertLess(error, 1e-6)

    def test_add(self):
        self.check(lambda p: add(p['a'], p['b']), a=(3, 4), b=(3, 4))

    def test_matmul(self):
        self.check(lambda p: matmul(p['a'], p['b']), a=(3, 4), b=(4, 2))

    def test_scale(self):
        self.check(lambda p: scale(p['a'], -2.5), a=(2, 3))

    def test_transpose(self):
        self.check(lambda p: transpose(p['a']), a=(2, 5))

    def test_gather_rows_with_repeats(self):
        self.check(lambda p: gather_rows(p['table'], [0, 2, 2, 1]), table=(4, 3))

    def test_last_row(self):
        self.check(lambda p: last_row(p['a']), a=(4, 3))

    def test_project_rows_skips_offset_rows(self):
        self.check(lambda p: project_rows(p['h'], p['table'], offset=1), h=(1, 3), table=(5, 3))

    def test_concat_cols(self):
        self.check(lambda p: concat_cols([p['a'], p['b'], p['c']]), a=(1, 2), b=(1, 3), c=(1, 1))

    def test_masked_row_softmax(self):
        mask = np.array([[True, False, False, True, False]])
        self.check(lambda p: masked_row_softmax(p['z'], mask, 2.0), z=(1, 5))

    def test_masked_mean_rows(self):
        mask = np.array([True, False, False, False])
        self.check(lambda p: masked_mean_rows(p['a'], mask), a=(4, 3))

    def test_softmax_cross_entropy(self):
        params = {'z': self.rng.normal(size=(1, 6))}
        error = grad_check(lambda p: softmax_cross_entropy(p['z'], 4)[0], params)
        self.assertLess(error, 1e-6)


class SoftmaxTests(SimpleTestCase):

    def test_masked_positions_are_exactly_zero(self):
        out = masked_row_softmax(Node([[5.0, 1.0, 2.0]]), [[True, False, False]]).value
        self.assertEqual(out[0, 0], 0.0)
        self.assertAlmostEqual(out.sum(), 1.0, places=12)

    def test_fully_masked_row_is_an_error(self):
        with self.assertRaises(ValueError):
            masked_row_softmax(Node([[1.0, 2.0]]), [[True, True]])

    def test_scale_must_be_positive(self):
        with self.assertRaises(ValueError):
            masked_row_softmax(Node([[1.0, 2.0]]), scale_by=0.0)

    def test_large_logits_stay_finite(self):
        out = softmax([[1000.0, 1000.0, -1000.0]])
        np.testing.assert_allclose(out, [[0.5, 0.5, 0.0]])

    def test_cross_entropy_of_a_certain_prediction_is_zero(self):
        self.assertEqual(cross_entropy([[0.0, 1.0, 0.0]], 2), 0.0)

    def test_cross_entropy_floors_zero_probability(self):
        self.assertAlmostEqual(cross_entropy([[1.0, 0.0]], 2), -math.log(1e-12))

    def test_cross_entropy_rejects_unnormalised_scores(self):
        with self.assertRaises(ValueError):
            cross_entropy([[0.5, 0.6]], 1)

    def test_fused_loss_matches_cross_entropy(self):
        logits = Node([[0.3, -1.2, 2.0, 0.0]])
        node, probs = softmax_cross_entropy(logits, 2)
        self.assertAlmostEqual(node.value[0, 0], cross_entropy(probs, 3), places=12)


class GradCheckTests(SimpleTestCase):

    def test_quadratic_has_exact_gradient(self):
        params = {'x': np.array([[1.0, -2.0, 0.5]])}
        f = lambda p: matmul(p['x'], transpose(p['x']))
        np.testing.assert_allclose(reverse_gradients(f, params)['x'], 2 * params['x'])
        np.testing.assert_allclose(numeric_gradients(f, params)['x'], 2 * params['x'], atol=1e-8)
        self.assertLess(grad_check(f, params), 1e-8)

    def test_wrong_gradient_is_detected(self):
        def broken(p):
            x = p['x']
            return Node(x.value @ x.value.T, (x,), lambda g: None, 'broken')

        self.assertGreater(grad_check(broken, {'x': np.array([[1.0, 2.0]])}), 0.5)


class AdamTests(SimpleTestCase):

    def test_first_step_moves_each_coordinate_by_lr(self):
        params = {'w': np.array([[1.0, -1.0]])}
        adam_step(AdamState(lr=0.1), params, {'w': np.array([[3.0, -0.5]])})
        np.testing.assert_allclose(params['w'], [[0.9, -0.9]], atol=1e-6)

    def test_zero_learning_rate_leaves_parameters_unchanged(self):
        params = {'w': np.array([[1.0, 2.0]])}
        state = AdamState(lr=0.0)
        for _ in range(5):
            adam_step(state, params, {'w': np.array([[0.3, -0.7]])})
        np.testing.assert_array_equal(params['w'], [[1.0, 2.0]])
        self.assertEqual(state.t, 5)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        params = {'w': np.array([[1.0, 2.0]])}
        adam_step(AdamState(), params, {'w': np.zeros((1, 2))})
        np.testing.assert_array_equal(params['w'], [[1.0, 2.0]])

    def test_non_finite_gradient_refuses_the_step(self):
        params = {'w': np.array([[1.0, 2.0]])}
        state = AdamState()
        with self.assertRaises(NumericalError):
            adam_step(state, params, {'w': np.array([[math.inf, 0.0]])})
        self.assertEqual(state.t, 0)
        np.testing.assert_array_equal(params['w'], [[1.0, 2.0]])

    def test_shape_mismatch_refuses_the_step(self):
        with self.assertRaises(ShapeError):
            adam_step(AdamState(), {'w': np.zeros((1, 2))}, {'w': np.zeros((2, 1))})

    def test_minimises_a_quadratic(self):
        params = {'w': np.array([[5.0, -3.0]])}
        state = AdamState(lr=0.1)
        for _ in range(500):
            adam_step(state, params, {'w': 2 * params['w']})
        self.assertLess(np.abs(params['w']).max(), 0.1)

    def test_each_step_lowers_a_quadratic(self):
        params = {'w': np.array([[2.0]])}
        state = AdamState(lr=0.1)
        losses = []
        for _ in range(10):
            adam_step(state, params, {'w': 2 * params['w']})
            losses.append(float(params['w'][0, 0] ** 2))
        for before, after in zip(losses, losses[1:]):
            self.assertLess(after, before)
