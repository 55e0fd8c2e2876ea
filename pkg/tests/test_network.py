import math

import numpy as np
import pytest

from src.activation import Activation, act
from src.errors import AlreadyAugmented, NonFiniteInput, ShapeMismatch
from src.network import (
    AugmentedBatch,
    NetworkSpec,
    WeightStack,
    augment,
    effective_parameters,
    forward,
    hidden_activations,
    is_underdetermined,
    predict,
)
from tests.oracles import naive_forward

F = Activation()


def random_stack(spec, rng, scale=1.0):
    return WeightStack(tuple(scale * rng.standard_normal(shape) for shape in spec.layer_shapes()))


class TestNetworkSpec:
    def test_shapes(self):
        spec = NetworkSpec.build(3, [5, 4, 2])
        assert spec.n_layers == 3
        assert spec.output_dim == 2
        assert spec.layer_shapes() == [(4, 5), (6, 4), (5, 2)]

    def test_single_activation_is_shared(self):
        spec = NetworkSpec.build(2, [3, 1])
        assert spec.activations == (F, F)

    @pytest.mark.parametrize("widths", [[3], [3, 0], []])
    def test_rejects_bad_widths(self, widths):
        with pytest.raises(ValueError):
            NetworkSpec.build(2, widths)

    def test_rejects_activation_count(self):
        with pytest.raises(ValueError):
            NetworkSpec(2, (3, 2, 1), (F, F))


class TestWeightStack:
    def test_bias_row_and_block(self):
        W1 = np.arange(6.0).reshape(3, 2)
        stack = WeightStack((W1, np.ones((3, 1))))
        np.testing.assert_array_equal(stack.bias_row(1), [[0.0, 1.0]])
        np.testing.assert_array_equal(stack.sans_bias(1), [[2.0, 3.0], [4.0, 5.0]])

    def test_arrays_are_read_only(self):
        stack = WeightStack((np.zeros((2, 2)), np.zeros((3, 1))))
        with pytest.raises(ValueError):
            stack.layer(1)[0, 0] = 1.0

    def test_validate_shapes(self):
        spec = NetworkSpec.build(2, [2, 1])
        with pytest.raises(ShapeMismatch):
            WeightStack((np.zeros((3, 2)), np.zeros((2, 1)))).validate(spec)
        with pytest.raises(NonFiniteInput):
            WeightStack((np.full((3, 2), np.nan), np.zeros((3, 1)))).validate(spec)

    def test_replace(self):
        stack = WeightStack((np.zeros((2, 2)), np.zeros((3, 1))))
        swapped = stack.replace(2, np.ones((3, 1)))
        np.testing.assert_array_equal(swapped.layer(2), np.ones((3, 1)))
        np.testing.assert_array_equal(stack.layer(2), np.zeros((3, 1)))


class TestAugment:
    def test_single_value(self):
        np.testing.assert_array_equal(augment([[0.5]]).X_aug, [[1.0, 0.5]])

    def test_xor_inputs(self):
        X = np.array([[0, 0], [1, 1], [1, 0], [0.001, 1.001]])
        batch = augment(X)
        assert batch.X_aug.shape == (4, 3)
        assert batch.m == 4 and batch.d == 2
        np.testing.assert_array_equal(batch.X_aug[:, 0], 1.0)

    def test_refuses_double_augmentation(self):
        batch = augment([[0.5], [0.2]])
        with pytest.raises(AlreadyAugmented):
            augment(batch)
        with pytest.raises(AlreadyAugmented):
            augment(batch.X_aug)
        assert augment(batch.X_aug, force=True).X_aug.shape == (2, 3)

    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteInput):
            augment([[np.inf, 0.0]])


class TestForward:
    def test_zero_weights_give_constant(self):
        spec = NetworkSpec.build(3, [4, 2])
        W = WeightStack(tuple(np.zeros(shape) for shape in spec.layer_shapes()))
        out = forward(spec, W, augment(np.random.default_rng(0).standard_normal((5, 3))))
        np.testing.assert_allclose(out, math.log(1.8), atol=1e-12)
        np.testing.assert_allclose(out, 0.58779, atol=1e-5)

    def test_identity_net_by_hand(self):
        spec = NetworkSpec.build(2, [2, 1])
        W1 = np.vstack([np.zeros((1, 2)), np.eye(2)])
        W2 = np.array([[0.3], [0.5], [-0.25]])
        x = np.array([0.7, -1.2])
        h = np.log(0.8 + np.exp(x))
        expected = np.log(0.8 + np.exp(0.3 + 0.5 * h[0] - 0.25 * h[1]))
        out = forward(spec, WeightStack((W1, W2)), augment(x.reshape(1, -1)))
        assert out[0, 0] == pytest.approx(expected, abs=1e-14)

    def test_matches_scalar_oracle_on_random_nets(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            d = int(rng.integers(1, 5))
            widths = list(rng.integers(1, 6, size=int(rng.integers(2, 5))))
            spec = NetworkSpec.build(d, widths)
            W = random_stack(spec, rng, scale=0.7)
            x = rng.standard_normal((1, d))
            out = forward(spec, W, augment(x, force=True))
            np.testing.assert_allclose(out[0], naive_forward(W.layers, x[0]), atol=1e-12)

    def test_requires_augmented_batch(self):
        spec = NetworkSpec.build(1, [1, 1])
        W = random_stack(spec, np.random.default_rng(2))
        with pytest.raises(TypeError):
            forward(spec, W, np.ones((2, 2)))

    def test_input_dimension_checked(self):
        spec = NetworkSpec.build(3, [2, 1])
        W = random_stack(spec, np.random.default_rng(3))
        with pytest.raises(ShapeMismatch):
            forward(spec, W, augment(np.ones((2, 2)) * 0.5))

    def test_predict_augments(self):
        spec = NetworkSpec.build(2, [3, 1])
        W = random_stack(spec, np.random.default_rng(4))
        X = np.array([[1.0, 2.0], [1.0, -1.0]])
        np.testing.assert_array_equal(predict(spec, W, X), forward(spec, W, AugmentedBatch(np.hstack([np.ones((2, 1)), X]))))


class TestHiddenActivations:
    def test_two_layer_shape(self):
        spec = NetworkSpec.build(2, [5, 1])
        hidden = hidden_activations(spec, random_stack(spec, np.random.default_rng(5)), augment(np.full((7, 2), 0.5)))
        assert len(hidden) == 1
        assert hidden[0].shape == (7, 6)

    def test_five_layer_shapes(self):
        spec = NetworkSpec.build(1, [1, 1, 1, 6, 1])
        X = augment(np.arange(2.0, 10.0).reshape(-1, 1))
        hidden = hidden_activations(spec, random_stack(spec, np.random.default_rng(6)), X)
        assert [A.shape for A in hidden] == [(8, 2), (8, 2), (8, 2), (8, 7)]

    def test_values_recomputed_independently(self):
        rng = np.random.default_rng(7)
        spec = NetworkSpec.build(3, [4, 3, 2])
        W = random_stack(spec, rng, scale=0.5)
        X = augment(rng.standard_normal((6, 3)))
        A1, A2 = hidden_activations(spec, W, X)
        H1 = act(F, X.X_aug @ W.layer(1))
        np.testing.assert_allclose(A1[:, 1:], H1, atol=1e-14)
        np.testing.assert_array_equal(A1[:, 0], 1.0)
        H2 = act(F, np.hstack([np.ones((6, 1)), H1]) @ W.layer(2))
        np.testing.assert_allclose(A2[:, 1:], H2, atol=1e-14)
        np.testing.assert_allclose(forward(spec, W, X), act(F, A2 @ W.layer(3)), atol=1e-14)


class TestSizing:
    def test_underdetermined_rule(self):
        assert is_underdetermined(NetworkSpec.build(1, [8, 1]), 8)
        assert not is_underdetermined(NetworkSpec.build(1, [6, 1]), 8)
        assert is_underdetermined(NetworkSpec.build(1, [1, 1, 1, 8, 1]), 8)

    def test_effective_parameters(self):
        assert effective_parameters(NetworkSpec.build(2, [10, 3])) == 33
