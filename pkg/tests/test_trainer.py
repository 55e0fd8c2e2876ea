import numpy as np
import pytest

from src.activation import Activation, act, act_inv
from src.data import SincConfig, SpiralConfig, gen_sinc, gen_spiral, gen_xor
from src.errors import DomainViolation, ShapeMismatch
from src.evaluation import accuracy, mse
from src.linalg import RIDGE_LIMIT, SVD_TRUNCATION, CountingPinv, PinvConfig, rank, solve_min_norm, sse
from src.network import (
    NetworkSpec,
    WeightStack,
    augment,
    forward,
    hidden_activations,
    is_underdetermined,
    predict,
    with_ones,
)
from src.trainer import (
    DEFAULT_INIT_SCALE,
    UNIFORM_PM1,
    KarTrainer,
    PeeledTargets,
    TrainConfig,
    back_substitute,
    init_weights,
    peel_targets,
    train,
)

F = Activation()

# relative singular-value cutoff under which a solve is trusted to 1e-4
TRUSTED_RCOND = 1e-10


def identity_stack(spec):
    """Zero bias rows, identity sans-bias blocks (square layers only)"""
    layers = []
    for rows, cols in spec.layer_shapes():
        W = np.zeros((rows, cols))
        W[1:, :] = np.eye(rows - 1, cols)
        layers.append(W)
    return WeightStack(tuple(layers))


def clean_sinc():
    return gen_sinc(SincConfig(clean_only=True))


def wide_init(seed):
    """The sinc and spiral nets train best from full-scale initial weights"""
    return TrainConfig(seed=seed, init_scale=1.0)


def given_targets(*targets):
    """PeeledTargets for hand-made G_1 ... G_n inside the range of f"""
    inverted = tuple(act_inv(F, G) for G in targets)
    return PeeledTargets(tuple(targets), inverted, {k: 0 for k in range(1, len(targets) + 1)})


class TestInitWeights:
    def test_same_seed_same_stack(self):
        spec = NetworkSpec.build(3, [5, 4, 2])
        a = init_weights(spec, TrainConfig(seed=11))
        b = init_weights(spec, TrainConfig(seed=11))
        for Wa, Wb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(Wa, Wb)

    def test_different_seeds_differ(self):
        spec = NetworkSpec.build(3, [5, 2])
        a = init_weights(spec, TrainConfig(seed=1))
        b = init_weights(spec, TrainConfig(seed=2))
        assert any(not np.array_equal(Wa, Wb) for Wa, Wb in zip(a.layers, b.layers))

    def test_normal_scaled_spread(self):
        spec = NetworkSpec.build(100, [100, 1])
        W1 = init_weights(spec, TrainConfig(seed=3)).layer(1)
        assert W1.size >= 10_000
        assert abs(W1.std() - 0.1) < 0.02

    def test_uniform_range(self):
        spec = NetworkSpec.build(4, [50, 3])
        W = init_weights(spec, TrainConfig(seed=4, init=UNIFORM_PM1, init_scale=0.5))
        for layer in W.layers:
            assert layer.min() >= -0.5 and layer.max() <= 0.5

    def test_default_scale(self):
        assert TrainConfig().init_scale == DEFAULT_INIT_SCALE == 0.5

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(init="xavier")
        with pytest.raises(ValueError):
            TrainConfig(init_scale=0.0)


class TestPeelTargets:
    def test_identity_peel(self):
        rng = np.random.default_rng(0)
        spec = NetworkSpec.build(2, [3, 3])
        Y = rng.uniform(0.1, 2.0, size=(6, 3))
        G = peel_targets(Y, identity_stack(spec), spec, TrainConfig())
        np.testing.assert_allclose(G.target(1), act_inv(F, Y), atol=1e-12)
        np.testing.assert_array_equal(G.target(2), Y)

    def test_composed_identity_peel(self):
        rng = np.random.default_rng(1)
        spec = NetworkSpec.build(2, [2, 2, 2])
        Y = rng.uniform(1.0, 3.0, size=(5, 2))
        G = peel_targets(Y, identity_stack(spec), spec, TrainConfig())
        np.testing.assert_allclose(G.target(1), act_inv(F, act_inv(F, Y)), atol=1e-12)
        assert G.clip_counts == {3: 0, 2: 0, 1: 0}
        np.testing.assert_array_equal(G.inverse(1), act_inv(F, G.target(1)))
        np.testing.assert_array_equal(G.inverse(3), act_inv(F, Y))

    def test_xor_targets_are_finite(self):
        xor = gen_xor()
        spec = NetworkSpec.build(2, [2, 1])
        G = peel_targets(xor.Y, init_weights(spec, TrainConfig(seed=5)), spec, TrainConfig())
        assert G.target(1).shape == (4, 2)
        assert np.isfinite(G.target(1)).all()

    def test_clip_counts_are_the_reported_ones(self):
        xor = gen_xor()
        spec = NetworkSpec.build(2, [2, 2, 1])
        cfg = TrainConfig(seed=3)
        G = peel_targets(xor.Y, init_weights(spec, cfg), spec, cfg)
        _, report = train(xor.X, xor.Y, spec, cfg)
        assert report.clip_events == G.clip_counts
        assert set(G.clip_counts) == {1, 2, 3}

    def test_counts_one_pinv_per_peeled_layer(self):
        spec = NetworkSpec.build(2, [3, 3, 3, 1])
        counter = CountingPinv()
        peel_targets(np.full((4, 1), 0.5), init_weights(spec, TrainConfig()), spec, TrainConfig(), counter)
        assert counter.calls == 3

    def test_unclipped_violation(self):
        spec = NetworkSpec.build(2, [2, 1])
        Y = np.array([[0.5], [-1.0]])
        with pytest.raises(DomainViolation) as info:
            peel_targets(Y, init_weights(spec, TrainConfig()), spec, TrainConfig(inverse_clip=False))
        assert info.value.layer == 2


class TestBackSubstitute:
    def test_xor_exact_fit_with_four_hidden(self):
        xor = gen_xor()
        spec = NetworkSpec.build(2, [4, 1])
        cfg = TrainConfig(seed=0)
        G = peel_targets(xor.Y, init_weights(spec, cfg), spec, cfg)
        X = augment(xor.X)
        W = back_substitute(X, xor.Y, G, spec, cfg)
        assert np.max(np.abs(forward(spec, W, X) - xor.Y)) < 1e-3

    @pytest.mark.parametrize("mode", [SVD_TRUNCATION, RIDGE_LIMIT])
    def test_recovers_generating_net(self, mode):
        rng = np.random.default_rng(12)
        spec = NetworkSpec.build(3, [4, 2])
        X = augment(rng.uniform(-2.0, 2.0, size=(30, 3)))
        G1 = act(F, X.X_aug @ rng.standard_normal((4, 4)))
        Y = act(F, with_ones(G1) @ (0.5 * rng.standard_normal((5, 2))))
        W = back_substitute(X, Y, given_targets(G1, Y), spec, TrainConfig(pinv=PinvConfig(mode)))
        assert np.max(np.abs(forward(spec, W, X) - Y)) < 1e-5

    def test_rejects_foreign_targets(self):
        xor = gen_xor()
        spec = NetworkSpec.build(2, [2, 1])
        cfg = TrainConfig()
        G = peel_targets(xor.Y, init_weights(spec, cfg), spec, cfg)
        with pytest.raises(ShapeMismatch):
            back_substitute(augment(xor.X), 1.0 - xor.Y, G, spec, cfg)


class TestTrain:
    @pytest.mark.parametrize("widths", [[2, 1], [3, 3, 1], [2, 2, 2, 2, 1]])
    def test_single_pass_pinv_count(self, widths):
        xor = gen_xor()
        _, report = train(xor.X, xor.Y, NetworkSpec.build(2, widths), TrainConfig(seed=1))
        assert report.pinv_calls == 2 * len(widths) - 1
        assert report.bias_rows_from_init

    def test_bitwise_reproducible(self):
        xor = gen_xor()
        spec = NetworkSpec.build(2, [2, 1])
        W1, _ = train(xor.X, xor.Y, spec, TrainConfig(seed=42))
        W2, _ = train(xor.X, xor.Y, spec, TrainConfig(seed=42))
        for a, b in zip(W1.layers, W2.layers):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("widths", [[2, 1], [2, 2, 2, 2, 1]])
    def test_xor_solved_for_most_seeds(self, widths):
        xor = gen_xor()
        spec = NetworkSpec.build(2, widths)
        solved = 0
        for seed in range(10):
            W, _ = train(xor.X, xor.Y, spec, TrainConfig(seed=seed))
            if accuracy(predict(spec, W, xor.X), xor.labels) == 100.0:
                solved += 1
        assert solved >= 8

    def test_sinc_interpolates_when_underdetermined(self):
        sinc = clean_sinc()
        fits = {}
        for h in (8, 6):
            spec = NetworkSpec.build(1, [h, 1])
            fits[h] = min(
                mse(predict(spec, W, sinc.X), sinc.Y)
                for W, _ in (train(sinc.X, sinc.Y, spec, wide_init(s)) for s in range(5))
            )
        assert fits[8] < 1e-4
        assert fits[6] > fits[8]

    def test_interpolates_every_full_rank_seed(self):
        sinc = clean_sinc()
        trusted = 0
        for X_raw, Y, h in [(sinc.X, sinc.Y, 8), (sinc.X[::2], sinc.Y[::2], 3)]:
            spec = NetworkSpec.build(1, [h, 1])
            assert is_underdetermined(spec, len(Y))
            X = augment(X_raw, force=True)
            for scale in (DEFAULT_INIT_SCALE, 1.0):
                for seed in range(10):
                    W, _ = train(X_raw, Y, spec, TrainConfig(seed=seed, init_scale=scale))
                    A = hidden_activations(spec, W, X)[0]
                    if rank(A, PinvConfig(rcond=TRUSTED_RCOND)) < len(Y):
                        continue
                    trusted += 1
                    residual = np.linalg.norm(forward(spec, W, X) - Y) / np.linalg.norm(Y)
                    assert residual < 1e-4, (h, scale, seed)
        assert trusted > 0

    def test_five_layer_sinc(self):
        sinc = clean_sinc()
        fits = {}
        for h in (8, 6):
            spec = NetworkSpec.build(1, [1, 1, 1, h, 1])
            fits[h] = min(
                mse(predict(spec, W, sinc.X), sinc.Y)
                for W, _ in (train(sinc.X, sinc.Y, spec, wide_init(s)) for s in range(10))
            )
        assert fits[8] < 1e-3
        assert fits[6] > fits[8]

    def test_three_spiral_training_accuracy(self):
        spiral = gen_spiral(SpiralConfig())
        assert spiral.m == 1500
        spec = NetworkSpec.build(2, [100, 3])
        best = max(
            accuracy(predict(spec, W, spiral.X), spiral.labels)
            for W, _ in (train(spiral.X, spiral.Y, spec, wide_init(s)) for s in range(3))
        )
        assert best >= 95.0

    @pytest.mark.parametrize("widths", [[3, 3, 1], [5, 3]])
    def test_output_residual_is_the_least_squares_minimum(self, widths):
        data = gen_xor() if widths[-1] == 1 else gen_spiral(SpiralConfig(points_per_arm=30, seed=4))
        spec = NetworkSpec.build(2, widths)
        W, report = train(data.X, data.Y, spec)
        A = hidden_activations(spec, W, augment(data.X, force=True))[-1]
        T = act_inv(F, data.Y)
        best = sse(A, solve_min_norm(A, T), T)
        assert report.layer_residuals[spec.n_layers] ** 2 == pytest.approx(best, rel=1e-8, abs=1e-8)

    def test_ridge_mode_flattens_xor(self):
        # lam swamps every direction of A_1 but the constant one, so all rows
        # get f(mean of f^-1(Y))
        xor = gen_xor()
        spec = NetworkSpec.build(2, [4, 1])
        W, report = train(xor.X, xor.Y, spec, TrainConfig(pinv=PinvConfig(RIDGE_LIMIT)))
        assert report.pinv_mode == RIDGE_LIMIT
        assert report.pinv_calls == 3
        flat = act(F, np.mean(act_inv(F, xor.Y)))
        assert flat == pytest.approx(0.3502, abs=1e-4)
        np.testing.assert_allclose(predict(spec, W, xor.X), np.full((4, 1), flat), atol=1e-2)

    def test_shape_checks(self):
        xor = gen_xor()
        with pytest.raises(ShapeMismatch):
            train(xor.X, xor.Y, NetworkSpec.build(3, [2, 1]))
        with pytest.raises(ShapeMismatch):
            train(xor.X, xor.Y, NetworkSpec.build(2, [2, 2]))

    def test_clip_events_reported(self):
        xor = gen_xor()
        _, report = train(xor.X, xor.Y, NetworkSpec.build(2, [2, 2, 1]), TrainConfig(seed=3))
        assert set(report.clip_events) == {1, 2, 3}
        assert report.total_clip_events == sum(report.clip_events.values())

    def test_report_record(self):
        xor = gen_xor()
        _, report = train(xor.X, xor.Y, NetworkSpec.build(2, [2, 1]), TrainConfig(seed=9))
        record = report.to_record()
        assert "seed = 9\n" in record
        assert "pinv_calls = 3\n" in record
        assert "rng = numpy.random.PCG64\n" in record
        assert "wall_time" not in report.to_record(include_timing=False)


class TestKarTrainer:
    def test_fit_predict(self):
        xor = gen_xor()
        trainer = KarTrainer(NetworkSpec.build(2, [4, 1]), TrainConfig(seed=0))
        W, report = trainer.fit(xor.X, xor.Y)
        assert report.pinv_calls == 3
        assert trainer.weights is W
        np.testing.assert_allclose(trainer.predict(xor.X), xor.Y, atol=1e-3)

    def test_predict_before_fit(self):
        with pytest.raises(RuntimeError):
            KarTrainer(NetworkSpec.build(2, [2, 1])).predict(np.ones((1, 2)))
