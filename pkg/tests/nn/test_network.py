"""
Dense network engine tests: initialisation, forward passes, exact gradients,
SGD training and the checkpoint codec.
"""
import numpy as np
import pytest

from network.layers import (
    Activation,
    ActivationProfile,
    Layer,
    LayerSpec,
    TrainConfig,
    WeightSet,
    classifier_specs,
    validate_specs,
)
from network.model import (
    LossKind,
    batch_loss,
    forward,
    init_weights,
    loss_and_gradient,
    predict,
)
from network.serialization import decode, encode, load_weights, save_weights
from network.training import fit, train
from defense.detector import DetectorNet, build_detector, detector_loss_and_gradient, subnet_specs
from utils.exceptions import (
    ConfigurationError,
    DatasetFormatError,
    InputError,
    ShapeError,
    TrainingDivergenceError,
)

FD_STEP = 1e-5
FD_RTOL = 1e-4


def _finite_difference_check(loss_fn, w: WeightSet, grad: WeightSet, rng: np.random.Generator,
                             per_layer: int = 8) -> None:
    """Compare sampled gradient entries of every layer against central differences."""
    flat = w.flatten()
    analytic = grad.flatten()
    start = 0
    for layer in w.layers:
        size = layer.weights.size + layer.bias.size
        for index in rng.choice(size, size=min(per_layer, size), replace=False) + start:
            plus, minus = flat.copy(), flat.copy()
            plus[index] += FD_STEP
            minus[index] -= FD_STEP
            numeric = (loss_fn(w.with_flat(plus)) - loss_fn(w.with_flat(minus))) / (2 * FD_STEP)
            tolerance = FD_RTOL * max(abs(numeric), abs(analytic[index])) + 1e-8
            assert abs(numeric - analytic[index]) <= tolerance, (
                f"parameter {index}: analytic {analytic[index]} vs numeric {numeric}"
            )
        start += size


def _with_random_biases(w: WeightSet, rng: np.random.Generator) -> WeightSet:
    """Replace zero biases so no pre-activation sits exactly on a ReLU kink."""
    return WeightSet([Layer(layer.weights, rng.uniform(-0.1, 0.1, size=layer.bias.shape), layer.spec)
                      for layer in w.layers])


def _identity_layer(size: int) -> WeightSet:
    return WeightSet([Layer(np.eye(size), np.zeros(size), LayerSpec(size, size, Activation.IDENTITY))])


@pytest.mark.nn
@pytest.mark.smoke
class TestLayerSpecs:
    """Layer specification validation."""

    def test_sizes_must_be_positive(self):
        """Test that zero-width layers are rejected."""
        with pytest.raises(ConfigurationError):
            LayerSpec(0, 2)

    def test_softmax_only_on_final_layer(self):
        """Test that a hidden Softmax layer is a configuration error."""
        specs = [LayerSpec(4, 3, Activation.SOFTMAX), LayerSpec(3, 2, Activation.SOFTMAX)]
        with pytest.raises(ConfigurationError, match="Softmax"):
            validate_specs(specs)

    def test_incompatible_chain_rejected(self):
        """Test that consecutive layers must agree on sizes."""
        with pytest.raises(ConfigurationError):
            validate_specs([LayerSpec(4, 3), LayerSpec(5, 2)])

    def test_weight_shape_must_match_spec(self):
        """Test that a WeightSet refuses arrays of the wrong shape."""
        with pytest.raises(ShapeError):
            WeightSet([Layer(np.zeros((2, 3)), np.zeros(2), LayerSpec(2, 2))])

    def test_classifier_chain(self):
        """Test the ReLU-hidden, Softmax-output classifier chain."""
        specs = classifier_specs(784, [256, 256, 128], 10)
        assert [s.output_size for s in specs] == [256, 256, 128, 10]
        assert [s.activation for s in specs] == [Activation.RELU] * 3 + [Activation.SOFTMAX]


@pytest.mark.nn
@pytest.mark.smoke
class TestInitWeights:
    """Seeded weight initialisation."""

    def test_same_seed_is_bitwise_identical(self):
        """Test that initialising twice with seed 7 gives identical weights."""
        specs = [LayerSpec(4, 2, Activation.RELU)]
        assert init_weights(specs, 7).bitwise_equal(init_weights(specs, 7))

    def test_different_seeds_differ(self):
        """Test that another seed draws other weights."""
        specs = [LayerSpec(4, 2, Activation.RELU)]
        assert not init_weights(specs, 7).bitwise_equal(init_weights(specs, 8))

    def test_biases_start_at_zero(self):
        """Test that every bias is exactly zero after init."""
        w = init_weights(classifier_specs(12, [6, 5], 3), seed=1)
        assert all(np.all(layer.bias == 0) for layer in w)

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_weights_within_fan_bound(self, dtype):
        """Test that weights stay inside +-sqrt(6 / (fan_in + fan_out))."""
        w = init_weights(classifier_specs(30, [20], 10), seed=3, dtype=dtype)
        for layer in w:
            bound = np.sqrt(6.0 / (layer.spec.input_size + layer.spec.output_size))
            assert np.abs(layer.weights.astype(np.float64)).max() <= bound
            assert layer.weights.dtype == dtype


@pytest.mark.nn
@pytest.mark.smoke
class TestForward:
    """Forward passes and activation profiles."""

    def test_identity_layer_passes_input_through(self):
        """Test that an identity-weight Identity layer maps [1, 2] to [1, 2]."""
        outputs, profiles = forward(_identity_layer(2), np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(outputs, [[1.0, 2.0]])
        np.testing.assert_array_equal(profiles[0].values, [1.0, 2.0])

    def test_softmax_rows_sum_to_one(self):
        """Test that Softmax outputs are non-negative and normalised for large inputs."""
        w = init_weights(classifier_specs(6, [5], 4), seed=2, dtype=np.float64)
        batch = np.random.default_rng(0).normal(0.0, 1000.0, size=(50, 6))
        outputs, _ = forward(w, batch)
        assert np.all(outputs >= 0)
        np.testing.assert_allclose(outputs.sum(axis=1), 1.0, atol=1e-6)

    def test_profile_length_of_reference_model(self):
        """Test that a 256/256/128 model with 10 classes yields a 650-long profile."""
        w = init_weights(classifier_specs(784, [256, 256, 128], 10), seed=0)
        _, profiles = forward(w, np.zeros((1, 784), dtype=np.float32))
        assert len(profiles[0]) == 650
        assert w.profile_length == 650
        assert profiles[0].layer_offsets == ((0, 256), (256, 256), (512, 128), (640, 10))

    def test_profile_offsets_partition_the_vector(self, small_weights):
        """Test that layer offsets are contiguous and cover the whole profile."""
        _, profiles = forward(small_weights, np.full((3, 16), 0.5))
        profile = profiles[0]
        assert sum(length for _, length in profile.layer_offsets) == len(profile)
        np.testing.assert_array_equal(np.concatenate([profile.layer(i) for i in range(profile.num_layers)]),
                                      profile.values)

    def test_bad_offsets_rejected(self):
        """Test that non-contiguous offsets are a shape error."""
        with pytest.raises(ShapeError):
            ActivationProfile(np.zeros(4), ((0, 2), (3, 1)))

    def test_width_mismatch_is_shape_error(self, small_weights):
        """Test that a batch of the wrong width is rejected."""
        with pytest.raises(ShapeError):
            forward(small_weights, np.zeros((2, 15)))

    def test_non_finite_input_is_input_error(self, small_weights):
        """Test that NaN inputs are rejected."""
        batch = np.zeros((2, 16))
        batch[1, 3] = np.nan
        with pytest.raises(InputError):
            forward(small_weights, batch)

    def test_predict_chunks_match_single_pass(self, small_weights):
        """Test that chunked prediction equals a single forward pass."""
        batch = np.random.default_rng(4).random((37, 16))
        outputs, _ = forward(small_weights, batch)
        np.testing.assert_array_equal(predict(small_weights, batch, chunk_size=5), outputs.argmax(axis=1))


@pytest.mark.nn
@pytest.mark.regression
class TestGradients:
    """Analytic gradients against finite differences and closed forms."""

    def test_cross_entropy_gradient_matches_finite_differences(self):
        """Test classifier gradients on a 20-20-10 network."""
        rng = np.random.default_rng(10)
        w = init_weights(classifier_specs(20, [20], 10), seed=2, dtype=np.float64)
        batch = rng.random((16, 20))
        labels = rng.integers(0, 10, size=16)
        _, grad = loss_and_gradient(w, batch, labels, LossKind.CROSS_ENTROPY)
        _finite_difference_check(lambda v: batch_loss(v, batch, labels, LossKind.CROSS_ENTROPY), w, grad, rng)

    def test_squared_error_gradient_matches_finite_differences(self):
        """Test squared-error gradients through a ReLU hidden layer."""
        rng = np.random.default_rng(11)
        specs = [LayerSpec(5, 7, Activation.RELU), LayerSpec(7, 3, Activation.IDENTITY)]
        w = init_weights(specs, seed=4, dtype=np.float64)
        batch, targets = rng.random((9, 5)), rng.random((9, 3))
        _, grad = loss_and_gradient(w, batch, targets, LossKind.SQUARED_ERROR)
        _finite_difference_check(lambda v: batch_loss(v, batch, targets, LossKind.SQUARED_ERROR), w, grad, rng)

    def test_layerwise_rmse_gradient_matches_finite_differences(self):
        """Test the sub-autoencoder reconstruction loss gradient."""
        rng = np.random.default_rng(12)
        w = _with_random_biases(init_weights(subnet_specs(20), seed=5, dtype=np.float64), rng)
        batch = rng.random((8, 20))
        _, grad = loss_and_gradient(w, batch, batch, LossKind.LAYERWISE_RMSE)
        _finite_difference_check(lambda v: batch_loss(v, batch, batch, LossKind.LAYERWISE_RMSE), w, grad, rng)

    def test_detector_gradient_matches_finite_differences(self):
        """Test the full detector loss gradient for every sub-network."""
        rng = np.random.default_rng(13)
        det = build_detector(classifier_specs(20, [20], 10), seed=1, dtype=np.float64)
        det = DetectorNet([_with_random_biases(subnet, rng) for subnet in det.subnets], det.layer_offsets)
        batch = rng.random((6, det.input_size))
        _, grads = detector_loss_and_gradient(det, batch)
        for index, (subnet, grad) in enumerate(zip(det.subnets, grads)):
            def loss_fn(candidate: WeightSet, index: int = index) -> float:
                subnets = list(det.subnets)
                subnets[index] = candidate
                return detector_loss_and_gradient(DetectorNet(subnets, det.layer_offsets), batch)[0]

            _finite_difference_check(loss_fn, subnet, grad, rng)

    def test_identity_bias_gradient_closed_form(self):
        """Test that the bias gradient of an Identity layer under squared error is 2(out - target)/n."""
        w = WeightSet([Layer(np.array([[0.5, -1.0, 2.0], [1.5, 0.0, -0.5]]), np.array([0.1, -0.2]),
                             LayerSpec(3, 2, Activation.IDENTITY))])
        x = np.array([[1.0, 2.0, 3.0]])
        target = np.array([[0.0, 1.0]])
        out, _ = forward(w, x)
        _, grad = loss_and_gradient(w, x, target, LossKind.SQUARED_ERROR)
        np.testing.assert_allclose(grad.layers[0].bias, 2.0 * (out[0] - target[0]) / 2, rtol=1e-12)

    def test_zero_residual_gives_zero_gradient(self):
        """Test that a perfect reconstruction has a vanishing layerwise gradient."""
        w = init_weights(subnet_specs(12), seed=6, dtype=np.float64)
        batch = np.random.default_rng(1).random((4, 12))
        outputs, _ = forward(w, batch)
        loss, grad = loss_and_gradient(w, batch, outputs, LossKind.LAYERWISE_RMSE)
        assert loss == 0.0
        assert np.linalg.norm(grad.flatten()) <= 1e-10

    def test_label_out_of_range_rejected(self, small_weights):
        """Test that labels beyond the output width are an input error."""
        with pytest.raises(InputError):
            loss_and_gradient(small_weights, np.zeros((1, 16)), np.array([4]), LossKind.CROSS_ENTROPY)


@pytest.mark.nn
class TestTraining:
    """Mini-batch SGD."""

    def test_zero_learning_rate_keeps_weights(self, small_weights, toy_dataset):
        """Test that lr=0 returns the input weights exactly."""
        cfg = TrainConfig(epochs=2, learning_rate=0.0, batch_size=20, seed=1)
        trained = train(small_weights, toy_dataset.samples.astype(np.float64), toy_dataset.labels, cfg)
        assert trained.bitwise_equal(small_weights)

    def test_input_weights_not_modified(self, small_weights, toy_dataset):
        """Test that training works on a copy."""
        before = small_weights.copy()
        fit(small_weights, toy_dataset.samples.astype(np.float64), toy_dataset.labels, TrainConfig(epochs=1))
        assert small_weights.bitwise_equal(before)

    def test_single_step_matches_hand_rolled_backprop(self):
        """Test one SGD step on a 2-2-2 network against a hand-derived gradient."""
        w1, b1 = np.array([[0.5, -0.2], [0.3, 0.8]]), np.array([0.1, 0.05])
        w2, b2 = np.array([[0.4, -0.6], [0.7, 0.2]]), np.array([0.0, 0.1])
        w = WeightSet([
            Layer(w1.copy(), b1.copy(), LayerSpec(2, 2, Activation.RELU)),
            Layer(w2.copy(), b2.copy(), LayerSpec(2, 2, Activation.SOFTMAX)),
        ])
        x, label, lr = np.array([1.0, 0.5]), 1, 0.1

        z1 = w1 @ x + b1
        a1 = np.maximum(z1, 0.0)
        z2 = w2 @ a1 + b2
        p = np.exp(z2 - z2.max())
        p /= p.sum()
        dz2 = p - np.eye(2)[label]
        dz1 = (w2.T @ dz2) * (z1 > 0)
        expected = [w1 - lr * np.outer(dz1, x), b1 - lr * dz1, w2 - lr * np.outer(dz2, a1), b2 - lr * dz2]

        trained = train(w, x[None, :], np.array([label]), TrainConfig(epochs=1, learning_rate=lr, batch_size=1))
        actual = [trained.layers[0].weights, trained.layers[0].bias, trained.layers[1].weights, trained.layers[1].bias]
        for got, want in zip(actual, expected):
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)

    def test_loss_decreases_on_separable_data(self):
        """Test that 5 epochs at lr 0.02, batch 20 lower the loss of a separable 2-class set."""
        rng = np.random.default_rng(5)
        labels = np.repeat([0, 1], 100)
        samples = np.where(labels[:, None] == 0, rng.uniform(0.0, 0.3, (200, 4)), rng.uniform(0.7, 1.0, (200, 4)))
        w = init_weights(classifier_specs(4, [8], 2), seed=0, dtype=np.float64)
        result = fit(w, samples, labels, TrainConfig(epochs=5, learning_rate=0.02, batch_size=20, seed=1))
        assert len(result.epoch_losses) == 5
        assert batch_loss(result.weights, samples, labels, LossKind.CROSS_ENTROPY) < \
            batch_loss(w, samples, labels, LossKind.CROSS_ENTROPY)

    def test_same_seed_same_result(self, small_weights, toy_dataset):
        """Test that training is deterministic for a fixed seed."""
        cfg = TrainConfig(epochs=2, learning_rate=0.05, batch_size=16, seed=9)
        samples = toy_dataset.samples.astype(np.float64)
        first = train(small_weights, samples, toy_dataset.labels, cfg)
        second = train(small_weights, samples, toy_dataset.labels, cfg)
        assert first.bitwise_equal(second)

    def test_divergence_raises_with_epoch(self):
        """Test that an exploding loss raises a training-divergence error."""
        w = _identity_layer(2)
        cfg = TrainConfig(epochs=3, learning_rate=1e200, batch_size=1, seed=0)
        with np.errstate(all="ignore"), pytest.raises(TrainingDivergenceError) as info:
            fit(w, np.ones((4, 2)), np.zeros((4, 2)), cfg, LossKind.SQUARED_ERROR)
        assert info.value.epoch == 0

    def test_invalid_config_rejected(self):
        """Test TrainConfig validation."""
        with pytest.raises(ConfigurationError):
            TrainConfig(batch_size=0)


@pytest.mark.nn
class TestSerialization:
    """Checkpoint codec."""

    def test_encode_decode_preserves_weights(self, small_weights):
        """Test that decoding an encoded WeightSet restores it bit for bit."""
        restored, header = decode(encode(small_weights, seed=42))
        assert restored.bitwise_equal(small_weights)
        assert header["seed"] == 42

    def test_save_and_load(self, tmp_path, small_weights):
        """Test checkpoint files on disk."""
        path = save_weights(small_weights.astype(np.float32), tmp_path / "ckpt" / "round_0000.fnw")
        assert load_weights(path).bitwise_equal(small_weights.astype(np.float32))

    def test_bad_magic(self, small_weights):
        """Test that a corrupted magic is a format error at offset 0."""
        payload = b"XXXX" + encode(small_weights)[4:]
        with pytest.raises(DatasetFormatError) as info:
            decode(payload)
        assert info.value.offset == 0

    def test_truncated_payload(self, small_weights):
        """Test that a cut-off checkpoint is a format error."""
        with pytest.raises(DatasetFormatError, match="truncated"):
            decode(encode(small_weights)[:-3])

    def test_trailing_bytes(self, small_weights):
        """Test that extra bytes after the payload are rejected."""
        with pytest.raises(DatasetFormatError, match="trailing"):
            decode(encode(small_weights) + b"\x00")
