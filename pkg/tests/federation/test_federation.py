"""
Federated round tests: local training, aggregation rules and the server loop.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from pydantic import ValidationError

from attacks.spec import AttackKind, AttackSpec
from federation import (
    AggregatorKind,
    AggregatorSpec,
    Client,
    FederationConfig,
    RoundReport,
    aggregate_baseline,
    apply_global_update,
    build_aggregator,
    client_round,
    collect_updates,
    fedavg,
    run_round,
)
from network.layers import Activation, Layer, LayerSpec, WeightSet
from utils.exceptions import AggregationError, ClientTrainingError, ConfigurationError, TrainingDivergenceError


def _scalar_weights(value: float) -> WeightSet:
    """One 1x1 Identity layer holding ``value`` as its weight."""
    return WeightSet([Layer(np.array([[value]]), np.array([0.0]), LayerSpec(1, 1, Activation.IDENTITY))])


def _random_weights(rng: np.random.Generator, specs: list[LayerSpec]) -> WeightSet:
    return WeightSet([
        Layer(rng.normal(size=(s.output_size, s.input_size)), rng.normal(size=s.output_size), s) for s in specs
    ])


class _RejectIds:
    """Defense stub rejecting a fixed set of client ids."""

    def __init__(self, rejected: set[int]):
        self.rejected = rejected

    def defend(self, global_weights, updates, round_index):
        ids = tuple(u.client_id for u in updates)
        survivors = [u for u in updates if u.client_id not in self.rejected]
        return survivors, RoundReport(round=round_index, client_ids=ids,
                                      survivors=tuple(u.client_id for u in survivors))


@pytest.fixture
def federation_cfg() -> FederationConfig:
    """Two local epochs at lr 0.05 with batches of 16."""
    return FederationConfig(num_benign=3, num_malicious=1, rounds=2, local_epochs=2, local_lr=0.05,
                            batch_size=16, seed=7)


@pytest.fixture
def clients(toy_dataset) -> list[Client]:
    """Four clients on 60-row slices of the toy dataset; client 3 flips labels."""
    flip = AttackSpec(kind=AttackKind.LABEL_FLIP_UNTARGETED, seed=1)
    return [
        Client(client_id=cid, dataset=toy_dataset.subset(np.arange(cid * 60, (cid + 1) * 60)),
               attack=flip if cid == 3 else None)
        for cid in range(4)
    ]


@pytest.mark.federation
@pytest.mark.smoke
class TestFederationConfig:
    """Federation settings."""

    def test_malicious_majority_rejected(self):
        """Test that 2r >= k + r is invalid."""
        with pytest.raises(ValidationError):
            FederationConfig(num_benign=2, num_malicious=2, rounds=1)

    def test_delta(self):
        """Test the attacker ratio."""
        assert FederationConfig(num_benign=40, num_malicious=10, rounds=1).delta == pytest.approx(0.2)

    def test_local_seed_owned_by_client_and_round(self, federation_cfg):
        """Test that shuffle seeds differ across clients and rounds but are reproducible."""
        seeds = {federation_cfg.local_train_config(c, t).seed for c in range(3) for t in range(3)}
        assert len(seeds) == 9
        assert federation_cfg.local_train_config(1, 2).seed == federation_cfg.local_train_config(1, 2).seed


@pytest.mark.federation
@pytest.mark.smoke
class TestClientRound:
    """Local training."""

    def test_zero_epochs_returns_global_state(self, small_weights, toy_dataset, federation_cfg):
        """Test that local_epochs=0 sends back the global weights unchanged."""
        cfg = federation_cfg.model_copy(update={"local_epochs": 0})
        update = client_round(small_weights, toy_dataset, cfg, client_id=2, round_index=0)
        assert update.weights.bitwise_equal(small_weights)

    def test_gamma_zero_attack_matches_benign(self, small_weights, toy_dataset, federation_cfg):
        """Test that a malicious client with a gamma=0 attack trains exactly like a benign one."""
        idle = AttackSpec(kind=AttackKind.LABEL_FLIP_UNTARGETED, gamma=0.0)
        benign = client_round(small_weights, toy_dataset, federation_cfg, client_id=1)
        malicious = client_round(small_weights, toy_dataset, federation_cfg, attack=idle, client_id=1)
        assert benign.weights.bitwise_equal(malicious.weights)

    def test_same_data_same_seed_identical(self, small_weights, toy_dataset, federation_cfg):
        """Test local training determinism."""
        first = client_round(small_weights, toy_dataset, federation_cfg, client_id=0, round_index=1)
        second = client_round(small_weights, toy_dataset, federation_cfg, client_id=0, round_index=1)
        assert first.weights.bitwise_equal(second.weights)
        assert first.num_samples == 240

    def test_global_weights_untouched(self, small_weights, toy_dataset, federation_cfg):
        """Test that the broadcast state is not modified by local training."""
        before = small_weights.copy()
        client_round(small_weights, toy_dataset, federation_cfg)
        assert small_weights.bitwise_equal(before)

    def test_divergence_names_the_client(self, monkeypatch, small_weights, toy_dataset, federation_cfg):
        """Test that a diverging client raises a client training error with its id."""
        def diverge(*args, **kwargs):
            raise TrainingDivergenceError("non-finite cross_entropy loss", epoch=1)

        monkeypatch.setattr("federation.client.fit", diverge)
        with pytest.raises(ClientTrainingError) as info:
            client_round(small_weights, toy_dataset, federation_cfg, client_id=5)
        assert info.value.client_id == 5
        assert "epoch 1" in str(info.value)


@pytest.mark.federation
@pytest.mark.smoke
class TestAggregation:
    """Aggregation rules."""

    def test_two_updates_average(self, make_update):
        """Test that weights 0.0 and 1.0 average to 0.5."""
        result = fedavg([make_update(0, _scalar_weights(0.0)), make_update(1, _scalar_weights(1.0))])
        assert result.layers[0].weights[0, 0] == 0.5

    def test_single_update_is_returned_exactly(self, make_update, small_weights):
        """Test that one update aggregates to itself."""
        assert fedavg([make_update(0, small_weights)]).bitwise_equal(small_weights)

    def test_fedavg_matches_brute_force_mean(self, make_update):
        """Test fedavg against an elementwise mean on 100 random update sets."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            sizes = rng.integers(1, 6, size=rng.integers(2, 4))
            specs = [LayerSpec(int(a), int(b), Activation.RELU) for a, b in zip(sizes, sizes[1:])]
            updates = [make_update(cid, _random_weights(rng, specs)) for cid in range(int(rng.integers(2, 21)))]
            result = fedavg(updates)
            for index, layer in enumerate(result.layers):
                stacked = np.stack([u.weights.layers[index].weights for u in updates])
                expected = sum(stacked[i] for i in range(len(updates))) / len(updates)
                np.testing.assert_allclose(layer.weights, expected, rtol=0, atol=1e-12)

    def test_order_independent(self, make_update):
        """Test that arrival order does not change the aggregate."""
        rng = np.random.default_rng(1)
        specs = [LayerSpec(3, 2, Activation.RELU)]
        updates = [make_update(cid, _random_weights(rng, specs)) for cid in range(6)]
        assert fedavg(updates).bitwise_equal(fedavg(list(reversed(updates))))

    @pytest.mark.parametrize("kind", [AggregatorKind.COORDINATE_MEDIAN, AggregatorKind.TRIMMED_MEAN])
    def test_robust_baselines_order_independent(self, make_update, kind):
        """Test that shuffling the updates leaves the median and trimmed-mean aggregates bitwise unchanged."""
        rng = np.random.default_rng(7)
        specs = [LayerSpec(4, 3, Activation.RELU), LayerSpec(3, 2, Activation.IDENTITY)]
        updates = [make_update(cid, _random_weights(rng, specs)) for cid in range(7)]
        spec = AggregatorSpec(kind=kind, trim_fraction=0.2)
        expected = aggregate_baseline(updates, spec)
        for order in (list(reversed(updates)), [updates[i] for i in rng.permutation(len(updates))]):
            assert aggregate_baseline(order, spec).bitwise_equal(expected)

    def test_empty_set_is_aggregation_error(self):
        """Test that nothing to aggregate raises."""
        with pytest.raises(AggregationError):
            fedavg([])

    def test_duplicate_ids_rejected(self, make_update, small_weights):
        """Test that the same client id twice is an aggregation error."""
        with pytest.raises(AggregationError, match="duplicate"):
            fedavg([make_update(1, small_weights), make_update(1, small_weights)])

    def test_mixed_architectures_rejected(self, make_update, small_weights):
        """Test that updates of different shapes cannot be combined."""
        with pytest.raises(AggregationError):
            fedavg([make_update(0, small_weights), make_update(1, _scalar_weights(1.0))])

    def test_coordinate_median(self, make_update):
        """Test that the median of {0, 1, 100} is 1."""
        updates = [make_update(i, _scalar_weights(v)) for i, v in enumerate([0.0, 1.0, 100.0])]
        result = aggregate_baseline(updates, AggregatorSpec(kind=AggregatorKind.COORDINATE_MEDIAN))
        assert result.layers[0].weights[0, 0] == 1.0

    def test_trimmed_mean(self, make_update):
        """Test that trimming 0.2 of {0, 1, 2, 3, 1000} averages {1, 2, 3}."""
        updates = [make_update(i, _scalar_weights(v)) for i, v in enumerate([0.0, 1.0, 2.0, 3.0, 1000.0])]
        result = aggregate_baseline(updates, AggregatorSpec(kind=AggregatorKind.TRIMMED_MEAN, trim_fraction=0.2))
        assert result.layers[0].weights[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_over_trimming_is_configuration_error(self, make_update):
        """Test that trimming every update away is rejected."""
        updates = [make_update(i, _scalar_weights(float(i))) for i in range(2)]
        with pytest.raises(ConfigurationError):
            aggregate_baseline(updates, AggregatorSpec(kind=AggregatorKind.TRIMMED_MEAN, trim_fraction=0.49))

    def test_clipped_noisy_degenerates_to_fedavg(self, make_update, small_weights):
        """Test that no clipping and zero noise reproduce fedavg."""
        rng = np.random.default_rng(2)
        updates = [make_update(cid, _random_weights(rng, small_weights.specs)) for cid in range(5)]
        spec = AggregatorSpec(kind=AggregatorKind.CLIPPED_NOISY, clip_norm=None, noise_std=0.0)
        result = aggregate_baseline(updates, spec, seed=3, global_weights=small_weights)
        np.testing.assert_allclose(result.flatten(), fedavg(updates).flatten(), rtol=0, atol=1e-12)

    def test_clipping_bounds_the_step(self, make_update):
        """Test that a clipped aggregate moves at most clip_norm from the global state."""
        origin = _scalar_weights(0.0)
        updates = [make_update(0, _scalar_weights(10.0)), make_update(1, _scalar_weights(-4.0))]
        spec = AggregatorSpec(kind=AggregatorKind.CLIPPED_NOISY, clip_norm=1.0)
        result = aggregate_baseline(updates, spec, global_weights=origin)
        assert result.layers[0].weights[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_clipped_noisy_needs_global_state(self, make_update):
        """Test that delta-based aggregation without the global state is a configuration error."""
        spec = AggregatorSpec(kind=AggregatorKind.CLIPPED_NOISY)
        with pytest.raises(ConfigurationError):
            aggregate_baseline([make_update(0, _scalar_weights(1.0))], spec)

    def test_noise_is_seeded(self, make_update, small_weights):
        """Test that the Gaussian noise of clipped_noisy follows the round seed."""
        updates = [make_update(0, small_weights)]
        aggregator = build_aggregator(AggregatorSpec(kind=AggregatorKind.CLIPPED_NOISY, noise_std=0.1))
        first = aggregator.aggregate(updates, small_weights, seed=4)
        assert first.bitwise_equal(aggregator.aggregate(updates, small_weights, seed=4))
        assert not first.bitwise_equal(aggregator.aggregate(updates, small_weights, seed=5))

    def test_global_learning_rate(self):
        """Test W + lr * (aggregate - W)."""
        result = apply_global_update(_scalar_weights(1.0), _scalar_weights(3.0), 0.5)
        assert result.layers[0].weights[0, 0] == 2.0
        assert apply_global_update(_scalar_weights(1.0), _scalar_weights(3.0), 1.0).layers[0].weights[0, 0] == 3.0


@pytest.mark.federation
@pytest.mark.regression
class TestRunRound:
    """Server round orchestration."""

    def test_undefended_round_is_fedavg(self, small_weights, clients, federation_cfg):
        """Test that without a defense the new state is the fedavg of all updates."""
        updates = collect_updates(small_weights, clients, federation_cfg, round_index=0)
        new_weights, report = run_round(small_weights, clients, federation_cfg, build_aggregator(), 0)
        assert new_weights.bitwise_equal(fedavg(updates))
        assert report.survivors == (0, 1, 2, 3)
        assert report.ground_truth_malicious == frozenset({3})
        assert report.train_loss is not None

    def test_defense_rejecting_nobody_matches_undefended(self, small_weights, clients, federation_cfg):
        """Test that a pass-through defense leaves the round unchanged."""
        plain, _ = run_round(small_weights, clients, federation_cfg, build_aggregator(), 0)
        defended, report = run_round(small_weights, clients, federation_cfg, build_aggregator(), 0, _RejectIds(set()))
        assert plain.bitwise_equal(defended)
        assert report.rejected == ()

    def test_rejecting_malicious_averages_benign_only(self, small_weights, clients, federation_cfg):
        """Test that dropping exactly the malicious ids averages the benign updates."""
        updates = collect_updates(small_weights, clients, federation_cfg, round_index=0)
        benign = [u for u in updates if u.client_id != 3]
        new_weights, report = run_round(small_weights, clients, federation_cfg, build_aggregator(), 0,
                                        _RejectIds({3}))
        assert new_weights.bitwise_equal(fedavg(benign))
        assert report.rejected == (3,)

    def test_threaded_collection_matches_sequential(self, small_weights, clients, federation_cfg):
        """Test that a thread pool produces the same sorted updates."""
        sequential = collect_updates(small_weights, clients, federation_cfg, round_index=1)
        with ThreadPoolExecutor(max_workers=3) as pool:
            threaded = collect_updates(small_weights, clients, federation_cfg, round_index=1, executor=pool)
        assert [u.client_id for u in threaded] == [0, 1, 2, 3]
        assert all(a.weights.bitwise_equal(b.weights) for a, b in zip(sequential, threaded))

