"""Tests for the MLP baseline: gradients, determinism and accuracy."""

from dataclasses import replace

import numpy as np
import pytest

from crop_spectra.core.constants import CROPS, CropLabel, StageLabel
from crop_spectra.core.dataset import Dataset, SampleRecord, WavelengthGrid
from crop_spectra.core.exceptions import ConfigError, ModelError
from crop_spectra.models import mlp
from crop_spectra.models.mlp import MLPConfig

SMALL = MLPConfig(hidden_layers=(16,), epochs=30, batch_size=16, learning_rate=0.05, seed=11)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs,pattern",
        [
            ({"hidden_layers": ()}, "1 or 2 widths"),
            ({"hidden_layers": (4, 4, 4)}, "1 or 2 widths"),
            ({"hidden_layers": (0,)}, ">= 1"),
            ({"dropout_rate": 1.0}, "dropout_rate"),
            ({"epochs": 0}, "epochs"),
            ({"batch_size": 0}, "batch_size"),
            ({"learning_rate": 0.0}, "learning_rate"),
            ({"momentum": -0.1}, "momentum"),
        ],
    )
    def test_invalid(self, kwargs, pattern):
        with pytest.raises(ConfigError, match=pattern):
            MLPConfig(**kwargs)

    def test_defaults(self):
        cfg = MLPConfig()
        assert cfg.hidden_layers == (256,), "Default is one hidden layer of 256 units"
        assert cfg.dropout_rate == 0.05, "Default dropout is 0.05"


class TestGradients:
    def test_random_small_networks(self, rng):
        for trial in range(20):
            if trial % 2:
                hidden = (int(rng.integers(2, 6)),)
            else:
                hidden = (int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            cfg = MLPConfig(hidden_layers=hidden, seed=int(rng.integers(0, 10_000)))
            bands = int(rng.integers(2, 6))
            x = rng.normal(size=(6, bands))
            targets = rng.integers(0, len(CROPS), size=6)
            worst = mlp.gradient_check(cfg, x, targets)
            assert worst < 1e-6, f"Trial {trial}: gradient discrepancy {worst:.3e} for layers {hidden}"

    def test_gradient_shapes(self, rng):
        params = mlp.initialize_parameters(3, (4, 2), rng)
        loss, grads = mlp.loss_and_gradients(params, rng.normal(size=(5, 3)), np.array([0, 1, 2, 3, 4]))
        assert loss > 0, "Cross-entropy is positive"
        assert [g.shape for g in grads.weights] == [(3, 4), (4, 2), (2, 5)], "Weight gradient shapes"
        assert [g.shape for g in grads.biases] == [(4,), (2,), (5,)], "Bias gradient shapes"

    def test_zero_weights_uniform_loss(self):
        params = mlp.NetworkParameters(
            (np.zeros((2, 3)), np.zeros((3, 5))), (np.zeros(3), np.zeros(5))
        )
        loss, _ = mlp.loss_and_gradients(params, np.ones((4, 2)), np.array([0, 1, 2, 3]))
        assert abs(loss - np.log(5)) < 1e-12, "Zero logits give log(5) loss"

    def test_dead_units_pass_no_gradient(self):
        params = mlp.NetworkParameters(
            (np.zeros((3, 4)), np.zeros((4, 5))), (np.zeros(4), np.zeros(5))
        )
        targets = np.array([0, 2])
        _, grads = mlp.loss_and_gradients(params, np.zeros((2, 3)), targets)
        for name, grad in [("W1", grads.weights[0]), ("b1", grads.biases[0]), ("W2", grads.weights[1])]:
            assert np.all(grad == 0.0), f"{name} gradient should vanish through dead ReLUs"
        expected = np.full(5, 0.2) - np.bincount(targets, minlength=5) / 2
        np.testing.assert_allclose(grads.biases[1], expected, atol=1e-15)

    def test_single_sample(self, rng):
        cfg = MLPConfig(hidden_layers=(5, 3), seed=19)
        worst = mlp.gradient_check(cfg, rng.normal(size=(1, 4)), np.array([3]))
        assert worst < 1e-6, f"Single-sample gradient discrepancy {worst:.3e}"


class TestTraining:
    def test_deterministic(self, separable_dataset):
        a = mlp.train(separable_dataset, SMALL)
        b = mlp.train(separable_dataset, SMALL)
        for wa, wb in zip(a.parameters.weights, b.parameters.weights):
            np.testing.assert_array_equal(wa, wb)
        assert a.loss_history == b.loss_history, "Same seed should give the same loss history"

    def test_seed_changes_weights(self, separable_dataset):
        a = mlp.train(separable_dataset, SMALL)
        b = mlp.train(separable_dataset, replace(SMALL, seed=12))
        assert not np.array_equal(a.parameters.weights[0], b.parameters.weights[0]), "Seeds should differ"

    def test_loss_decreases(self, separable_dataset):
        m = mlp.train(separable_dataset, SMALL)
        assert len(m.loss_history) == SMALL.epochs, "One loss per epoch"
        assert m.loss_history[-1] < m.loss_history[0], "Training loss should go down"

    @pytest.mark.parametrize("hidden", [(16,), (16, 8)])
    def test_separable_accuracy(self, separable_dataset, hidden):
        cfg = MLPConfig(hidden_layers=hidden, epochs=60, batch_size=16, learning_rate=0.05, seed=3)
        m = mlp.train(separable_dataset, cfg)
        predicted = mlp.predict_crops(m, separable_dataset.spectra)
        assert tuple(predicted) == separable_dataset.crops, "Separable classes should be learned exactly"

    def test_absent_crops_get_low_probability(self, separable_dataset):
        m = mlp.train(separable_dataset, SMALL)
        crop, probs = mlp.predict(m, separable_dataset.spectra[0])
        assert crop in (CropLabel.CORN, CropLabel.COTTON, CropLabel.RICE), "Predicted crop must be a trained one"
        assert abs(probs.sum() - 1.0) < 1e-12, "Probabilities sum to 1"
        assert probs[CROPS.index(CropLabel.SOYBEANS)] == 0.0, "Untrained crop gets probability 0"
        assert probs[CROPS.index(CropLabel.WINTER_WHEAT)] == 0.0, "Untrained crop gets probability 0"

    def test_single_crop_one_epoch(self, rng):
        grid = WavelengthGrid(tuple(500.0 + 100 * b for b in range(6)))
        records = tuple(
            SampleRecord(rng.uniform(5.0, 60.0, size=6), CropLabel.RICE, StageLabel.LATE)
            for _ in range(200)
        )
        ds = Dataset(grid, records)
        m = mlp.train(ds, MLPConfig(hidden_layers=(8,), epochs=1))
        assert m.trained_crops == (False, False, True, False, False), f"Trained crops {m.trained_crops}"
        assert set(mlp.predict_crops(m, ds.spectra)) == {CropLabel.RICE}, "Training spectra should all be Rice"
        unseen = rng.uniform(-100.0, 200.0, size=(50, 6))
        assert set(mlp.predict_crops(m, unseen)) == {CropLabel.RICE}, "Any input should be Rice"

    def test_output_biases_start_at_log_frequencies(self, separable_dataset):
        m = mlp.train(separable_dataset, replace(SMALL, epochs=1, learning_rate=1e-12))
        expected = np.log(np.array([41.0, 41.0, 41.0, 1.0, 1.0]) / 125.0)
        np.testing.assert_allclose(m.parameters.biases[-1], expected, atol=1e-6)

    def test_constant_band_is_standardized(self, separable_dataset):
        spectra = separable_dataset.spectra.copy()
        spectra[:, 0] = 1.0
        records = tuple(
            SampleRecord(row, r.crop, r.stage) for row, r in zip(spectra, separable_dataset.records)
        )
        m = mlp.train(Dataset(separable_dataset.grid, records), SMALL)
        assert np.all(np.isfinite(m.loss_history)), "Zero-variance band must not produce NaN"


class TestPrediction:
    def test_zero_weights_uniform(self):
        params = mlp.NetworkParameters(
            (np.zeros((3, 4)), np.zeros((4, 5))), (np.zeros(4), np.zeros(5))
        )
        m = mlp.MLPModel(params, feature_mean=np.zeros(3), feature_std=np.ones(3))
        crop, probs = mlp.predict(m, np.array([1.0, -2.0, 3.0]))
        np.testing.assert_allclose(probs, np.full(5, 0.2), atol=1e-15)
        assert crop == CropLabel.CORN, "Uniform probabilities resolve to the first crop"

    def test_probabilities_sum_to_one(self, separable_dataset, rng):
        m = mlp.train(separable_dataset, SMALL)
        probs = mlp.predict_proba(m, rng.normal(30.0, 40.0, size=(1000, 4)))
        assert probs.shape == (1000, 5), "One row per input"
        assert np.all(probs >= 0.0), "Probabilities are non-negative"
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_invalid_trained_crops(self):
        params = mlp.NetworkParameters((np.zeros((2, 5)),), (np.zeros(5),))
        with pytest.raises(ModelError, match="trained_crops"):
            mlp.MLPModel(params, np.zeros(2), np.ones(2), trained_crops=(False,) * 5)

    def test_dimension_mismatch(self, separable_dataset):
        m = mlp.train(separable_dataset, SMALL)
        with pytest.raises(ModelError, match="model expects 4"):
            mlp.predict_proba(m, np.zeros(3))

    def test_predict_needs_single(self, separable_dataset):
        m = mlp.train(separable_dataset, SMALL)
        with pytest.raises(ModelError, match="single spectrum"):
            mlp.predict(m, separable_dataset.spectra[:2])
