"""Rectified multilayer perceptron baseline over crop labels.

Dense layers with ReLU between them and a linear output of one logit per
crop, trained on softmax cross-entropy by mini-batch SGD with momentum.
Inputs are z-scored with training statistics. Dropout is inverted (kept
units scaled by 1 / (1 - p)) and applied after every hidden layer during
training only. The ReLU subgradient at 0 is 0.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from crop_spectra.core.constants import CROPS, DEFAULT_SEED, CropLabel
from crop_spectra.core.dataset import Dataset
from crop_spectra.core.exceptions import ConfigError, ModelError

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
GRADIENT_CHECK_STEP = 1e-5
# Denominator floor for relative discrepancies of near-zero gradients.
GRADIENT_CHECK_FLOOR = 1e-4


@dataclass(frozen=True)
class MLPConfig:
    """Network shape and optimizer settings."""

    hidden_layers: Tuple[int, ...] = (256,)
    dropout_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if len(self.hidden_layers) not in (1, 2):
            raise ConfigError(
                f"hidden_layers must list 1 or 2 widths, got {list(self.hidden_layers)}"
            )
        if any(width < 1 for width in self.hidden_layers):
            raise ConfigError(f"Hidden layer widths must be >= 1: {list(self.hidden_layers)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass(frozen=True, eq=False)
class NetworkParameters:
    """Layer weights (fan_in x fan_out) and biases, input to output."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def arrays(self) -> List[np.ndarray]:
        return list(self.weights) + list(self.biases)


@dataclass(frozen=True, eq=False)
class MLPModel:
    """Trained network plus the standardization statistics of its training data."""

    parameters: NetworkParameters
    feature_mean: np.ndarray
    feature_std: np.ndarray
    loss_history: Tuple[float, ...] = field(default=())
    # Crops present in the training data, in CROPS order; the others are never predicted.
    trained_crops: Tuple[bool, ...] = field(default=(True,) * len(CROPS))

    def __post_init__(self) -> None:
        object.__setattr__(self, "trained_crops", tuple(bool(t) for t in self.trained_crops))
        if len(self.trained_crops) != len(CROPS) or not any(self.trained_crops):
            raise ModelError(f"trained_crops must flag {len(CROPS)} crops, at least one trained")
        widths = [w.shape for w in self.parameters.weights]
        if widths[0][0] != self.feature_mean.shape[0]:
            raise ModelError("First layer does not match the input band count")
        for (_, fan_out), (fan_in, _) in zip(widths, widths[1:]):
            if fan_out != fan_in:
                raise ModelError("Layer shapes do not chain")
        if widths[-1][1] != len(CROPS):
            raise ModelError(f"Output layer must have {len(CROPS)} units")
        if np.any(self.feature_std <= 0):
            raise ModelError("Standardization std entries must be positive")

    @property
    def band_count(self) -> int:
        return int(self.feature_mean.shape[0])

    @property
    def hidden_layers(self) -> Tuple[int, ...]:
        return tuple(w.shape[1] for w in self.parameters.weights[:-1])


def initialize_parameters(
    input_size: int, hidden_layers: Sequence[int], rng: np.random.Generator
) -> NetworkParameters:
    """Symmetric uniform weights scaled by 1/sqrt(fan_in); zero biases."""
    sizes = [input_size, *hidden_layers, len(CROPS)]
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParameters(tuple(weights), tuple(biases))


def _forward(
    params: NetworkParameters,
    x: np.ndarray,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]]]:
    """Logits plus per-hidden-layer (input, pre-activation, dropout mask) cache."""
    cache = []
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = h @ w + b
        a = np.maximum(z, 0.0)
        mask = None
        if dropout_rate > 0.0 and rng is not None:
            mask = (rng.random(a.shape) >= dropout_rate) / (1.0 - dropout_rate)
            a = a * mask
        cache.append((h, z, mask))
        h = a
    logits = h @ params.weights[-1] + params.biases[-1]
    cache.append((h, logits, None))
    return logits, cache


def _cross_entropy(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    n = logits.shape[0]
    loss = -float(np.mean(log_probs[np.arange(n), targets]))
    grad = np.exp(log_probs)
    grad[np.arange(n), targets] -= 1.0
    return loss, grad / n


def _backward(
    params: NetworkParameters,
    cache: List[Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]],
    grad_logits: np.ndarray,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    n_layers = len(params.weights)
    grad_w: List[np.ndarray] = [np.empty(0)] * n_layers
    grad_b: List[np.ndarray] = [np.empty(0)] * n_layers
    upstream = grad_logits
    for layer in range(n_layers - 1, -1, -1):
        layer_input, _, _ = cache[layer]
        grad_w[layer] = layer_input.T @ upstream
        grad_b[layer] = upstream.sum(axis=0)
        if layer == 0:
            break
        upstream = upstream @ params.weights[layer].T
        _, z, mask = cache[layer - 1]
        if mask is not None:
            upstream = upstream * mask
        upstream = upstream * (z > 0.0)
    return grad_w, grad_b


def loss_and_gradients(
    params: NetworkParameters, x: np.ndarray, targets: np.ndarray
) -> Tuple[float, NetworkParameters]:
    """Dropout-free loss and analytic gradients on already standardized inputs."""
    logits, cache = _forward(params, np.asarray(x, dtype=float))
    loss, grad_logits = _cross_entropy(logits, np.asarray(targets, dtype=int))
    grad_w, grad_b = _backward(params, cache, grad_logits)
    return loss, NetworkParameters(tuple(grad_w), tuple(grad_b))


def _standardize(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (x - mean) / std


def train(ds: Dataset, cfg: MLPConfig, progress: bool = False) -> MLPModel:
    """Train a network on the dataset's crop labels.

    Deterministic for a given config seed: one generator drives
    initialization, shuffling and dropout masks. Output biases start at the
    add-one smoothed log crop frequencies. Crops missing from ``ds`` are
    never predicted.
    """
    rng = np.random.default_rng(cfg.seed)
    spectra = ds.spectra
    targets = ds.crop_indices()
    feature_mean = spectra.mean(axis=0)
    feature_std = np.maximum(spectra.std(axis=0), STD_FLOOR)
    x = _standardize(spectra, feature_mean, feature_std)
    n = x.shape[0]
    counts = np.bincount(targets, minlength=len(CROPS))

    params = initialize_parameters(ds.band_count, cfg.hidden_layers, rng)
    params.biases[-1][:] = np.log((counts + 1.0) / (n + len(CROPS)))
    arrays = params.arrays()
    velocity = [np.zeros_like(a) for a in arrays]
    history: List[float] = []

    epochs: Iterable[int] = range(cfg.epochs)
    if progress:
        epochs = tqdm(epochs, desc="MLP epochs", unit="epoch", leave=False)
    for epoch in epochs:
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            logits, cache = _forward(params, x[batch], cfg.dropout_rate, rng)
            loss, grad_logits = _cross_entropy(logits, targets[batch])
            grad_w, grad_b = _backward(params, cache, grad_logits)
            for value, grad, vel in zip(arrays, grad_w + grad_b, velocity):
                vel *= cfg.momentum
                vel -= cfg.learning_rate * grad
                value += vel
            total += loss * batch.size
        history.append(total / n)
        logger.debug("Epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, history[-1])

    return MLPModel(
        parameters=params,
        feature_mean=feature_mean,
        feature_std=feature_std,
        loss_history=tuple(history),
        trained_crops=tuple(bool(c) for c in counts > 0),
    )


def predict_proba(m: MLPModel, x: np.ndarray) -> np.ndarray:
    """Softmax crop probabilities (dropout off) for one spectrum or a batch.

    Untrained crops get probability exactly 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.band_count:
        raise ModelError(f"Spectrum has {x.shape[-1]} bands, model expects {m.band_count}")
    logits, _ = _forward(
        m.parameters, _standardize(np.atleast_2d(x), m.feature_mean, m.feature_std)
    )
    logits[:, ~np.array(m.trained_crops)] = -np.inf
    probs = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    return probs if x.ndim > 1 else probs[0]


def predict_crops(m: MLPModel, x: np.ndarray) -> List[CropLabel]:
    """Batch argmax crops, alphabetical on ties."""
    probs = np.atleast_2d(predict_proba(m, x))
    return [CROPS[i] for i in np.argmax(probs, axis=1)]


def predict(m: MLPModel, x: np.ndarray) -> Tuple[CropLabel, np.ndarray]:
    """Argmax crop and the probability vector over CROPS."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError("predict takes a single spectrum")
    probs = predict_proba(m, x)
    return CROPS[int(np.argmax(probs))], probs


def gradient_check(
    cfg: MLPConfig,
    x: np.ndarray,
    targets: np.ndarray,
    params: Optional[NetworkParameters] = None,
) -> float:
    """Worst relative gap between analytic and central-difference gradients.

    Runs without dropout on inputs taken as already standardized. Parameters
    are drawn from ``cfg.seed`` unless given. The relative gap of each entry
    is |analytic - numeric| / max(|analytic|, |numeric|, 1e-4).
    """
    x = np.asarray(x, dtype=float)
    targets = np.asarray(targets, dtype=int)
    if params is None:
        params = initialize_parameters(
            x.shape[1], cfg.hidden_layers, np.random.default_rng(cfg.seed)
        )
    params = NetworkParameters(
        tuple(w.copy() for w in params.weights), tuple(b.copy() for b in params.biases)
    )
    _, analytic = loss_and_gradients(params, x, targets)

    worst = 0.0
    for value, grad in zip(params.arrays(), analytic.arrays()):
        flat_value = value.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat_value.size):
            original = flat_value[i]
            flat_value[i] = original + GRADIENT_CHECK_STEP
            plus, _ = _forward(params, x)
            flat_value[i] = original - GRADIENT_CHECK_STEP
            minus, _ = _forward(params, x)
            flat_value[i] = original
            numeric = (
                _cross_entropy(plus, targets)[0] - _cross_entropy(minus, targets)[0]
            ) / (2.0 * GRADIENT_CHECK_STEP)
            scale = max(abs(flat_grad[i]), abs(numeric), GRADIENT_CHECK_FLOOR)
            worst = max(worst, abs(flat_grad[i] - numeric) / scale)
    logger.debug("Gradient check worst relative discrepancy %.3e", worst)
    return worst
