"""Fully-connected undercomplete autoencoder trained with Adam on cycle vectors.

Every layer except the last is ``relu(W a + b)``; the output layer is affine.
Parameters live in one flat float64 vector during training so the optimizer
update is a single vectorised expression; :class:`AutoencoderModel` exposes
them as per-layer matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError, ShapeError, TrainingDivergenceError

log = logging.getLogger(__name__)

DEFAULT_LAYERS = (32, 15, 10, 15, 32)


def _check_dims(layer_dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 3:
        raise ConfigurationError(f"need input, at least one hidden and an output layer, got {dims}")
    if any(d <= 0 for d in dims):
        raise ConfigurationError(f"layer dimensions must be positive, got {dims}")
    if dims[0] != dims[-1]:
        raise ConfigurationError(f"input and output dimensions differ: {dims}")
    if any(d >= dims[0] for d in dims[1:-1]):
        raise ConfigurationError(f"every hidden layer must be narrower than the input: {dims}")
    return dims


def n_parameters(layer_dims: Sequence[int]) -> int:
    return sum(o * i + o for i, o in zip(layer_dims[:-1], layer_dims[1:]))


def _views(layer_dims: Sequence[int], flat: np.ndarray):
    """Per-layer weight/bias views into a flat parameter vector."""
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(flat[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in))
        pos += fan_out * fan_in
        biases.append(flat[pos:pos + fan_out])
        pos += fan_out
    return weights, biases


@dataclass(frozen=True)
class AutoencoderModel:
    """Layer sizes plus ``weights[k]`` (dim_{k+1} x dim_k) and ``biases[k]``."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        dims = _check_dims(self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("need one weight matrix and one bias vector per layer transition")
        weights, biases = [], []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.array(w, dtype=float)
            b = np.array(b, dtype=float)
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise ShapeError(
                    f"layer {k}: expected W {(dims[k + 1], dims[k])} and b {(dims[k + 1],)}, "
                    f"got {w.shape} and {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {k} has non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            weights.append(w)
            biases.append(b)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def bottleneck_layer(self) -> int:
        """Index into ``layer_dims`` of the narrowest hidden layer."""
        hidden = self.layer_dims[1:-1]
        return 1 + hidden.index(min(hidden))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    @classmethod
    def from_flat(cls, layer_dims, flat) -> "AutoencoderModel":
        dims = _check_dims(layer_dims)
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (n_parameters(dims),):
            raise ShapeError(f"expected {n_parameters(dims)} parameters, got {flat.shape}")
        weights, biases = _views(dims, flat.copy())
        return cls(dims, tuple(weights), tuple(biases))

    @classmethod
    def initialize(cls, layer_dims, seed: int = 0) -> "AutoencoderModel":
        """Glorot-uniform weights, zero biases."""
        return cls.from_flat(layer_dims, _init_flat(_check_dims(layer_dims), np.random.default_rng(seed)))

    @classmethod
    def zeros(cls, layer_dims) -> "AutoencoderModel":
        dims = _check_dims(layer_dims)
        return cls.from_flat(dims, np.zeros(n_parameters(dims)))


def _init_flat(dims, rng: np.random.Generator) -> np.ndarray:
    flat = np.zeros(n_parameters(dims))
    weights, _ = _views(dims, flat)
    for w in weights:
        fan_out, fan_in = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    return flat


def _forward(weights, biases, x: np.ndarray):
    """Return (pre-activations, activations); activations[0] is the input."""
    pre, acts = [], [x]
    last = len(weights) - 1
    a = x
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        a = z if k == last else np.maximum(z, 0.0)
        pre.append(z)
        acts.append(a)
    return pre, acts


def _check_batch(model: AutoencoderModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (model.input_dim,) or x.ndim > 2:
        raise ShapeError(f"expected input of dimension {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("autoencoder input contains non-finite values")
    return x


def forward(model: AutoencoderModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct ``x`` (vector or batch of rows).

    Returns ``(reconstruction, bottleneck_activation)``.
    """
    x = _check_batch(model, x)
    _, acts = _forward(model.weights, model.biases, x)
    return acts[-1], acts[model.bottleneck_layer]


def reconstruct(model: AutoencoderModel, x) -> np.ndarray:
    return forward(model, x)[0]


def loss(x, x_rec) -> float:
    """Squared error averaged over samples and features."""
    x = np.asarray(x, dtype=float)
    x_rec = np.asarray(x_rec, dtype=float)
    if x.shape != x_rec.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {x_rec.shape}")
    return float(np.mean((x - x_rec) ** 2))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


def _backprop(weights, biases, x: np.ndarray):
    pre, acts = _forward(weights, biases, x)
    diff = acts[-1] - x
    batch_loss = float(np.mean(diff * diff))
    delta = diff * (2.0 / diff.size)
    gw: list[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    for k in range(len(weights) - 1, -1, -1):
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        if k:
            # ReLU gate; subgradient 0 at exactly 0
            delta = (delta @ weights[k]) * (pre[k - 1] > 0.0)
    return batch_loss, gw, gb


def backward(model: AutoencoderModel, x) -> Gradients:
    """Exact gradient of :func:`loss` (reconstruction of ``x``) w.r.t. every parameter."""
    x = np.atleast_2d(_check_batch(model, x))
    if x.shape[0] == 0:
        raise ShapeError("empty batch")
    _, gw, gb = _backprop(model.weights, model.biases, x)
    return Gradients(gw, gb)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigurationError("Adam betas must lie in [0, 1) and eps must be > 0")


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              config: TrainConfig) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on flat parameter/gradient vectors."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ShapeError("params, grads and optimizer state must share one shape")
    t = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grads
    v = config.beta2 * state.v + (1.0 - config.beta2) * grads * grads
    m_hat = m / (1.0 - config.beta1 ** t)
    v_hat = v / (1.0 - config.beta2 ** t)
    new = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return new, AdamState(m, v, t)


@dataclass
class LossHistory:
    train: list[float] = field(default_factory=list)
    validation: list[float] = field(default_factory=list)


def train(train_x, val_x, layer_dims=DEFAULT_LAYERS,
          config: TrainConfig = TrainConfig()) -> tuple[AutoencoderModel, LossHistory]:
    """Mini-batch Adam training on the rows of ``train_x``.

    The train loss recorded per epoch is the sample-weighted mean of the
    mini-batch losses seen during the epoch; the validation loss is evaluated
    with the parameters at the end of the epoch. The final-epoch model is
    returned (no early stopping).
    """
    dims = _check_dims(layer_dims)
    train_x = np.asarray(train_x, dtype=float)
    val_x = np.asarray(val_x, dtype=float)
    for name, arr in (("train", train_x), ("validation", val_x)):
        if arr.ndim != 2 or arr.shape[1] != dims[0]:
            raise ShapeError(f"{name} matrix must have {dims[0]} columns, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{name} matrix contains non-finite values")
    if train_x.shape[0] == 0:
        raise ShapeError("empty training matrix")

    rng = np.random.default_rng(config.seed)
    params = _init_flat(dims, rng)
    state = AdamState.zeros(params.size)
    history = LossHistory()
    n = train_x.shape[0]

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = train_x[order[start:start + config.batch_size]]
            weights, biases = _views(dims, params)
            batch_loss, gw, gb = _backprop(weights, biases, batch)
            total += batch_loss * batch.shape[0]
            grads = np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(gw, gb)])
            params, state = adam_step(params, grads, state, config)
        train_loss = total / n
        if val_x.shape[0]:
            weights, biases = _views(dims, params)
            _, acts = _forward(weights, biases, val_x)
            val_loss = float(np.mean((acts[-1] - val_x) ** 2))
        else:
            val_loss = float("nan")
        if not np.isfinite(train_loss) or not np.all(np.isfinite(params)):
            raise TrainingDivergenceError(epoch)
        history.train.append(train_loss)
        history.validation.append(val_loss)
        log.debug("epoch %d: train %.6g, validation %.6g", epoch, train_loss, val_loss)

    return AutoencoderModel.from_flat(dims, params), history


def residuals(model: AutoencoderModel, matrix) -> np.ndarray:
    """Reconstruction error ``X - X_rec`` row by row."""
    x = np.asarray(getattr(matrix, "data", matrix), dtype=float)
    return x - reconstruct(model, x)
