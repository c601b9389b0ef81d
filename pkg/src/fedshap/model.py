"""Dense softmax classifier with hand-rolled backprop.

All parameters of a model live in one flat float64 vector so the server can
treat client models as points in R^P and aggregate them coordinate-wise.
Everything here is a pure function of its explicit inputs (including seeds);
repeated calls are bitwise-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of the fully connected classifier."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be positive")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation: {self.activation!r}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def param_count(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes())


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels in [0, num_classes)."""

    features: Array
    labels: Array
    num_classes: int

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ValueError("labels length must match feature rows")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("label out of class range")

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class TrainConfig:
    """Local training hyperparameters (epochs is the per-round pass count)."""

    epochs: int
    batch_size: int
    learning_rate: float

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EvalResult:
    loss: float
    accuracy: float


def check_params(params: Array, spec: ModelSpec) -> Array:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != spec.param_count:
        raise ValueError(
            f"expected {spec.param_count} parameters, got shape {params.shape}"
        )
    if not np.all(np.isfinite(params)):
        raise ValueError("parameters contain non-finite values")
    return params


def _unpack(params: Array, spec: ModelSpec) -> Iterator[tuple[Array, Array]]:
    offset = 0
    for fan_in, fan_out in spec.layer_shapes():
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        yield w, b


def init_model(spec: ModelSpec, seed: int) -> Array:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in spec.layer_shapes():
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return np.concatenate(chunks)


def forward_logits(params: Array, spec: ModelSpec, features: Array) -> Array:
    z = features
    layers = list(_unpack(params, spec))
    for w, b in layers[:-1]:
        z = np.maximum(z @ w + b, 0.0)
    w, b = layers[-1]
    return z @ w + b


def _log_softmax(logits: Array) -> Array:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def evaluate(params: Array, spec: ModelSpec, data: Dataset) -> EvalResult:
    """Exact mean cross-entropy and accuracy over all examples."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    params = check_params(params, spec)
    logits = forward_logits(params, spec, data.features)
    log_probs = _log_softmax(logits)
    n = len(data)
    loss = -log_probs[np.arange(n), data.labels].mean()
    correct = int((logits.argmax(axis=1) == data.labels).sum())
    return EvalResult(loss=float(loss), accuracy=correct / n)


def loss_and_grad(
    params: Array, spec: ModelSpec, features: Array, labels: Array
) -> tuple[float, Array]:
    """Mean cross-entropy on the batch and its gradient w.r.t. the flat params."""
    n = features.shape[0]
    layers = list(_unpack(params, spec))

    pre_acts = []
    activations = [features]
    z = features
    for w, b in layers[:-1]:
        a = z @ w + b
        pre_acts.append(a)
        z = np.maximum(a, 0.0)
        activations.append(z)
    w, b = layers[-1]
    logits = z @ w + b

    log_probs = _log_softmax(logits)
    loss = -log_probs[np.arange(n), labels].mean()

    probs = np.exp(log_probs)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads: list[Array] = []
    for layer_idx in range(len(layers) - 1, -1, -1):
        w, _ = layers[layer_idx]
        grad_w = activations[layer_idx].T @ delta
        grad_b = delta.sum(axis=0)
        grads.append(grad_b)
        grads.append(grad_w.ravel())
        if layer_idx > 0:
            delta = (delta @ w.T) * (pre_acts[layer_idx - 1] > 0.0)
    grads.reverse()
    return float(loss), np.concatenate(grads)


def local_train(
    params: Array, spec: ModelSpec, data: Dataset, cfg: TrainConfig, seed: int
) -> Array:
    """Minibatch SGD on mean cross-entropy; shuffling derives from seed only."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    params = check_params(params, spec)
    if cfg.epochs == 0:
        return params.copy()
    rng = np.random.default_rng(seed)
    w = params.copy()
    n = len(data)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, grad = loss_and_grad(w, spec, data.features[batch], data.labels[batch])
            w -= cfg.learning_rate * grad
    return w


def global_objective(
    params: Array, spec: ModelSpec, client_data: Sequence[Dataset]
) -> float:
    """Unweighted mean of the per-client evaluation losses."""
    if len(client_data) == 0:
        raise ValueError("need at least one client dataset")
    return float(
        np.mean([evaluate(params, spec, data).loss for data in client_data])
    )
