"""Toy nonlinear testbed: a ReLU multilayer perceptron trained by full-batch
gradient descent, its empirical Fisher diagonal, and layer-wise quantization.

Parameters flatten layer by layer as ``W_1.ravel(), b_1, W_2.ravel(), b_2, ...``
with ``W_l`` of shape (out, in).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .compressors import Quantization, diameter_reg_quantize, reconstruct
from .errors import ParameterError, TrainingError

#: Standard deviation of the Gaussian feature noise in the crescent task.
MOONS_NOISE = 0.2


@dataclass(frozen=True)
class ClassifDataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int = 2

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
            raise ParameterError("inputs must be n x p and labels a length-n vector")
        if y.size < 1:
            raise ParameterError("dataset is empty")
        if self.n_classes < 2 or y.min() < 0 or y.max() >= self.n_classes:
            raise ParameterError("labels must lie in [0, n_classes) with n_classes >= 2")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass
class MlpModel:
    layer_dims: list
    weights: list
    biases: list
    loss_history: list = field(default_factory=list, repr=False)

    activation = "relu"

    @classmethod
    def init(cls, layer_dims: Sequence[int], seed=None) -> "MlpModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization."""
        dims = [int(v) for v in layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ParameterError(f"invalid layer dims {layer_dims}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(dims, weights, biases)

    @property
    def layer_sizes(self) -> list:
        """Parameter count of each layer (weights plus biases)."""
        return [w.size + b.size for w, b in zip(self.weights, self.biases)]

    @property
    def n_params(self) -> int:
        return sum(self.layer_sizes)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b])
                               for w, b in zip(self.weights, self.biases)])

    def unflatten(self, flat) -> "MlpModel":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ParameterError(f"expected {self.n_params} parameters, got {flat.size}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(flat[pos:pos + w.size].reshape(w.shape).copy())
            pos += w.size
            biases.append(flat[pos:pos + b.size].copy())
            pos += b.size
        return MlpModel(list(self.layer_dims), weights, biases)

    def logits(self, x: np.ndarray) -> np.ndarray:
        a = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if i == last else np.maximum(z, 0.0)
        return a


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(model: MlpModel, data: ClassifDataset) -> float:
    logp = _log_softmax(model.logits(data.inputs))
    return float(-logp[np.arange(data.n), data.labels].mean())


def _backprop(model: MlpModel, data: ClassifDataset):
    """Forward/backward pass; returns (mean loss, activations, per-sample output deltas)."""
    acts = [data.inputs]
    pre = []
    a = data.inputs
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    logp = _log_softmax(acts[-1])
    loss = float(-logp[np.arange(data.n), data.labels].mean())

    # per-sample gradient of the (unaveraged) loss w.r.t. each layer's pre-activation
    delta = np.exp(logp)
    delta[np.arange(data.n), data.labels] -= 1.0
    deltas = [None] * len(model.weights)
    for i in range(last, -1, -1):
        deltas[i] = delta
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0)
    return loss, acts, deltas


def loss_and_grad(model: MlpModel, data: ClassifDataset):
    """Mean cross-entropy and its gradient as a flat vector."""
    loss, acts, deltas = _backprop(model, data)
    parts = []
    for a, delta in zip(acts[:-1], deltas):
        parts.append((delta.T @ a).ravel() / data.n)
        parts.append(delta.sum(axis=0) / data.n)
    return loss, np.concatenate(parts)


def train_mlp(data: ClassifDataset, layer_dims: Sequence[int], epochs: int,
              learning_rate: float, seed=None) -> MlpModel:
    """Full-batch gradient descent on the mean cross-entropy.

    ``model.loss_history[e]`` is the training loss before update ``e``.
    """
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    if not learning_rate >= 0:
        raise ParameterError(f"learning_rate must be nonnegative, got {learning_rate}")
    if layer_dims[0] != data.inputs.shape[1] or layer_dims[-1] != data.n_classes:
        raise ParameterError(
            f"layer dims {list(layer_dims)} do not match {data.inputs.shape[1]} features"
            f" and {data.n_classes} classes")
    model = MlpModel.init(layer_dims, seed)
    flat = model.flatten()
    history = []
    for _ in range(int(epochs)):
        loss, grad = loss_and_grad(model, data)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError(f"training diverged at epoch {len(history)}")
        history.append(loss)
        if learning_rate:
            flat = flat - learning_rate * grad
            model = model.unflatten(flat)
    final = cross_entropy(model, data)
    if not math.isfinite(final):
        raise TrainingError("training diverged at the final epoch")
    model.loss_history = history + [final]
    return model


def fisher_diag(model: MlpModel, data: ClassifDataset) -> np.ndarray:
    """Empirical Fisher diagonal: mean over samples of the squared per-sample gradient."""
    _, acts, deltas = _backprop(model, data)
    parts = []
    for a, delta in zip(acts[:-1], deltas):
        parts.append(((delta * delta).T @ (a * a)).ravel() / data.n)
        parts.append((delta * delta).sum(axis=0) / data.n)
    return np.concatenate(parts)


def _per_layer(k_per_layer, n_layers):
    ks = [k_per_layer] * n_layers if np.isscalar(k_per_layer) else list(k_per_layer)
    if len(ks) != n_layers:
        raise ParameterError(f"need {n_layers} cluster counts, got {len(ks)}")
    if any(int(k) != k or k < 1 for k in ks):
        raise ParameterError(f"cluster counts must be positive integers, got {ks}")
    return [int(k) for k in ks]


def compression_ratio(model: MlpModel, k_per_layer) -> float:
    """Compressed size over 32-bit baseline, codebooks included.

    ``(sum_l d_l log2 k_l + 32 sum_l k_l) / (32 sum_l d_l)``; cluster counts
    above a layer's parameter count are clipped to it.
    """
    sizes = model.layer_sizes
    ks = [min(k, d) for k, d in zip(_per_layer(k_per_layer, len(sizes)), sizes)]
    bits = sum(d * math.log2(k) + 32 * k for d, k in zip(sizes, ks))
    return bits / (32 * sum(sizes))


class QuantizedMlp(NamedTuple):
    model: MlpModel
    layers: list
    compression_ratio: float


def quantize_mlp(model: MlpModel, h_diag, k_per_layer, beta: float = 0.0,
                 seed=None, max_iters: int = 100) -> QuantizedMlp:
    """Quantize each layer (weights and biases pooled) with its own codebook.

    A layer whose importances are all zero falls back to uniform importances.
    """
    h_diag = np.asarray(h_diag, dtype=np.float64)
    if h_diag.size != model.n_params:
        raise ParameterError(f"h_diag has {h_diag.size} entries, model has {model.n_params}")
    sizes = model.layer_sizes
    ks = _per_layer(k_per_layer, len(sizes))
    flat = model.flatten()
    out = np.empty_like(flat)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    layers: list[Quantization] = []
    pos = 0
    for size, k, ss in zip(sizes, ks, seeds):
        w = flat[pos:pos + size]
        h = h_diag[pos:pos + size]
        if not np.any(h > 0):
            h = np.ones(size)
        q = diameter_reg_quantize(w, h, min(k, size), beta, max_iters=max_iters,
                                  seed=np.random.default_rng(ss))
        out[pos:pos + size] = reconstruct(q)
        layers.append(q)
        pos += size
    return QuantizedMlp(model.unflatten(out), layers, compression_ratio(model, ks))


def eval_losses(model: MlpModel, train: ClassifDataset, test: ClassifDataset):
    """(train cross-entropy, test cross-entropy, test minus train)."""
    train_ce = cross_entropy(model, train)
    test_ce = cross_entropy(model, test)
    return train_ce, test_ce, test_ce - train_ce


def _moons(n, rng):
    labels = rng.integers(0, 2, size=n)
    t = rng.uniform(0.0, math.pi, size=n)
    x = np.where(labels == 0, np.cos(t), 1.0 - np.cos(t))
    y = np.where(labels == 0, np.sin(t), 0.5 - np.sin(t))
    pts = np.column_stack([x, y]) + MOONS_NOISE * rng.standard_normal((n, 2))
    return ClassifDataset(pts, labels, 2)


def make_synth_task(n_train: int, n_test: int, seed=None):
    """Two interleaved crescents in the plane; returns disjoint (train, test) splits."""
    if n_train < 1 or n_test < 1:
        raise ParameterError("split sizes must be >= 1")
    full = _moons(n_train + n_test, np.random.default_rng(seed))
    train = ClassifDataset(full.inputs[:n_train], full.labels[:n_train], 2)
    test = ClassifDataset(full.inputs[n_train:], full.labels[n_train:], 2)
    return train, test


def load_csv_task(path, test_fraction: float = 0.5, seed=None):
    """Read ``feature...,label`` rows (header optional) and split them at random."""
    raw = np.genfromtxt(path, delimiter=",", dtype=np.float64)
    if raw.ndim == 1:
        raw = raw.reshape(1, -1)
    raw = raw[~np.isnan(raw).any(axis=1)]
    if raw.shape[0] < 2 or raw.shape[1] < 2:
        raise ParameterError(f"{path}: need at least two rows of feature...,label")
    labels = raw[:, -1].astype(np.int64)
    n_classes = max(2, int(labels.max()) + 1)
    order = np.random.default_rng(seed).permutation(raw.shape[0])
    n_test = min(max(1, int(round(test_fraction * raw.shape[0]))), raw.shape[0] - 1)
    test_idx, train_idx = order[:n_test], order[n_test:]
    return (ClassifDataset(raw[train_idx, :-1], labels[train_idx], n_classes),
            ClassifDataset(raw[test_idx, :-1], labels[test_idx], n_classes))
