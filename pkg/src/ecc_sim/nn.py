"""Minimal dense network engine: the cloud classifier, shared math, SGD.

Everything is numpy float64 and deterministic given a seed. The cloud model is
a small MLP trained on the full label space; a perfect-oracle stand-in that
emits one-hot ground-truth logits is available for isolating routing and
incremental-learning behavior from teacher error.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from ecc_sim.data import Dataset

MLP_CHECKPOINT_VERSION = "ecc-sim-mlp-v1"


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "identity"  # "identity" or "relu"

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("inconsistent layer shapes")
        if self.activation not in ("identity", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite layer parameters")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


def init_dense(rng: np.random.Generator, in_dim: int, out_dim: int,
               activation: str = "identity") -> DenseLayer:
    """Uniform +-1/sqrt(fan_in) initialization."""
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim)
    return DenseLayer(w, b, activation)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax; accepts a vector or a matrix."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("non-finite logits")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood; probabilities clamped at 1e-12."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError("label out of range")
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def cross_entropy_grad(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d cross_entropy(softmax(logits), labels) / d logits."""
    p = softmax(logits)
    g = p.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


@dataclass
class MlpModel:
    layers: list[DenseLayer]
    feature_tap_index: int  # layer whose activations are the teacher features

    def __post_init__(self):
        if not 0 <= self.feature_tap_index < len(self.layers) - 1:
            raise ValueError("feature_tap_index must address a non-final layer")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def n_classes(self) -> int:
        return self.layers[-1].out_dim

    @property
    def tap_dim(self) -> int:
        return self.layers[self.feature_tap_index].out_dim

    def copy(self) -> "MlpModel":
        return MlpModel([l.copy() for l in self.layers], self.feature_tap_index)


def build_mlp(seed: int, in_dim: int, arch: list[int],
              feature_tap_index: int | None = None) -> MlpModel:
    """arch lists layer output sizes; the final entry is the class count."""
    if len(arch) < 2:
        raise ValueError("need at least one hidden layer and an output layer")
    rng = np.random.default_rng(seed)
    layers = []
    prev = in_dim
    for i, width in enumerate(arch):
        act = "identity" if i == len(arch) - 1 else "relu"
        layers.append(init_dense(rng, prev, width, act))
        prev = width
    if feature_tap_index is None:
        feature_tap_index = len(arch) - 2
    return MlpModel(layers, feature_tap_index)


def _dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    z = x @ layer.weights.T + layer.bias
    if layer.activation == "relu":
        return np.maximum(z, 0.0)
    return z


def ann_forward(model: MlpModel, batch: np.ndarray):
    """Forward pass returning (logits, tap_features)."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[1] != model.in_dim:
        raise ValueError("batch dimension does not match model input")
    h = batch
    tap = None
    for i, layer in enumerate(model.layers):
        h = _dense_forward(layer, h)
        if i == model.feature_tap_index:
            tap = h
    return h, tap


def _mlp_forward_cached(model: MlpModel, batch: np.ndarray):
    acts = [batch]
    for layer in model.layers:
        acts.append(_dense_forward(layer, acts[-1]))
    return acts


def _mlp_backward(model: MlpModel, acts, dlogits: np.ndarray):
    grads = []
    d = dlogits
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        out = acts[i + 1]
        if layer.activation == "relu":
            d = d * (out > 0)
        grads.append((d.T @ acts[i], d.sum(axis=0)))
        if i > 0:
            d = d @ layer.weights
    grads.reverse()
    return grads


def train_ann(dataset: Dataset, arch: list[int], epochs: int, seed: int,
              lr: float = 0.1, batch_size: int = 32, momentum: float = 0.9,
              feature_tap_index: int | None = None) -> MlpModel:
    """Mini-batch SGD with momentum on cross-entropy over all classes."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if arch[-1] != dataset.n_classes:
        raise ValueError("final layer size must equal the dataset class count")
    model = build_mlp(seed, dataset.dim, arch, feature_tap_index)
    rng = np.random.default_rng(seed)
    velocity = [(np.zeros_like(l.weights), np.zeros_like(l.bias))
                for l in model.layers]
    n = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            acts = _mlp_forward_cached(model, dataset.features[idx])
            dlogits = cross_entropy_grad(acts[-1], dataset.labels[idx])
            grads = _mlp_backward(model, acts, dlogits)
            for layer, (vw, vb), (gw, gb) in zip(model.layers, velocity, grads):
                vw *= momentum
                vw -= lr * gw
                vb *= momentum
                vb -= lr * gb
                layer.weights += vw
                layer.bias += vb
    return model


@dataclass(frozen=True)
class PerfectOracle:
    """Cloud stand-in whose logits are one-hot at the ground-truth label.

    `logit_scale` sets the one-hot magnitude; it must be large enough that
    temperature-softened distillation targets stay confident.
    """

    n_classes: int
    logit_scale: float = 10.0

    def logits_for(self, labels: np.ndarray) -> np.ndarray:
        labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
        out = np.zeros((len(labels), self.n_classes))
        out[np.arange(len(labels)), labels] = self.logit_scale
        return out


def save_mlp(model: MlpModel, seed: int, path) -> None:
    payload = {
        "version": MLP_CHECKPOINT_VERSION,
        "seed": seed,
        "feature_tap_index": model.feature_tap_index,
        "layers": [
            {
                "activation": l.activation,
                "weights": l.weights.tolist(),
                "bias": l.bias.tolist(),
            }
            for l in model.layers
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_mlp(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != MLP_CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    layers = [
        DenseLayer(np.asarray(l["weights"], dtype=np.float64),
                   np.asarray(l["bias"], dtype=np.float64), l["activation"])
        for l in payload["layers"]
    ]
    return MlpModel(layers, payload["feature_tap_index"])
