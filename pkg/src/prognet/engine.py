"""Minimal forward-pass engine plus a self-contained toy classifier.

Supports dense, conv2d (direct cross-correlation), maxpool2d, flatten,
relu and softmax — enough to run the intermediate models a progressive
transfer produces. The demo trainer builds a seeded Gaussian-cluster
dataset and fits a small MLP with mini-batch SGD so every accuracy
experiment runs offline and reproducibly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import Bundle, ReconstructionState, decode_stage
from .core import (Conv2D, Dense, Flatten, MaxPool2D, ModelSpec, Tensor,
                   WeightSet, validate_model)
from .errors import InferenceError, TrainingError


@dataclass(frozen=True)
class Prediction:
    class_index: int
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise InferenceError("probability vector must be 1-D and nonempty")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
            raise InferenceError("probabilities must be nonnegative and sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def confidence(self) -> float:
        return float(self.probabilities[self.class_index])


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray   # (n, *input_shape) float32
    labels: np.ndarray   # (n,) int64 in [0, num_classes)
    num_classes: int
    input_shape: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InferenceError("label out of range")

    def __len__(self) -> int:
        return int(self.labels.size)

    def sample(self, i: int) -> tuple[Tensor, int]:
        return Tensor(self.input_shape, self.inputs[i]), int(self.labels[i])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def _apply_activation(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "none":
        return x
    if activation == "relu":
        return np.maximum(x, 0.0)
    if activation == "softmax":
        return softmax(x)
    raise InferenceError(f"unknown activation {activation!r}")


def _conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
            stride: int, padding: int) -> np.ndarray:
    """Direct cross-correlation over a CHW input with zero padding."""
    out_ch, in_ch, kh, kw = weight.shape
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    _, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.empty((out_ch, oh, ow), dtype=x.dtype)
    for i in range(oh):
        for j in range(ow):
            window = x[:, i * stride:i * stride + kh, j * stride:j * stride + kw]
            out[:, i, j] = np.tensordot(weight, window, axes=3) + bias
    return out


def _maxpool2d(x: np.ndarray, window: int, stride: int) -> np.ndarray:
    c, h, w = x.shape
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1
    out = np.empty((c, oh, ow), dtype=x.dtype)
    for i in range(oh):
        for j in range(ow):
            out[:, i, j] = x[:, i * stride:i * stride + window,
                             j * stride:j * stride + window].max(axis=(1, 2))
    return out


def forward(spec: ModelSpec, weights: WeightSet, x: Tensor) -> Prediction:
    """Deterministic forward pass producing an argmax + probability vector.

    If the final layer does not end in softmax, a softmax is applied to
    its output purely to populate the probability field (the argmax is
    unchanged).
    """
    validate_model(spec, weights)
    if x.shape != spec.input_shape:
        raise InferenceError(f"input shape {x.shape} does not match "
                             f"model input {spec.input_shape}")
    cur = x.data.astype(np.float32)
    ends_in_softmax = False
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Dense):
            w = weights[f"layer{i}.weight"].data
            b = weights[f"layer{i}.bias"].data
            cur = _apply_activation(w @ cur + b, layer.activation)
            ends_in_softmax = layer.activation == "softmax"
        elif isinstance(layer, Conv2D):
            w = weights[f"layer{i}.weight"].data
            b = weights[f"layer{i}.bias"].data
            cur = _apply_activation(
                _conv2d(cur, w, b, layer.stride, layer.padding),
                layer.activation)
            ends_in_softmax = layer.activation == "softmax"
        elif isinstance(layer, MaxPool2D):
            cur = _maxpool2d(cur, layer.window, layer.stride)
            ends_in_softmax = False
        elif isinstance(layer, Flatten):
            cur = cur.reshape(-1)
            ends_in_softmax = False
    if not np.all(np.isfinite(cur)):
        raise InferenceError("forward pass produced non-finite values "
                             "(corrupt weights?)")
    logits = cur.reshape(-1).astype(np.float64)
    probs = logits if ends_in_softmax else softmax(logits)
    probs = probs / probs.sum()
    return Prediction(class_index=int(np.argmax(logits)), probabilities=probs)


def batch_logits(spec: ModelSpec, weights: WeightSet,
                 inputs: np.ndarray) -> np.ndarray:
    """Vectorized dense-only forward over (n, in) inputs, for evaluation."""
    cur = inputs.astype(np.float32)
    for i, layer in enumerate(spec.layers):
        if not isinstance(layer, Dense):
            raise InferenceError("batch evaluation supports dense-only models")
        w = weights[f"layer{i}.weight"].data
        b = weights[f"layer{i}.bias"].data
        cur = cur @ w.T + b
        if layer.activation == "relu":
            cur = np.maximum(cur, 0.0)
        # softmax skipped: argmax is unchanged
    return cur


def evaluate(spec: ModelSpec, weights: WeightSet,
             dataset: LabeledDataset) -> float:
    """Top-1 accuracy fraction over the dataset."""
    if len(dataset) == 0:
        raise InferenceError("empty dataset")
    validate_model(spec, weights)
    if all(isinstance(l, Dense) for l in spec.layers):
        logits = batch_logits(spec, weights, dataset.inputs)
        if not np.all(np.isfinite(logits)):
            raise InferenceError("forward pass produced non-finite values")
        pred = logits.argmax(axis=1)
    else:
        pred = np.array([forward(spec, weights, dataset.sample(i)[0]).class_index
                         for i in range(len(dataset))])
    return float((pred == dataset.labels).mean())


# ---------------------------------------------------------------------------
# Toy trainer: seeded Gaussian clusters + MLP with mini-batch SGD
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemoConfig:
    input_dim: int = 64
    num_classes: int = 8
    hidden: int = 256
    samples: int = 3000
    train_fraction: float = 0.8
    cluster_spread: float = 4.0
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 0.1
    target_accuracy: float = 0.95


def make_dataset(seed: int, config: DemoConfig) -> tuple[LabeledDataset, LabeledDataset]:
    """Gaussian clusters: one unit-variance blob per class around a
    randomly placed mean of norm ~cluster_spread."""
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(config.num_classes, config.input_dim))
    means *= config.cluster_spread / np.sqrt(config.input_dim)
    labels = rng.integers(0, config.num_classes, size=config.samples)
    inputs = means[labels] + rng.normal(size=(config.samples, config.input_dim))
    inputs = inputs.astype(np.float32)

    n_train = int(config.samples * config.train_fraction)
    shape = (config.input_dim,)
    train = LabeledDataset(inputs[:n_train], labels[:n_train].astype(np.int64),
                           config.num_classes, shape, seed)
    test = LabeledDataset(inputs[n_train:], labels[n_train:].astype(np.int64),
                          config.num_classes, shape, seed)
    return train, test


def train_demo(seed: int = 0, config: DemoConfig = DemoConfig()
               ) -> tuple[ModelSpec, WeightSet, LabeledDataset, LabeledDataset]:
    """Train the demo MLP to the target held-out accuracy, deterministically.

    Returns (spec, weights, train, test). Raises TrainingError if the
    target accuracy is not reached within the epoch budget.
    """
    train, test = make_dataset(seed, config)
    rng = np.random.default_rng(seed + 1)

    d, h, c = config.input_dim, config.hidden, config.num_classes
    w1 = (rng.normal(size=(h, d)) * np.sqrt(2.0 / d)).astype(np.float32)
    b1 = np.zeros(h, dtype=np.float32)
    w2 = (rng.normal(size=(c, h)) * np.sqrt(2.0 / h)).astype(np.float32)
    b2 = np.zeros(c, dtype=np.float32)

    x, y = train.inputs, train.labels
    n = x.shape[0]
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            # forward
            a1 = xb @ w1.T + b1
            z1 = np.maximum(a1, 0.0)
            logits = z1 @ w2.T + b2
            logits -= logits.max(axis=1, keepdims=True)
            e = np.exp(logits)
            probs = e / e.sum(axis=1, keepdims=True)
            # backward (cross-entropy)
            grad = probs
            grad[np.arange(len(idx)), yb] -= 1.0
            grad /= len(idx)
            gw2 = grad.T @ z1
            gb2 = grad.sum(axis=0)
            gz1 = (grad @ w2) * (a1 > 0)
            gw1 = gz1.T @ xb
            gb1 = gz1.sum(axis=0)
            w2 -= (lr * gw2).astype(np.float32)
            b2 -= (lr * gb2).astype(np.float32)
            w1 -= (lr * gw1).astype(np.float32)
            b1 -= (lr * gb1).astype(np.float32)

    spec = ModelSpec((d,), [Dense(d, h, "relu"), Dense(h, c, "softmax")])
    weights = WeightSet({
        "layer0.weight": Tensor.from_array(w1),
        "layer0.bias": Tensor.from_array(b1),
        "layer1.weight": Tensor.from_array(w2),
        "layer1.bias": Tensor.from_array(b2),
    })
    acc = evaluate(spec, weights, test)
    if acc < config.target_accuracy:
        raise TrainingError(f"held-out accuracy {acc:.3f} below target "
                            f"{config.target_accuracy} — adjust config")
    return spec, weights, train, test


def random_weights(spec: ModelSpec, seed: int = 0,
                   scale: float = 0.05) -> WeightSet:
    """Random weights matching the spec's parameter shapes. Useful for
    timing experiments where only payload size matters."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in spec.parameter_shapes().items():
        tensors[name] = Tensor.from_array(
            (rng.normal(size=shape) * scale).astype(np.float32))
    return WeightSet(tensors)


# ---------------------------------------------------------------------------
# Stage-by-stage accuracy table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageAccuracy:
    stage: int          # 0 denotes the original float weights
    bits: int           # cumulative bits at this stage; 32 for originals
    accuracy: float

    @property
    def label(self) -> str:
        return "orig" if self.stage == 0 else str(self.stage)


def accuracy_by_stage(bundle: Bundle, dataset: LabeledDataset,
                      original_weights: WeightSet | None = None
                      ) -> list[StageAccuracy]:
    """Evaluate each intermediate model the bundle's stages produce.

    Appends a row for the original float weights when they are provided.
    """
    manifest = bundle.manifest
    state = ReconstructionState(manifest)
    rows = []
    for record, blob in zip(manifest.stages, bundle.blobs):
        state.apply_stage(record.stage,
                          decode_stage(manifest, record.stage, blob))
        weights = state.materialize()
        rows.append(StageAccuracy(
            stage=record.stage,
            bits=manifest.schedule.prefix_bits(record.stage),
            accuracy=evaluate(manifest.model, weights, dataset)))
    if original_weights is not None:
        rows.append(StageAccuracy(
            stage=0, bits=32,
            accuracy=evaluate(manifest.model, original_weights, dataset)))
    return rows


def write_accuracy_csv(rows: list[StageAccuracy], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "bits", "accuracy"])
        for row in rows:
            writer.writerow([row.label, row.bits, f"{row.accuracy:.6f}"])
    return path


# ---------------------------------------------------------------------------
# Dataset file I/O (.npz with an embedded JSON metadata record)
# ---------------------------------------------------------------------------

def save_datasets(path, train: LabeledDataset, test: LabeledDataset) -> Path:
    path = Path(path)
    meta = {
        "num_classes": train.num_classes,
        "input_shape": list(train.input_shape),
        "seed": train.seed,
    }
    np.savez(path, train_inputs=train.inputs, train_labels=train.labels,
             test_inputs=test.inputs, test_labels=test.labels,
             meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_datasets(path) -> tuple[LabeledDataset, LabeledDataset]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        shape = tuple(meta["input_shape"])
        train = LabeledDataset(data["train_inputs"], data["train_labels"],
                               meta["num_classes"], shape, meta["seed"])
        test = LabeledDataset(data["test_inputs"], data["test_labels"],
                              meta["num_classes"], shape, meta["seed"])
    return train, test
