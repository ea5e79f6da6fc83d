"""Forward-only classifier adapters for the certificate engine: a
nearest-prototype classifier trainable in-package and a feed-forward network
evaluator for externally trained weights (JSON)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .core import (
    ConfigError,
    LabeledDataset,
    ParseError,
    StructuralError,
    atomic_write_json,
)
from .discretize import Discretizer


@runtime_checkable
class ClassifierAdapter(Protocol):
    """Deterministic forward evaluation over image stacks."""

    num_classes: int
    input_shape: tuple[int, int, int]

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """(n, H, W, C) -> (n,) class indices."""
        ...


def _check_shape(images: np.ndarray, input_shape) -> np.ndarray:
    if images.ndim == 3:
        images = images[None]
    if images.shape[1:] != tuple(input_shape):
        raise StructuralError(
            f"input shape {images.shape[1:]} does not match model {tuple(input_shape)}"
        )
    return images


@dataclass(frozen=True)
class PrototypeClassifier:
    """argmin over classes of the l1 distance to a per-class mean image;
    ties break to the lowest class index."""

    prototypes: np.ndarray  # (num_classes, D) float64
    input_shape: tuple[int, int, int]

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        images = _check_shape(np.asarray(images), self.input_shape)
        flat = images.reshape(len(images), -1).astype(np.float64)
        dist = np.abs(flat[:, None, :] - self.prototypes[None, :, :]).sum(axis=2)
        return np.argmin(dist, axis=1)

    def predict(self, image: np.ndarray) -> int:
        return int(self.predict_batch(np.asarray(image)[None])[0])


def prototype_fit(ds: LabeledDataset, d: Discretizer | None = None) -> PrototypeClassifier:
    """Per-class mean of (optionally discretized) flattened images."""
    if len(ds) == 0:
        raise ConfigError("cannot fit prototypes on an empty dataset")
    images = d.apply_images(ds.images) if d is not None else ds.images
    flat = images.reshape(len(ds), -1).astype(np.float64)
    protos = np.empty((ds.num_classes, flat.shape[1]))
    for c in range(ds.num_classes):
        mask = ds.labels == c
        if not mask.any():
            raise ConfigError(f"class {c} has no training examples")
        protos[c] = flat[mask].mean(axis=0)
    return PrototypeClassifier(prototypes=protos, input_shape=ds.image_shape)


@dataclass(frozen=True)
class MLPClassifier:
    """Dense feed-forward evaluator: affine + activation per layer, argmax of
    the final logits with ties to the lowest index."""

    weights: tuple[np.ndarray, ...]      # each (rows, cols) float64
    biases: tuple[np.ndarray, ...]       # each (rows,) float64
    activations: tuple[str, ...]         # "relu" | "identity" per layer
    input_shape: tuple[int, int, int]
    divisor: float = 255.0

    def __post_init__(self):
        h, w, c = self.input_shape
        cols = h * w * c
        for i, (m, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if m.shape[1] != cols:
                raise StructuralError(
                    f"layer {i}: weight cols {m.shape[1]} do not chain with {cols}"
                )
            if b.shape != (m.shape[0],):
                raise StructuralError(f"layer {i}: bias shape {b.shape} vs rows {m.shape[0]}")
            if act not in ("relu", "identity"):
                raise ConfigError(f"layer {i}: unknown activation {act!r}")
            cols = m.shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    def logits(self, images: np.ndarray) -> np.ndarray:
        images = _check_shape(np.asarray(images), self.input_shape)
        x = images.reshape(len(images), -1).astype(np.float64) / self.divisor
        for m, b, act in zip(self.weights, self.biases, self.activations):
            x = x @ m.T + b
            if act == "relu":
                x = np.maximum(x, 0.0)
        return x

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(images), axis=1)

    def predict(self, image: np.ndarray) -> int:
        return int(self.predict_batch(np.asarray(image)[None])[0])


def save_model(clf, path) -> None:
    if isinstance(clf, PrototypeClassifier):
        obj = {
            "type": "prototype",
            "input": list(clf.input_shape),
            "classes": clf.num_classes,
            "prototypes": clf.prototypes.tolist(),
        }
    elif isinstance(clf, MLPClassifier):
        obj = {
            "type": "mlp",
            "input": list(clf.input_shape),
            "classes": clf.num_classes,
            "divisor": clf.divisor,
            "layers": [
                {"weights": m.tolist(), "bias": b.tolist(), "activation": act}
                for m, b, act in zip(clf.weights, clf.biases, clf.activations)
            ],
        }
    else:
        raise ConfigError(f"cannot serialize classifier of type {type(clf).__name__}")
    atomic_write_json(path, obj)


def load_model(path):
    with open(path) as f:
        obj = json.load(f)
    kind = obj.get("type")
    if kind == "prototype":
        protos = np.asarray(obj["prototypes"], dtype=np.float64)
        return PrototypeClassifier(prototypes=protos, input_shape=tuple(obj["input"]))
    if kind == "mlp":
        layers = obj["layers"]
        return MLPClassifier(
            weights=tuple(np.asarray(l["weights"], dtype=np.float64) for l in layers),
            biases=tuple(np.asarray(l["bias"], dtype=np.float64) for l in layers),
            activations=tuple(l.get("activation", "relu") for l in layers),
            input_shape=tuple(obj["input"]),
            divisor=float(obj.get("divisor", 255.0)),
        )
    raise ParseError(f"unknown model type {kind!r}")


def model_digest(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()
