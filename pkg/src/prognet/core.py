"""Foundational model types: tensors, layer graph description, weight sets.

Everything here is immutable after construction and safe to share across
threads. Weights are always float32 on the original side; the portable
on-disk format is a JSON manifest plus one raw little-endian float32 blob.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import ValidationError

ACTIVATIONS = ("none", "relu", "softmax")

PORTABLE_FORMAT_VERSION = 1


class Tensor:
    """Dense row-major float32 array with an explicit shape.

    Rejects non-finite elements and any shape/data-length mismatch at
    construction, so downstream code never has to re-check.
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape, data):
        shape = tuple(int(d) for d in shape)
        if len(shape) == 0 or any(d <= 0 for d in shape):
            raise ValidationError(f"invalid tensor shape {shape}")
        arr = np.ascontiguousarray(data, dtype=np.float32).reshape(-1)
        numel = int(np.prod(shape))
        if arr.size != numel:
            raise ValidationError(
                f"data length {arr.size} does not match shape {shape} "
                f"(expected {numel} elements)")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("tensor contains non-finite elements")
        arr = arr.reshape(shape)
        arr.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Tensor is immutable")

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        arr = np.asarray(arr, dtype=np.float32)
        return cls(arr.shape, arr)

    @property
    def numel(self) -> int:
        return int(self.data.size)

    def ravel(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other):
        return (isinstance(other, Tensor) and self.shape == other.shape
                and np.array_equal(self.data, other.data))


# ---------------------------------------------------------------------------
# Layer descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int
    activation: str = "none"
    kind: str = field(default="dense", init=False)


@dataclass(frozen=True)
class Conv2D:
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: int = 0
    activation: str = "none"
    kind: str = field(default="conv2d", init=False)


@dataclass(frozen=True)
class MaxPool2D:
    window: int
    stride: int
    kind: str = field(default="maxpool2d", init=False)


@dataclass(frozen=True)
class Flatten:
    kind: str = field(default="flatten", init=False)


Layer = Dense | Conv2D | MaxPool2D | Flatten


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layer list plus the input shape the first layer expects."""

    input_shape: tuple[int, ...]
    layers: tuple[Layer, ...]

    def __init__(self, input_shape, layers):
        object.__setattr__(self, "input_shape",
                           tuple(int(d) for d in input_shape))
        object.__setattr__(self, "layers", tuple(layers))

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        """Tensor name -> expected shape, in canonical layer order.

        Dense weights are (out, in); Conv2D weights are
        (out_channels, in_channels, kh, kw); biases are 1-D.
        """
        shapes: dict[str, tuple[int, ...]] = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                shapes[f"layer{i}.weight"] = (layer.out_features, layer.in_features)
                shapes[f"layer{i}.bias"] = (layer.out_features,)
            elif isinstance(layer, Conv2D):
                shapes[f"layer{i}.weight"] = (layer.out_channels, layer.in_channels,
                                              layer.kernel_h, layer.kernel_w)
                shapes[f"layer{i}.bias"] = (layer.out_channels,)
        return shapes

    def output_shapes(self) -> list[tuple[int, ...]]:
        """Propagate the input shape through every layer.

        Raises ValidationError at the first dimensionally incompatible layer
        or a softmax that is not the final activation.
        """
        shapes = []
        cur = self.input_shape
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            if isinstance(layer, (Dense, Conv2D)):
                if layer.activation not in ACTIVATIONS:
                    raise ValidationError(
                        f"layer{i} has unknown activation {layer.activation!r}")
                if layer.activation == "softmax" and i != last:
                    raise ValidationError(
                        f"layer{i} uses softmax before the final layer")
            if isinstance(layer, Dense):
                if len(cur) != 1:
                    raise ValidationError(
                        f"layer{i} (dense) expects a 1-D input, got shape {cur}")
                if cur[0] != layer.in_features:
                    raise ValidationError(
                        f"layer{i} expects input {cur[0]}, "
                        f"declared {layer.in_features}")
                cur = (layer.out_features,)
            elif isinstance(layer, Conv2D):
                if len(cur) != 3:
                    raise ValidationError(
                        f"layer{i} (conv2d) expects a CHW input, got shape {cur}")
                c, h, w = cur
                if c != layer.in_channels:
                    raise ValidationError(
                        f"layer{i} expects {c} input channels, "
                        f"declared {layer.in_channels}")
                oh = (h + 2 * layer.padding - layer.kernel_h) // layer.stride + 1
                ow = (w + 2 * layer.padding - layer.kernel_w) // layer.stride + 1
                if oh <= 0 or ow <= 0:
                    raise ValidationError(f"layer{i} output collapses to {oh}x{ow}")
                cur = (layer.out_channels, oh, ow)
            elif isinstance(layer, MaxPool2D):
                if len(cur) != 3:
                    raise ValidationError(
                        f"layer{i} (maxpool2d) expects a CHW input, got shape {cur}")
                c, h, w = cur
                oh = (h - layer.window) // layer.stride + 1
                ow = (w - layer.window) // layer.stride + 1
                if oh <= 0 or ow <= 0:
                    raise ValidationError(f"layer{i} output collapses to {oh}x{ow}")
                cur = (c, oh, ow)
            elif isinstance(layer, Flatten):
                cur = (int(np.prod(cur)),)
            else:
                raise ValidationError(f"layer{i} has unknown kind {layer!r}")
            shapes.append(cur)
        return shapes

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            d = {"kind": layer.kind}
            for key in layer.__dataclass_fields__:
                if key != "kind":
                    d[key] = getattr(layer, key)
            layers.append(d)
        return {"input_shape": list(self.input_shape), "layers": layers}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        kinds = {"dense": Dense, "conv2d": Conv2D,
                 "maxpool2d": MaxPool2D, "flatten": Flatten}
        layers = []
        for entry in d["layers"]:
            entry = dict(entry)
            kind = entry.pop("kind")
            if kind not in kinds:
                raise ValidationError(f"unknown layer kind {kind!r}")
            layers.append(kinds[kind](**entry))
        return cls(tuple(d["input_shape"]), layers)


class WeightSet:
    """Ordered name -> Tensor map; exactly the tensors a ModelSpec requires."""

    __slots__ = ("_tensors",)

    def __init__(self, tensors: Mapping[str, Tensor]):
        object.__setattr__(self, "_tensors", dict(tensors))

    def __setattr__(self, name, value):
        raise AttributeError("WeightSet is immutable")

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def total_parameters(self) -> int:
        return sum(t.numel for t in self._tensors.values())


def validate_model(spec: ModelSpec, weights: WeightSet) -> None:
    """Check layer chain compatibility and weight/shape correspondence.

    Deterministic and side-effect free; raises ValidationError naming the
    first offending layer or tensor.
    """
    spec.output_shapes()
    expected = spec.parameter_shapes()
    for name, shape in expected.items():
        if name not in weights:
            raise ValidationError(f"missing tensor {name!r}")
        actual = weights[name].shape
        if actual != shape:
            raise ValidationError(
                f"tensor {name!r} has shape {actual}, expected {shape}")
    for name in weights:
        if name not in expected:
            raise ValidationError(f"extra tensor {name!r}")


# ---------------------------------------------------------------------------
# Portable weights format: weights.json manifest + raw float32 blob
# ---------------------------------------------------------------------------

def write_portable(out_dir, spec: ModelSpec, weights: WeightSet,
                   manifest_name: str = "weights.json",
                   blob_name: str = "weights.bin") -> Path:
    """Write the little-endian float32 weights blob plus its JSON manifest.

    Returns the manifest path. Offsets are byte aligned and the blob is
    bit-exact: reading it back reproduces every float32 identically.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    validate_model(spec, weights)

    entries = []
    blob = bytearray()
    for name in spec.parameter_shapes():
        t = weights[name]
        raw = t.ravel().astype("<f4").tobytes()
        entries.append({
            "name": name,
            "shape": list(t.shape),
            "dtype": "f32",
            "byte_offset": len(blob),
            "byte_length": len(raw),
        })
        blob.extend(raw)

    (out_dir / blob_name).write_bytes(bytes(blob))
    manifest = {
        "format_version": PORTABLE_FORMAT_VERSION,
        "model": spec.to_dict(),
        "blob": blob_name,
        "tensors": entries,
    }
    manifest_path = out_dir / manifest_name
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def read_portable(manifest_path) -> tuple[ModelSpec, WeightSet]:
    """Inverse of write_portable; validates the result before returning."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    spec = ModelSpec.from_dict(manifest["model"])
    blob = (manifest_path.parent / manifest["blob"]).read_bytes()

    tensors = {}
    for entry in manifest["tensors"]:
        if entry["dtype"] != "f32":
            raise ValidationError(f"unsupported dtype {entry['dtype']!r}")
        off, length = entry["byte_offset"], entry["byte_length"]
        arr = np.frombuffer(blob[off:off + length], dtype="<f4")
        tensors[entry["name"]] = Tensor(tuple(entry["shape"]), arr)
    weights = WeightSet(tensors)
    validate_model(spec, weights)
    return spec, weights
