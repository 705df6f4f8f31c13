"""Public description of a frame classifier: layer list, shapes, parameter names.

The manifest is JSON::

    {"input": [h, w, c], "classes": C,
     "layers": [{"type": "conv2d", "out_ch": 8, "kh": 3, "kw": 3, "stride": 1,
                 "pad": 1, "weights": "conv1.w", "bias": "conv1.b"},
                {"type": "relu"}, {"type": "avgpool", "ph": 2, "pw": 2},
                {"type": "flatten"},
                {"type": "dense", "out_dim": 7, "weights": "fc.w", "bias": "fc.b"},
                {"type": "approx_softmax"}]}

Conv kernels are laid out ``(kh, kw, c_in, out_ch)`` and dense weights
``(in_dim, out_dim)``. A weight file is the flat concatenation of every
parameter tensor in manifest order (weights, then bias, per layer).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class Conv2D:
    out_ch: int
    kh: int
    kw: int
    stride: int = 1
    pad: int = 0
    weights: str = ""
    bias: str = ""
    type: str = field(default="conv2d", init=False)


@dataclass(frozen=True)
class AvgPool:
    ph: int
    pw: int
    type: str = field(default="avgpool", init=False)


@dataclass(frozen=True)
class ReLU:
    type: str = field(default="relu", init=False)


@dataclass(frozen=True)
class Flatten:
    type: str = field(default="flatten", init=False)


@dataclass(frozen=True)
class Dense:
    out_dim: int
    weights: str = ""
    bias: str = ""
    type: str = field(default="dense", init=False)


@dataclass(frozen=True)
class ApproxSoftmax:
    type: str = field(default="approx_softmax", init=False)


Layer = Union[Conv2D, AvgPool, ReLU, Flatten, Dense, ApproxSoftmax]

_LAYER_TYPES = {
    "conv2d": Conv2D,
    "avgpool": AvgPool,
    "relu": ReLU,
    "flatten": Flatten,
    "dense": Dense,
    "approx_softmax": ApproxSoftmax,
}


def layer_from_dict(d: dict) -> Layer:
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in _LAYER_TYPES:
        raise ShapeError(f"unknown layer type {kind!r}")
    try:
        return _LAYER_TYPES[kind](**d)
    except TypeError as exc:
        raise ShapeError(f"bad {kind} layer: {exc}") from exc


def output_shape(layer: Layer, shape: tuple[int, ...]) -> tuple[int, ...]:
    if isinstance(layer, Conv2D):
        if len(shape) != 3:
            raise ShapeError(f"conv2d expects h x w x c input, got {shape}")
        h, w, _ = shape
        oh = (h + 2 * layer.pad - layer.kh) // layer.stride + 1
        ow = (w + 2 * layer.pad - layer.kw) // layer.stride + 1
        if oh <= 0 or ow <= 0 or layer.stride <= 0:
            raise ShapeError(f"conv2d kernel does not fit input {shape}")
        return (oh, ow, layer.out_ch)
    if isinstance(layer, AvgPool):
        if len(shape) != 3 or shape[0] % layer.ph or shape[1] % layer.pw:
            raise ShapeError(f"avgpool {layer.ph}x{layer.pw} does not divide {shape}")
        return (shape[0] // layer.ph, shape[1] // layer.pw, shape[2])
    if isinstance(layer, (ReLU, ApproxSoftmax)):
        return shape
    if isinstance(layer, Flatten):
        return (int(np.prod(shape)),)
    if isinstance(layer, Dense):
        if len(shape) != 1:
            raise ShapeError(f"dense expects a flat input, got {shape}; add a flatten layer")
        return (layer.out_dim,)
    raise ShapeError(f"unsupported layer {layer!r}")


def param_shapes(layer: Layer, shape: tuple[int, ...]) -> list[tuple[str, tuple[int, ...]]]:
    if isinstance(layer, Conv2D):
        return [(layer.weights, (layer.kh, layer.kw, shape[2], layer.out_ch)), (layer.bias, (layer.out_ch,))]
    if isinstance(layer, Dense):
        return [(layer.weights, (shape[0], layer.out_dim)), (layer.bias, (layer.out_dim,))]
    return []


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int, int]
    classes: int
    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))

    def shapes(self) -> list[tuple[int, ...]]:
        """Input shape of every layer, followed by the final output shape."""
        out = [self.input_shape]
        for layer in self.layers:
            out.append(output_shape(layer, out[-1]))
        return out

    def validate(self) -> "ModelSpec":
        if len(self.input_shape) != 3:
            raise ShapeError("model input must be h x w x c")
        shapes = self.shapes()
        if not self.layers or not isinstance(self.layers[-1], ApproxSoftmax):
            raise ShapeError("the final layer must be approx_softmax")
        if any(isinstance(l, ApproxSoftmax) for l in self.layers[:-1]):
            raise ShapeError("approx_softmax may only appear as the final layer")
        if shapes[-1] != (self.classes,):
            raise ShapeError(f"model produces {shapes[-1]}, expected ({self.classes},) logits")
        names = [n for n, _ in self.param_specs()]
        if any(not n for n in names):
            raise ShapeError("every conv2d/dense layer needs weights and bias names")
        if len(set(names)) != len(names):
            raise ShapeError("parameter names must be unique")
        return self

    def param_specs(self) -> list[tuple[str, tuple[int, ...]]]:
        specs = []
        for layer, shape in zip(self.layers, self.shapes()):
            specs.extend(param_shapes(layer, shape))
        return specs

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.param_specs())

    def split_flat(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        flat = np.asarray(flat).reshape(-1)
        if flat.size != self.n_params:
            raise ShapeError(f"weight vector has {flat.size} entries, manifest needs {self.n_params}")
        out, pos = {}, 0
        for name, shape in self.param_specs():
            n = int(np.prod(shape))
            out[name] = flat[pos:pos + n].reshape(shape)
            pos += n
        return out

    def join_flat(self, params: dict[str, np.ndarray]) -> np.ndarray:
        parts = []
        for name, shape in self.param_specs():
            if name not in params:
                raise ShapeError(f"missing parameter {name!r}")
            arr = np.asarray(params[name])
            if arr.shape != shape:
                raise ShapeError(f"parameter {name!r} has shape {arr.shape}, manifest needs {shape}")
            parts.append(arr.reshape(-1))
        return np.concatenate(parts) if parts else np.zeros(0)

    def to_dict(self) -> dict:
        return {
            "input": list(self.input_shape),
            "classes": self.classes,
            "layers": [asdict(l) for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            return cls(tuple(d["input"]), int(d["classes"]), tuple(layer_from_dict(l) for l in d["layers"]))
        except KeyError as exc:
            raise ShapeError(f"manifest missing field {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ModelSpec":
        return cls.from_dict(json.loads(Path(path).read_text())).validate()


def toy_model(classes: int = 7) -> ModelSpec:
    """~50k-parameter net on 16x16x1 frames used for desk-scale tests."""
    return ModelSpec(
        (16, 16, 1),
        classes,
        (
            Conv2D(8, 3, 3, 1, 1, "conv1.w", "conv1.b"),
            ReLU(),
            AvgPool(2, 2),
            Conv2D(16, 3, 3, 1, 1, "conv2.w", "conv2.b"),
            ReLU(),
            AvgPool(2, 2),
            Flatten(),
            Dense(176, "fc1.w", "fc1.b"),
            ReLU(),
            Dense(classes, "fc2.w", "fc2.b"),
            ApproxSoftmax(),
        ),
    ).validate()


def full_model(classes: int = 7) -> ModelSpec:
    """[(CONV-RELU)-POOL]-[(CONV-RELU)*2-POOL]*2-[FC-RELU]*2-[FC-SOFTMAX] on 48x48x1."""
    return ModelSpec(
        (48, 48, 1),
        classes,
        (
            Conv2D(32, 3, 3, 1, 1, "c1.w", "c1.b"), ReLU(), AvgPool(2, 2),
            Conv2D(64, 3, 3, 1, 1, "c2.w", "c2.b"), ReLU(),
            Conv2D(64, 3, 3, 1, 1, "c3.w", "c3.b"), ReLU(), AvgPool(2, 2),
            Conv2D(128, 3, 3, 1, 1, "c4.w", "c4.b"), ReLU(),
            Conv2D(128, 3, 3, 1, 1, "c5.w", "c5.b"), ReLU(), AvgPool(2, 2),
            Flatten(),
            Dense(256, "f1.w", "f1.b"), ReLU(),
            Dense(256, "f2.w", "f2.b"), ReLU(),
            Dense(classes, "f3.w", "f3.b"),
            ApproxSoftmax(),
        ),
    ).validate()


def random_weights(model: ModelSpec, rng: np.random.Generator, *, logit_bias: float = 0.3) -> dict[str, np.ndarray]:
    """He-scaled random parameters; the output bias is shifted positive so
    the approximate softmax mostly takes its ratio branch."""
    params = {}
    specs = model.param_specs()
    last_bias = specs[-1][0] if specs else None
    for name, shape in specs:
        if len(shape) == 1:
            params[name] = rng.uniform(-0.05, 0.05, shape)
            if name == last_bias:
                params[name] = params[name] + logit_bias
        else:
            fan_in = int(np.prod(shape[:-1]))
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
    return params
