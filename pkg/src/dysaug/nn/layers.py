"""Layer descriptors, parameterised layers and a sequential container."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from . import tensor as T
from .tensor import Tensor

KINDS = ("conv2d", "fc", "relu", "leaky_relu", "tanh", "sigmoid", "flatten", "replicate_pad")
INIT_STD = 0.02


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    sizes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d":
            s = self.sizes
            if min(s["stride"]) < 1:
                raise ValueError("conv2d stride must be >= 1")
        if self.kind == "leaky_relu" and not 0 < self.sizes["slope"] < 1:
            raise ValueError("leaky_relu slope must lie in (0, 1)")


def conv_spec(in_ch, out_ch, kernel, stride=(1, 1)):
    return LayerSpec("conv2d", {"in_ch": in_ch, "out_ch": out_ch,
                                "kernel": tuple(kernel), "stride": tuple(stride)})


def fc_spec(in_features, out_features):
    return LayerSpec("fc", {"in_features": in_features, "out_features": out_features})


def pad_spec(top, bottom, left, right):
    return LayerSpec("replicate_pad", {"margins": (top, bottom, left, right)})


def act_spec(kind, slope=None):
    return LayerSpec(kind, {"slope": slope} if kind == "leaky_relu" else {})


class Layer:
    """A layer computes ``forward(x)`` from a Tensor; ``params`` lists its trainable leaves."""

    def __init__(self, spec: LayerSpec, params=()):
        self.spec = spec
        self.params = list(params)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)


class Conv2d(Layer):
    def forward(self, x):
        w, b = self.params
        return T.conv2d(x, w, b, self.spec.sizes["stride"])


class Linear(Layer):
    def forward(self, x):
        w, b = self.params
        return T.linear(x, w, b)


class ReLU(Layer):
    def forward(self, x):
        return T.relu(x)


class LeakyReLU(Layer):
    def forward(self, x):
        return T.leaky_relu(x, self.spec.sizes["slope"])


class Tanh(Layer):
    def forward(self, x):
        return T.tanh(x)


class Sigmoid(Layer):
    def forward(self, x):
        return T.sigmoid(x)


class Flatten(Layer):
    def forward(self, x):
        return T.flatten(x)


class ReplicatePad(Layer):
    def forward(self, x):
        if x.ndim != 4:
            raise ShapeMismatch(f"replicate_pad expects NCHW input, got {x.shape}")
        return T.replicate_pad(x, self.spec.sizes["margins"])


_LAYER_CLASSES = {"conv2d": Conv2d, "fc": Linear, "relu": ReLU, "leaky_relu": LeakyReLU,
                  "tanh": Tanh, "sigmoid": Sigmoid, "flatten": Flatten,
                  "replicate_pad": ReplicatePad}


def param_shapes(spec: LayerSpec):
    s = spec.sizes
    if spec.kind == "conv2d":
        kh, kw = s["kernel"]
        return [(s["out_ch"], s["in_ch"], kh, kw), (s["out_ch"],)]
    if spec.kind == "fc":
        return [(s["out_features"], s["in_features"]), (s["out_features"],)]
    return []


def build_layer(spec: LayerSpec, rng=None, dtype=np.float32, arrays=None) -> Layer:
    """Instantiate a layer; weights ~ N(0, 0.02) and zero biases unless ``arrays`` is given."""
    shapes = param_shapes(spec)
    if arrays is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        arrays = []
        for i, shape in enumerate(shapes):
            if i == 0:
                arrays.append(rng.normal(0.0, INIT_STD, size=shape))
            else:
                arrays.append(np.zeros(shape))
    if [tuple(a.shape) for a in arrays] != [tuple(s) for s in shapes]:
        raise ShapeMismatch(f"{spec.kind}: parameter shapes {[a.shape for a in arrays]} != {shapes}")
    params = [Tensor(np.asarray(a, dtype=dtype).copy(), requires_grad=True) for a in arrays]
    return _LAYER_CLASSES[spec.kind](spec, params)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    @classmethod
    def build(cls, specs, rng=None, dtype=np.float32) -> "Sequential":
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls([build_layer(s, rng, dtype) for s in specs])

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    @property
    def dtype(self):
        params = self.parameters()
        return params[0].dtype if params else np.dtype(np.float32)

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def forward(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        for layer in self.layers:
            x = layer(x)
        return x

    __call__ = forward

    def logits(self, x) -> Tensor:
        """Forward pass stopping before a trailing sigmoid layer."""
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        layers = self.layers
        if layers and layers[-1].spec.kind == "sigmoid":
            layers = layers[:-1]
        for layer in layers:
            x = layer(x)
        return x

    def state(self):
        return [[p.data.copy() for p in layer.params] for layer in self.layers]

    def astype(self, dtype) -> "Sequential":
        """Deep copy with parameters cast to ``dtype`` (layer classes are preserved)."""
        clone = copy.deepcopy(self)
        for p in clone.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return clone

    def copy(self) -> "Sequential":
        return self.astype(self.dtype)

    def n_params(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))
