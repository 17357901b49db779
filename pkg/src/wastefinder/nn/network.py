"""Network definition: layer specs, shape composition, Glorot-initialized build, forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Union

import numpy as np

from wastefinder.rng import make_rng
from wastefinder.nn import layers as L


class ShapeCompositionError(ValueError):
    """Raised when consecutive layer specs do not compose shape-wise."""


class NonFiniteActivationError(FloatingPointError):
    """Raised when a forward pass produces a non-finite intermediate."""

    def __init__(self, layer_index: int, kind: str):
        super().__init__(f"non-finite values in output of layer {layer_index} ({kind})")
        self.layer_index = layer_index
        self.kind = kind


@dataclass(frozen=True)
class Conv2d:
    filters: int
    kernel: tuple[int, int] = (3, 3)
    padding: str = "same"  # 'same' or 'valid'
    in_channels: Optional[int] = None  # optional declared input channels, checked at compose time

    kind = "conv2d"


@dataclass(frozen=True)
class Dense:
    units: int

    kind = "dense"


@dataclass(frozen=True)
class MaxPool:
    pool: int = 2

    kind = "maxpool"


@dataclass(frozen=True)
class Relu:
    kind = "relu"


@dataclass(frozen=True)
class Sigmoid:
    kind = "sigmoid"


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"


@dataclass(frozen=True)
class Dropout:
    rate: float

    kind = "dropout"

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class BatchNorm:
    momentum: float = 0.1
    eps: float = 1e-5

    kind = "batchnorm"


LayerSpec = Union[Conv2d, Dense, MaxPool, Relu, Sigmoid, Flatten, Dropout, BatchNorm]

SPEC_KINDS = {cls.kind: cls for cls in (Conv2d, Dense, MaxPool, Relu, Sigmoid, Flatten, Dropout, BatchNorm)}


def spec_to_dict(spec: LayerSpec) -> dict:
    d = {"kind": spec.kind}
    for f in fields(spec):
        v = getattr(spec, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def spec_from_dict(d: dict) -> LayerSpec:
    d = dict(d)
    cls = SPEC_KINDS[d.pop("kind")]
    if "kernel" in d:
        d["kernel"] = tuple(d["kernel"])
    return cls(**d)


def _compose(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    """Output sample shape for `spec` on input sample shape `in_shape` (no batch dim)."""
    if isinstance(spec, Conv2d):
        if len(in_shape) != 3:
            raise ValueError(f"conv2d needs a (h, w, c) input, got {in_shape}")
        h, w, c = in_shape
        if spec.in_channels is not None and spec.in_channels != c:
            raise ValueError(f"conv2d declared {spec.in_channels} input channels but receives {c}")
        kh, kw = spec.kernel
        if spec.padding == "same":
            return (h, w, spec.filters)
        if kh > h or kw > w:
            raise ValueError(f"kernel {spec.kernel} larger than input {(h, w)}")
        return (h - kh + 1, w - kw + 1, spec.filters)
    if isinstance(spec, Dense):
        if len(in_shape) != 1:
            raise ValueError(f"dense needs a flat input, got {in_shape}")
        return (spec.units,)
    if isinstance(spec, MaxPool):
        if len(in_shape) != 3:
            raise ValueError(f"maxpool needs a (h, w, c) input, got {in_shape}")
        h, w, c = in_shape
        if h < spec.pool or w < spec.pool:
            raise ValueError(f"pool {spec.pool} larger than input {(h, w)}")
        return (h // spec.pool, w // spec.pool, c)
    if isinstance(spec, Flatten):
        return (int(np.prod(in_shape)),)
    # relu / sigmoid / dropout / batchnorm preserve shape
    return in_shape


def _make_state(spec: LayerSpec, in_shape: tuple[int, ...]) -> L.LayerState:
    if isinstance(spec, Conv2d):
        return L.Conv2dState(in_shape[-1], spec.filters, spec.kernel, spec.padding)
    if isinstance(spec, Dense):
        return L.DenseState(in_shape[0], spec.units)
    if isinstance(spec, MaxPool):
        return L.MaxPoolState(spec.pool)
    if isinstance(spec, Relu):
        return L.ReluState()
    if isinstance(spec, Sigmoid):
        return L.SigmoidState()
    if isinstance(spec, Flatten):
        return L.FlattenState()
    if isinstance(spec, Dropout):
        return L.DropoutState(spec.rate)
    if isinstance(spec, BatchNorm):
        return L.BatchNormState(in_shape[-1], spec.momentum, spec.eps)
    raise TypeError(f"unknown layer spec {spec!r}")


@dataclass
class Network:
    """Ordered layers with their weights; mode governs dropout/batchnorm behavior."""

    input_shape: tuple[int, ...]
    specs: list[LayerSpec]
    states: list[L.LayerState]
    shapes: list[tuple[int, ...]]  # per-layer output sample shapes
    seed: int
    mode: str = "train"  # 'train' | 'infer'
    dtype: np.dtype = field(default_factory=lambda: np.dtype(np.float32))

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes[-1] if self.shapes else self.input_shape

    def parameters(self):
        """Trainable (layer_index, name, array) triples, in deterministic order."""
        out = []
        for i, st in enumerate(self.states):
            skip = getattr(st, "GRAD_FREE", ())
            for name in st.params:
                if name not in skip:
                    out.append((i, name, st.params[name]))
        return out

    def parameter_count(self) -> int:
        return sum(int(p.size) for _, _, p in self.parameters())

    def forward(self, x: np.ndarray, *, rng=None, train: Optional[bool] = None,
                stop_before: Optional[int] = None, update_stats: bool = True,
                check_finite: bool = True) -> np.ndarray:
        """Run layers [0, stop_before); train defaults to the network mode."""
        train = (self.mode == "train") if train is None else train
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"input sample shape {x.shape[1:]} != expected {self.input_shape}")
        end = len(self.states) if stop_before is None else stop_before
        for i in range(end):
            x = self.states[i].forward(x, train=train, rng=rng, update_stats=update_stats)
            if check_finite and not np.isfinite(np.sum(x)):
                raise NonFiniteActivationError(i, self.specs[i].kind)
        return x

    def backward(self, grad: np.ndarray, *, start_after: Optional[int] = None) -> np.ndarray:
        """Backpropagate from layer index `start_after` (default: last) down to the input."""
        begin = len(self.states) - 1 if start_after is None else start_after
        for i in range(begin, -1, -1):
            grad = self.states[i].backward(grad)
        return grad

    def astype(self, dtype, *, drop_dropout: bool = False) -> "Network":
        """Deep copy with parameters cast to `dtype`; optionally neutralize dropout."""
        specs = [
            Dropout(0.0) if (drop_dropout and isinstance(s, Dropout)) else s for s in self.specs
        ]
        net = build_network(self.input_shape, specs, seed=self.seed, dtype=dtype)
        net.mode = self.mode
        for st_new, st_old in zip(net.states, self.states):
            for name, arr in st_old.params.items():
                st_new.params[name] = arr.astype(dtype)
        return net


def build_network(input_shape, specs, seed: int, dtype=np.float32) -> Network:
    """Compose specs over input_shape, drawing Glorot-uniform weights from `seed`.

    Two builds with the same seed are bit-identical. Shape-composition failures
    name the offending layer pair.
    """
    input_shape = tuple(int(d) for d in input_shape)
    specs = list(specs)
    shapes = []
    states = []
    cur = input_shape
    for i, spec in enumerate(specs):
        try:
            out = _compose(spec, cur)
        except ValueError as e:
            prev = f"layer {i - 1} ({specs[i - 1].kind})" if i > 0 else "the network input"
            raise ShapeCompositionError(
                f"layer {i} ({spec.kind}) cannot follow {prev}: {e}"
            ) from e
        states.append(_make_state(spec, cur))
        shapes.append(out)
        cur = out
    rng = make_rng(seed)
    dtype = np.dtype(dtype)
    for st in states:
        st.init_params(rng, dtype)
    return Network(input_shape, specs, states, shapes, seed=seed, dtype=dtype)


def forward(net: Network, batch: np.ndarray, rng=None) -> np.ndarray:
    """Run the full network on a batch.

    In infer mode the result is a pure function of (weights, batch); in train
    mode dropout draws from `rng` and batchnorm uses batch statistics.
    """
    return net.forward(batch, rng=rng)
