"""Runtime layer implementations (forward + backward), NHWC layout, stride-1 convs.

Layers cache whatever backward needs only when called with train=True, so
inference-mode forward passes leave the layer objects untouched and a network
can be shared read-only across workers.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class LayerState:
    """Base for stateful layers. Subclasses fill params/grads dicts keyed by name."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        pass

    def forward(self, x, *, train: bool, rng=None, update_stats: bool = True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _matmul_row_stable(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b with per-row results independent of a's row count.

    BLAS drops to a GEMV kernel when b has a single column, and its reduction
    order there varies with the batch size; that breaks bit-identical tiled
    inference. A per-row reduction with a fixed order avoids it.
    """
    if b.shape[1] == 1:
        return (a * b.ravel()).sum(axis=1, keepdims=True)
    return a @ b


class DenseState(LayerState):
    def __init__(self, in_features: int, units: int):
        super().__init__()
        self.in_features = in_features
        self.units = units

    def init_params(self, rng, dtype):
        self.params["W"] = glorot_uniform(
            rng, (self.in_features, self.units), self.in_features, self.units, dtype
        )
        self.params["b"] = np.zeros(self.units, dtype=dtype)

    def forward(self, x, *, train, rng=None, update_stats=True):
        if train:
            self._cache = x
        return _matmul_row_stable(x, self.params["W"]) + self.params["b"]

    def backward(self, grad):
        x = self._cache
        self.grads["W"] = x.T @ grad
        self.grads["b"] = grad.sum(axis=0)
        return grad @ self.params["W"].T


def _im2col(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Extract (kh,kw) windows from padded NHWC input as a 2-D matrix."""
    n, h, w, c = xp.shape
    ho, wo = h - kh + 1, w - kw + 1
    s = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, (n, ho, wo, kh, kw, c), (s[0], s[1], s[2], s[1], s[2], s[3])
    )
    return np.ascontiguousarray(windows).reshape(n * ho * wo, kh * kw * c)


class Conv2dState(LayerState):
    """Stride-1 2-D convolution; padding 'valid' or 'same' (zeros)."""

    def __init__(self, in_channels: int, filters: int, kernel: tuple[int, int], padding: str):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.padding = padding

    def init_params(self, rng, dtype):
        kh, kw = self.kernel
        fan_in = kh * kw * self.in_channels
        fan_out = kh * kw * self.filters
        self.params["W"] = glorot_uniform(
            rng, (kh, kw, self.in_channels, self.filters), fan_in, fan_out, dtype
        )
        self.params["b"] = np.zeros(self.filters, dtype=dtype)

    def _pad(self, x):
        if self.padding == "valid":
            return x
        kh, kw = self.kernel
        pt, pl = (kh - 1) // 2, (kw - 1) // 2
        pb, pr = kh - 1 - pt, kw - 1 - pl
        return np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))

    def forward(self, x, *, train, rng=None, update_stats=True):
        kh, kw = self.kernel
        xp = self._pad(x)
        n, hp, wp, _ = xp.shape
        ho, wo = hp - kh + 1, wp - kw + 1
        cols = _im2col(xp, kh, kw)
        out = _matmul_row_stable(cols, self.params["W"].reshape(-1, self.filters)) + self.params["b"]
        if train:
            # cache the padded input; cols are recomputed in backward to cap memory
            self._cache = (xp, x.shape)
        return out.reshape(n, ho, wo, self.filters)

    def backward(self, grad):
        kh, kw = self.kernel
        xp, x_shape = self._cache
        n, hp, wp, cin = xp.shape
        ho, wo = hp - kh + 1, wp - kw + 1
        gflat = grad.reshape(n * ho * wo, self.filters)
        cols = _im2col(xp, kh, kw)
        self.grads["W"] = (cols.T @ gflat).reshape(self.params["W"].shape)
        self.grads["b"] = gflat.sum(axis=0)
        dcols = gflat @ self.params["W"].reshape(-1, self.filters).T
        dcols = dcols.reshape(n, ho, wo, kh, kw, cin)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, i : i + ho, j : j + wo, :] += dcols[:, :, :, i, j, :]
        if self.padding == "valid":
            return dxp
        pt, pl = (kh - 1) // 2, (kw - 1) // 2
        return dxp[:, pt : pt + x_shape[1], pl : pl + x_shape[2], :]


class MaxPoolState(LayerState):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a window are dropped."""

    def __init__(self, pool: int):
        super().__init__()
        self.pool = pool
        # gradient checking pins the argmax routing so finite differences stay
        # on the branch the analytic gradient differentiates
        self.frozen_idx = None

    def forward(self, x, *, train, rng=None, update_stats=True):
        p = self.pool
        n, h, w, c = x.shape
        ho, wo = h // p, w // p
        xt = x[:, : ho * p, : wo * p, :].reshape(n, ho, p, wo, p, c)
        windows = xt.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, p * p)
        if self.frozen_idx is not None:
            idx = self.frozen_idx
        else:
            idx = windows.argmax(axis=-1)  # first max wins on ties
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        if train:
            self._cache = (x.shape, idx)
        return out

    def backward(self, grad):
        p = self.pool
        x_shape, idx = self._cache
        n, h, w, c = x_shape
        ho, wo = h // p, w // p
        dwin = np.zeros((n, ho, wo, c, p * p), dtype=grad.dtype)
        np.put_along_axis(dwin, idx[..., None], grad[..., None], axis=-1)
        dx = np.zeros(x_shape, dtype=grad.dtype)
        dx[:, : ho * p, : wo * p, :] = (
            dwin.reshape(n, ho, wo, c, p, p).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * p, wo * p, c)
        )
        return dx


class ReluState(LayerState):
    def __init__(self):
        super().__init__()
        self.frozen_mask = None  # see MaxPoolState.frozen_idx

    def forward(self, x, *, train, rng=None, update_stats=True):
        if self.frozen_mask is not None:
            out = x * self.frozen_mask
            if train:
                self._cache = self.frozen_mask
            return out
        out = np.maximum(x, 0)
        if train:
            self._cache = x > 0
        return out

    def backward(self, grad):
        return grad * self._cache


class SigmoidState(LayerState):
    def forward(self, x, *, train, rng=None, update_stats=True):
        out = sigmoid(x)
        if train:
            self._cache = out
        return out

    def backward(self, grad):
        y = self._cache
        return grad * y * (1.0 - y)


class FlattenState(LayerState):
    def forward(self, x, *, train, rng=None, update_stats=True):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cache)


class DropoutState(LayerState):
    """Inverted dropout: scales kept units at train time so inference is identity."""

    def __init__(self, rate: float):
        super().__init__()
        self.rate = rate

    def forward(self, x, *, train, rng=None, update_stats=True):
        if not train or self.rate == 0.0:
            if train:
                self._cache = None
            return x
        if rng is None:
            raise ValueError("dropout in train mode requires an rng")
        keep = (rng.random(x.shape) >= self.rate).astype(x.dtype)
        scale = x.dtype.type(1.0 / (1.0 - self.rate))
        self._cache = keep * scale
        return x * self._cache

    def backward(self, grad):
        if self._cache is None:
            return grad
        return grad * self._cache


class BatchNormState(LayerState):
    """Per-channel (last axis) batch normalization with running statistics for inference."""

    def __init__(self, channels: int, momentum: float, eps: float):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps

    def init_params(self, rng, dtype):
        self.params["gamma"] = np.ones(self.channels, dtype=dtype)
        self.params["beta"] = np.zeros(self.channels, dtype=dtype)
        # running stats ride along in params so weight IO captures them;
        # they are excluded from gradient updates by the optimizer.
        self.params["running_mean"] = np.zeros(self.channels, dtype=dtype)
        self.params["running_var"] = np.ones(self.channels, dtype=dtype)

    def forward(self, x, *, train, rng=None, update_stats=True):
        axes = tuple(range(x.ndim - 1))
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if update_stats:
                m = self.momentum
                self.params["running_mean"] *= 1.0 - m
                self.params["running_mean"] += m * mean
                self.params["running_var"] *= 1.0 - m
                self.params["running_var"] += m * var
        else:
            mean = self.params["running_mean"]
            var = self.params["running_var"]
        invstd = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * invstd
        out = xhat * self.params["gamma"] + self.params["beta"]
        if train:
            n = x.size // x.shape[-1]
            self._cache = (xhat, invstd.astype(x.dtype), n, axes)
        return out

    def backward(self, grad):
        xhat, invstd, n, axes = self._cache
        self.grads["gamma"] = (grad * xhat).sum(axis=axes)
        self.grads["beta"] = grad.sum(axis=axes)
        g = grad * self.params["gamma"]
        term = g - g.mean(axis=axes) - xhat * (g * xhat).mean(axis=axes)
        return term * invstd

    # running statistics are state, not trainable weights
    GRAD_FREE = ("running_mean", "running_var")
