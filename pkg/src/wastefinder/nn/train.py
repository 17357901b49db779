"""Training loop: Adam on binary cross-entropy, seeded shuffling, optional LR decay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from wastefinder.rng import make_rng
from wastefinder.nn.network import Network, Sigmoid


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class LrSchedule:
    """Multiply the learning rate by `factor` every `period` epochs."""

    factor: float = 0.5
    period: int = 10

    def rate_at(self, base: float, epoch: int) -> float:
        return base * self.factor ** (epoch // self.period)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_schedule: Optional[LrSchedule] = None
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Adam:
    """Standard Adam with bias correction; state keyed by parameter identity order."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for _, _, p in params]
        self.v = [np.zeros_like(p) for _, _, p in params]

    def step(self, params, grads, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for (_, _, p), g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def bce_from_logits(z: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy computed stably from logits.

    Returns (loss, dloss/dz). Valid for soft targets y in [0, 1].
    """
    z = z.reshape(len(z), -1)
    y = y.reshape(len(y), -1).astype(z.dtype)
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)
    n = z.shape[0]
    return float(loss.sum() / n), (p - y) / n


def mse_loss(p: np.ndarray, y: np.ndarray):
    """0.5 * mean squared error and its gradient."""
    p = p.reshape(len(p), -1)
    y = y.reshape(len(y), -1).astype(p.dtype)
    d = p - y
    n = p.shape[0]
    return float(0.5 * (d * d).sum() / n), d / n


def train(net: Network, inputs: np.ndarray, targets: np.ndarray, cfg: TrainConfig,
          sample_rng: Optional[np.random.Generator] = None) -> list[float]:
    """Fit `net` in place on (inputs, targets in [0,1]); returns per-epoch mean loss.

    The network must end in a sigmoid; the loss is binary cross-entropy, applied
    to the pre-sigmoid logits for stability. Deterministic given (cfg.seed, data).
    """
    if not isinstance(net.specs[-1], Sigmoid):
        raise ValueError("train expects a network with a final sigmoid layer")
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.min() < 0 or targets.max() > 1:
        raise ValueError("targets must lie in [0, 1]")
    if len(inputs) != len(targets):
        raise ValueError("inputs and targets disagree on sample count")

    rng = sample_rng if sample_rng is not None else make_rng(cfg.seed)
    net.mode = "train"
    params = net.parameters()
    opt = Adam(params, cfg.beta1, cfg.beta2, cfg.eps)
    n = len(inputs)
    last = len(net.states) - 1  # index of the sigmoid layer
    history: list[float] = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate if cfg.lr_schedule is None else cfg.lr_schedule.rate_at(cfg.learning_rate, epoch)
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            z = net.forward(inputs[idx], rng=rng, train=True, stop_before=last)
            loss, dz = bce_from_logits(z, targets[idx])
            if not np.isfinite(loss):
                raise NonFiniteLossError(epoch, bi, loss)
            total += loss * len(idx)
            net.backward(dz.astype(net.dtype).reshape(z.shape), start_after=last - 1)
            grads = [net.states[i].grads[name] for i, name, _ in params]
            opt.step(params, grads, lr)
        history.append(total / n)
    net.mode = "infer"
    return history
