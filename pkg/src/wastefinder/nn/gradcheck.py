"""Backprop validation against central finite differences on float64 shadow copies."""

from __future__ import annotations

import numpy as np

from wastefinder.rng import make_rng
from wastefinder.nn.network import Network, Sigmoid
from wastefinder.nn.train import bce_from_logits, mse_loss


def _loss_only(net: Network, x, y, loss: str, rng_seed: int) -> float:
    # dropout was removed from the shadow copy, so the rng only feeds a stub
    rng = make_rng(rng_seed)
    if loss == "bce":
        last = len(net.states) - 1
        z = net.forward(x, rng=rng, train=True, stop_before=last, update_stats=False)
        val, _ = bce_from_logits(z, y)
    else:
        p = net.forward(x, rng=rng, train=True, update_stats=False)
        val, _ = mse_loss(p, y)
    return val


def gradient_check(net: Network, inputs: np.ndarray, targets: np.ndarray, *,
                   loss: str = "bce", step: float = 1e-3,
                   samples_per_param: int = 4, refinements: int = 3) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs on a float64 copy of the network with dropout disabled. Per weight
    tensor, the `samples_per_param` largest-magnitude gradient entries are
    probed: they exercise every backward path while staying above the
    resolution of a float64 difference quotient (deep stacks carry gradient
    components too small for any step size to resolve). Where the quotient is
    truncation-limited the step is refined by factors of 10 (batchnorm couples
    each weight to the batch statistics, which raises curvature sharply) and
    the best estimate kept. Relative error is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if loss not in ("bce", "mse"):
        raise ValueError("loss must be 'bce' or 'mse'")
    if loss == "bce" and not isinstance(net.specs[-1], Sigmoid):
        raise ValueError("bce gradient check expects a final sigmoid layer")

    shadow = net.astype(np.float64, drop_dropout=True)
    shadow.mode = "train"
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)

    # analytic gradients
    if loss == "bce":
        last = len(shadow.states) - 1
        z = shadow.forward(x, rng=make_rng(0), train=True, stop_before=last, update_stats=False)
        _, dz = bce_from_logits(z, y)
        shadow.backward(dz.reshape(z.shape), start_after=last - 1)
    else:
        p = shadow.forward(x, rng=make_rng(0), train=True, update_stats=False)
        _, dp = mse_loss(p, y)
        shadow.backward(dp.reshape(p.shape))

    # pin pooling/relu routing: a perturbation that flips an argmax or a relu
    # sign would make the difference quotient measure a different linear
    # branch than the one backprop differentiated
    for st in shadow.states:
        if st._cache is None:
            continue
        if hasattr(st, "frozen_idx"):
            st.frozen_idx = st._cache[1]
        elif hasattr(st, "frozen_mask"):
            st.frozen_mask = st._cache

    def probe_once(pf, j, h) -> float:
        orig = pf[j]
        pf[j] = orig + h
        up = _loss_only(shadow, x, y, loss, 0)
        pf[j] = orig - h
        down = _loss_only(shadow, x, y, loss, 0)
        pf[j] = orig
        return (up - down) / (2.0 * h)

    worst = 0.0
    for li, name, param in shadow.parameters():
        analytic = shadow.states[li].grads[name]
        k = min(samples_per_param, param.size)
        pf, af = param.reshape(-1), analytic.reshape(-1)
        probe = np.argsort(-np.abs(af), kind="stable")[:k]
        for j in probe:
            h = step
            best = np.inf
            for _ in range(refinements + 1):
                numeric = probe_once(pf, j, h)
                rel = abs(af[j] - numeric) / max(abs(af[j]), abs(numeric), 1e-8)
                best = min(best, rel)
                if best < 5e-6:
                    break
                h /= 10.0
            worst = max(worst, best)
    return worst
