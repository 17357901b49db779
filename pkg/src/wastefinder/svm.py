"""RBF-kernel support vector machine trained by sequential minimal optimization.

Platt-style SMO with an error cache and second-choice heuristic (maximize
|E1 - E2|). Small-scale exact solver: the full kernel matrix is precomputed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SvmConvergenceError(RuntimeError):
    def __init__(self, max_passes: int, violation: float):
        super().__init__(
            f"SMO failed to satisfy KKT conditions within {max_passes} passes "
            f"(worst violation {violation:.3g})"
        )
        self.max_passes = max_passes
        self.violation = violation


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)
    return np.exp(-gamma * d2)


@dataclass
class RbfSvm:
    """Decision function f(x) = sum_i alpha_i y_i K(x_i, x) + b with 0 <= alpha_i <= C."""

    support_vectors: np.ndarray  # (m, d) float32
    dual_coef: np.ndarray  # (m,) float64, alpha_i * y_i
    bias: float
    gamma: float
    C: float

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        k = rbf_kernel(x, self.support_vectors.astype(np.float64), self.gamma)
        return k @ self.dual_coef + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Binary votes in {0, 1}; the boundary (decision value 0) maps to 0."""
        return (self.decision_values(x) > 0).astype(np.int64)

    def save(self, path) -> None:
        sv = np.ascontiguousarray(self.support_vectors, dtype="<f4")
        coef = np.ascontiguousarray(self.dual_coef, dtype="<f8")
        header = json.dumps(
            {
                "format_version": 1,
                "n_sv": int(sv.shape[0]),
                "dim": int(sv.shape[1]),
                "bias": self.bias,
                "gamma": self.gamma,
                "C": self.C,
            }
        ).encode("utf-8")
        with open(path, "wb") as f:
            f.write(b"WFSVM\x00")
            f.write(struct.pack("<I", len(header)))
            f.write(header)
            f.write(coef.tobytes())
            f.write(sv.tobytes())

    @classmethod
    def load(cls, path) -> "RbfSvm":
        data = Path(path).read_bytes()
        if data[:6] != b"WFSVM\x00":
            raise ValueError(f"{path}: bad magic bytes")
        (hlen,) = struct.unpack_from("<I", data, 6)
        off = 10
        meta = json.loads(data[off : off + hlen].decode("utf-8"))
        off += hlen
        m, d = meta["n_sv"], meta["dim"]
        coef = np.frombuffer(data[off : off + 8 * m], dtype="<f8").copy()
        off += 8 * m
        sv = np.frombuffer(data[off : off + 4 * m * d], dtype="<f4").reshape(m, d).copy()
        return cls(support_vectors=sv, dual_coef=coef, bias=meta["bias"], gamma=meta["gamma"], C=meta["C"])


def default_gamma(x: np.ndarray) -> float:
    """1 / (d * var(x)), the usual scale heuristic."""
    x = np.asarray(x, dtype=np.float64)
    v = x.var()
    return 1.0 / (x.shape[1] * v) if v > 0 else 1.0


def kkt_violation(k: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float, C: float) -> float:
    """Worst violation of the dual optimality conditions."""
    f = k @ (alpha * y) + b
    margins = y * f
    worst = 0.0
    bound_tol = 1e-9 * max(C, 1.0)
    for i in range(len(y)):
        if alpha[i] <= bound_tol:
            worst = max(worst, 1.0 - margins[i])  # should be >= 1
        elif alpha[i] >= C - bound_tol:
            worst = max(worst, margins[i] - 1.0)  # should be <= 1
        else:
            worst = max(worst, abs(margins[i] - 1.0))
    return float(max(worst, abs(float((alpha * y).sum()))))


class _Smo:
    def __init__(self, k, y, C, tol):
        self.k = k
        self.y = y.astype(np.float64)
        self.C = C
        self.tol = tol
        n = len(y)
        self.alpha = np.zeros(n)
        self.b = 0.0
        self.errors = -self.y.copy()  # f(x) - y with alpha = 0, b = 0

    def _objective_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if lo >= hi:
            return False
        k11, k12, k22 = self.k[i1, i1], self.k[i1, i2], self.k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta <= 0:
            return False  # RBF gram is PSD; eta == 0 only for duplicate points
        a2_new = np.clip(a2 + y2 * (e1 - e2) / eta, lo, hi)
        if abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12):
            return False
        a1_new = a1 + s * (a2 - a2_new)

        b1 = self.b - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12
        b2 = self.b - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22
        if 0.0 < a1_new < self.C:
            b_new = b1
        elif 0.0 < a2_new < self.C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        self.errors += (
            y1 * (a1_new - a1) * self.k[i1] + y2 * (a2_new - a2) * self.k[i2] + (b_new - self.b)
        )
        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.b = b_new
        return True

    def _examine(self, i2) -> bool:
        y2, a2, e2 = self.y[i2], self.alpha[i2], self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        non_bound = np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]
        if len(non_bound) > 1:
            i1 = non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))]
            if self._objective_step(int(i1), i2):
                return True
        for i1 in non_bound:  # deterministic sweep; no random restarts needed at this scale
            if self._objective_step(int(i1), i2):
                return True
        for i1 in range(len(self.y)):
            if self._objective_step(i1, i2):
                return True
        return False

    def run(self, max_passes: int) -> int:
        passes = 0
        examine_all = True
        while passes < max_passes:
            passes += 1
            changed = 0
            if examine_all:
                for i in range(len(self.y)):
                    changed += self._examine(i)
            else:
                for i in np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]:
                    changed += self._examine(int(i))
            if examine_all:
                if changed == 0:
                    return passes
                examine_all = False
            elif changed == 0:
                examine_all = True
        return passes


def train_svm(x: np.ndarray, labels: np.ndarray, C: float = 1.0, gamma: float | None = None,
              tol: float = 1e-3, max_passes: int = 200) -> RbfSvm:
    """Fit on flattened samples with labels in {0, 1}. Raises if both classes are not present."""
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    labels = np.asarray(labels).reshape(-1)
    classes = np.unique(labels)
    if len(classes) != 2:
        raise ValueError(f"need exactly two classes, got {classes.tolist()}")
    y = np.where(labels == classes.max(), 1.0, -1.0)
    if gamma is None:
        gamma = default_gamma(x)
    k = rbf_kernel(x, x, gamma)
    smo = _Smo(k, y, C, tol)
    passes = smo.run(max_passes)
    violation = kkt_violation(k, y, smo.alpha, smo.b, C)
    if passes >= max_passes and violation > tol:
        raise SvmConvergenceError(max_passes, violation)
    keep = smo.alpha > 1e-12
    return RbfSvm(
        support_vectors=x[keep].astype(np.float32),
        dual_coef=(smo.alpha * y)[keep],
        bias=float(smo.b),
        gamma=float(gamma),
        C=float(C),
    )
