"""Soft-target generation and student training.

Evidence from the teacher ensemble, the SVM, and the pixel classifier is fused
per unlabeled patch: the ensemble's agreement-weighted vote seeds a prior that
is updated by each model's binary vote through likelihood ratios built from
that model's measured true/false positive rates. The updates commute, so vote
order cannot matter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wastefinder.dataengine.dataset import NormStats
from wastefinder.models import (
    PatchClassifier,
    PatchTrainConfig,
    TeacherEnsemble,
    train_patch_classifier,
)
from wastefinder.svm import RbfSvm

PROB_EPS = 1e-3  # clamp for rates and priors; an exact 0/1 prior would be absorbing
PIXEL_VOTE_THRESHOLD = 0.02  # mean in-patch pixel score above this marks the patch positive


def clamp_probability(p: float, eps: float = PROB_EPS) -> float:
    return float(min(max(p, eps), 1.0 - eps))


@dataclass(frozen=True)
class ModelStats:
    """True/false positive rates of one voter, measured on a held-out labeled split."""

    tpr: float
    fpr: float

    def __post_init__(self):
        object.__setattr__(self, "tpr", clamp_probability(self.tpr))
        object.__setattr__(self, "fpr", clamp_probability(self.fpr))

    @classmethod
    def from_predictions(cls, votes: np.ndarray, labels: np.ndarray) -> "ModelStats":
        votes = np.asarray(votes).astype(bool)
        labels = np.asarray(labels).astype(bool)
        pos, neg = labels.sum(), (~labels).sum()
        if pos == 0 or neg == 0:
            raise ValueError("held-out split must contain both classes")
        return cls(tpr=float(votes[labels].mean()), fpr=float(votes[~labels].mean()))


def fuse_ensemble(votes: np.ndarray) -> float:
    """Collapse member probabilities into one value: mode of the binarized votes
    scaled by the agreement factor (1 - 2*sigma), sigma the population std of
    the binary set. Unanimous positive gives 1.0; an even split gives 0.0.
    """
    v = np.asarray(votes, dtype=np.float64).reshape(-1)
    binary = (v >= 0.5).astype(np.float64)
    mean = binary.mean()
    mode = 1.0 if mean > 0.5 else 0.0  # exact tie resolves to 0; the factor is 0 there anyway
    sigma = binary.std()
    return float(mode * (1.0 - 2.0 * sigma))


def pixel_aggregate_label(pixel_scores: np.ndarray, threshold: float = PIXEL_VOTE_THRESHOLD) -> int:
    """Patch-level binary vote from per-pixel scores: 1 iff their mean is strictly above threshold."""
    s = np.asarray(pixel_scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty patch")
    return int(s.mean() > threshold)


def bayes_fuse(prior: float, votes: list[tuple[int, ModelStats]]) -> float:
    """Posterior probability after odds-ratio updates, one per (vote, stats) pair.

    A positive vote multiplies the prior odds by tpr/fpr, a negative one by
    (1-tpr)/(1-fpr). Multiplication commutes, so any vote order gives the
    same posterior.
    """
    p = clamp_probability(prior)
    odds = p / (1.0 - p)
    for vote, stats in votes:
        if vote:
            odds *= stats.tpr / stats.fpr
        else:
            odds *= (1.0 - stats.tpr) / (1.0 - stats.fpr)
    return float(odds / (1.0 + odds))


@dataclass
class SoftTarget:
    patch_id: str
    soft_p: float
    ensemble_value: float
    svm_vote: int
    pixel_vote: int


def patch_pixel_scores(patches: np.ndarray, pixel_model) -> np.ndarray:
    """Run the pixel classifier on every pixel of (n, h, w, 24) patches; returns (n, h, w)."""
    x = np.asarray(patches, dtype=np.float32)
    n, h, w, c = x.shape
    nb = c // 2
    spectro = np.empty((n * h * w, 2, nb), dtype=np.float32)
    flat = x.reshape(n * h * w, c)
    spectro[:, 0, :] = flat[:, :nb]
    spectro[:, 1, :] = flat[:, nb:]
    return pixel_model.score(spectro).reshape(n, h, w)


def build_soft_targets(patches: np.ndarray, patch_ids: list[str], ensemble: TeacherEnsemble,
                       svm: RbfSvm, pixel_model, svm_stats: ModelStats,
                       pixel_stats: ModelStats) -> list[SoftTarget]:
    """Fused soft labels for normalized unlabeled patches.

    All models must have been trained against the same NormStats as `patches`.
    """
    if len(patches) == 0:
        return []
    x = np.asarray(patches, dtype=np.float32)
    member_votes = ensemble.votes(x)  # (n, 32)
    svm_votes = svm.predict(x.reshape(len(x), -1))
    pixel_fields = patch_pixel_scores(x, pixel_model)
    out = []
    for i, pid in enumerate(patch_ids):
        fused = fuse_ensemble(member_votes[i])
        prior = clamp_probability(fused)
        pvote = pixel_aggregate_label(pixel_fields[i])
        soft = bayes_fuse(prior, [(int(svm_votes[i]), svm_stats), (pvote, pixel_stats)])
        out.append(
            SoftTarget(
                patch_id=pid,
                soft_p=soft,
                ensemble_value=fused,
                svm_vote=int(svm_votes[i]),
                pixel_vote=pvote,
            )
        )
    return out


def save_soft_targets(path, targets: list[SoftTarget]) -> None:
    with open(path, "w") as f:
        for t in targets:
            f.write(
                json.dumps(
                    {
                        "patch_id": t.patch_id,
                        "soft_p": t.soft_p,
                        "ensemble_value": t.ensemble_value,
                        "svm_vote": t.svm_vote,
                        "pixel_vote": t.pixel_vote,
                    }
                )
                + "\n"
            )


def load_soft_targets(path) -> list[SoftTarget]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(SoftTarget(**json.loads(line)))
    return out


def train_student(hard_x: np.ndarray, hard_y: np.ndarray, soft_x: np.ndarray,
                  soft_p: np.ndarray, cfg: PatchTrainConfig, seed: int = 100,
                  ) -> tuple[PatchClassifier, list[float]]:
    """Train the single student on pooled hard labels and soft targets, uniform weighting."""
    if len(hard_x) == 0:
        raise ValueError("hard-label set must be non-empty")
    if len(soft_x):
        x = np.concatenate([np.asarray(hard_x, np.float32), np.asarray(soft_x, np.float32)])
        y = np.concatenate([np.asarray(hard_y, np.float64), np.asarray(soft_p, np.float64)])
    else:
        x, y = np.asarray(hard_x, np.float32), np.asarray(hard_y, np.float64)
    return train_patch_classifier(x, y, cfg, seed=seed)
