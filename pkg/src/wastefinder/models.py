"""Concrete classifiers: the pixel spectrogram CNN, the patch CNN, and the 32-network teacher ensemble.

The pixel network convolves along the band axis and then across the two-step
time axis before small dense layers; it is kept under 20k parameters so it can
only key on spectral/temporal structure. The patch network is wider and
deeper: three rounds of three 3x3 convolutions with max pooling, then two
dense blocks with batchnorm and dropout (training-only).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wastefinder.dataengine.dataset import NormStats, PATCH_CHANNELS, PATCH_SIZE, PixelDataset
from wastefinder.nn import (
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    Network,
    Relu,
    Sigmoid,
    TrainConfig,
    build_network,
    load_network,
    save_network,
    train,
)
from wastefinder.nn.train import LrSchedule
from wastefinder.svm import RbfSvm, train_svm  # noqa: F401  (re-exported with the other models)

PIXEL_INPUT_SHAPE = (2, 12)
PATCH_INPUT_SHAPE = (PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS)
ENSEMBLE_SIZE = 32
PIXEL_PARAM_BUDGET = 20_000


def pixel_classifier_specs() -> list:
    return [
        Conv2d(16, kernel=(1, 3), padding="valid"),  # band combinations within each time row
        Relu(),
        Conv2d(16, kernel=(2, 1), padding="valid"),  # differences across the two time steps
        Relu(),
        Flatten(),
        Dense(64),
        Relu(),
        Dropout(0.3),
        Dense(32),
        Relu(),
        Dense(1),
        Sigmoid(),
    ]


def patch_classifier_specs() -> list:
    # batchnorm momentum 0.5: running statistics must settle within the short
    # training schedules used here (tens of steps, not thousands)
    specs: list = []
    for filters in (32, 64, 128):
        for _ in range(3):
            specs += [Conv2d(filters, kernel=(3, 3), padding="same"), Relu()]
        specs += [MaxPool(2), BatchNorm(momentum=0.5)]
    specs += [Flatten()]
    for units in (128, 64):
        specs += [Dense(units), Relu(), BatchNorm(momentum=0.5), Dropout(0.4)]
    specs += [Dense(1), Sigmoid()]
    return specs


def _chunked_scores(net: Network, x: np.ndarray, chunk: int) -> np.ndarray:
    out = np.empty(len(x), dtype=np.float32)
    for s in range(0, len(x), chunk):
        block = x[s : s + chunk]
        if len(block) == 1:
            # single-row batches hit a different BLAS kernel with different
            # rounding; pad to two rows so scores match the batched path
            out[s] = net.forward(np.concatenate([block, block]), train=False).ravel()[0]
        else:
            out[s : s + chunk] = net.forward(block, train=False).ravel()
    return out


@dataclass
class PixelClassifier:
    """Scores one (2, 12) spectrogram at a time; spatially blind by construction."""

    net: Network

    @classmethod
    def build(cls, seed: int) -> "PixelClassifier":
        net = build_network((2, 12, 1), pixel_classifier_specs(), seed=seed)
        assert net.parameter_count() < PIXEL_PARAM_BUDGET
        net.mode = "infer"
        return cls(net)

    def score(self, spectrograms: np.ndarray, chunk: int = 65536) -> np.ndarray:
        x = np.asarray(spectrograms, dtype=np.float32)
        if x.shape[1:] != PIXEL_INPUT_SHAPE:
            raise ValueError(f"expected (n, 2, 12) spectrograms, got {x.shape}")
        return _chunked_scores(self.net, x[..., None], chunk)

    def save(self, path) -> None:
        save_network(self.net, path)

    @classmethod
    def load(cls, path) -> "PixelClassifier":
        return cls(load_network(path))


@dataclass
class PatchClassifier:
    """Scores (28, 28, 24) patches: two temporal frames stacked along channels."""

    net: Network

    @classmethod
    def build(cls, seed: int) -> "PatchClassifier":
        net = build_network(PATCH_INPUT_SHAPE, patch_classifier_specs(), seed=seed)
        net.mode = "infer"
        return cls(net)

    def score(self, patches: np.ndarray, chunk: int = 128) -> np.ndarray:
        x = np.asarray(patches, dtype=np.float32)
        if x.shape[1:] != PATCH_INPUT_SHAPE:
            raise ValueError(f"expected (n, 28, 28, 24) patches, got {x.shape}")
        return _chunked_scores(self.net, x, chunk)

    def save(self, path) -> None:
        save_network(self.net, path)

    @classmethod
    def load(cls, path) -> "PatchClassifier":
        return cls(load_network(path))


def dihedral_transforms(patch: np.ndarray) -> list[np.ndarray]:
    """The 8 reflection/rotation variants of one (h, w, c) patch."""
    out = []
    for flip in (False, True):
        base = patch[:, ::-1] if flip else patch
        for k in range(4):
            out.append(np.rot90(base, k, axes=(0, 1)))
    return out


def augment_patches(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Materialize the full dihedral orbit: 8x the samples, labels repeated."""
    stacks = []
    for flip in (False, True):
        base = x[:, :, ::-1] if flip else x
        for k in range(4):
            stacks.append(np.rot90(base, k, axes=(1, 2)))
    return np.ascontiguousarray(np.concatenate(stacks)), np.tile(y, 8)


@dataclass
class PatchTrainConfig:
    """Patch-network training defaults: scheduled learning rate, dihedral augmentation."""

    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 12
    augment: bool = True
    lr_decay_factor: float = 0.5
    lr_decay_period: int = 10

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            lr_schedule=LrSchedule(self.lr_decay_factor, self.lr_decay_period),
            seed=seed,
        )


def train_pixel_classifier(dataset: PixelDataset, cfg: TrainConfig | None = None,
                           seed: int = 0) -> tuple[PixelClassifier, list[float]]:
    cfg = cfg if cfg is not None else TrainConfig(epochs=40, seed=seed)
    x, y = dataset.training_arrays()
    clf = PixelClassifier.build(seed)
    history = train(clf.net, x[..., None], y, cfg)
    clf.net.mode = "infer"
    return clf, history


def train_patch_classifier(x: np.ndarray, y: np.ndarray, cfg: PatchTrainConfig,
                           seed: int) -> tuple[PatchClassifier, list[float]]:
    if cfg.augment:
        x, y = augment_patches(x, y)
    clf = PatchClassifier.build(seed)
    history = train(clf.net, x, y, cfg.to_train_config(seed))
    _settle_batchnorm(clf.net, np.asarray(x, np.float32), passes=2, batch=cfg.batch_size)
    clf.net.mode = "infer"
    return clf, history


def _settle_batchnorm(net: Network, x: np.ndarray, passes: int, batch: int) -> None:
    """Forward-only passes so running statistics reflect the final weights."""
    net.mode = "train"
    rng = np.random.default_rng(0)  # dropout draws; they do not feed the stats meaningfully
    for _ in range(passes):
        for s in range(0, len(x), batch):
            if len(x[s : s + batch]) >= 4:  # degenerate slices would poison the variance
                net.forward(x[s : s + batch], rng=rng, train=True)


@dataclass
class TeacherEnsemble:
    members: list[PatchClassifier]
    seeds: list[int]
    metrics: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if len(self.members) != len(self.seeds):
            raise ValueError("one seed per member required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("member seeds must be pairwise distinct")

    def votes(self, patches: np.ndarray) -> np.ndarray:
        """(n, members) matrix of member probabilities."""
        return np.column_stack([m.score(patches) for m in self.members])

    def predict(self, patches: np.ndarray) -> np.ndarray:
        """Majority vote over members binarized at 0.5; exact ties resolve to 0."""
        binary = self.votes(patches) >= 0.5
        return (binary.mean(axis=1) > 0.5).astype(np.int64)


def train_teacher_ensemble(x: np.ndarray, y: np.ndarray, cfg: PatchTrainConfig,
                           base_seed: int = 0, size: int = ENSEMBLE_SIZE,
                           progress=None) -> TeacherEnsemble:
    """Train `size` patch networks on identical data/hyperparameters, distinct init seeds."""
    y = np.asarray(y).reshape(-1)
    if len(np.unique(np.round(y))) < 2:
        raise ValueError("teacher training requires both classes in the labeled set")
    members, seeds, metrics = [], [], []
    for i in range(size):
        seed = base_seed + i
        clf, history = train_patch_classifier(x, y, cfg, seed=seed)
        train_acc = float(((clf.score(np.asarray(x, np.float32)) > 0.5) == (y > 0.5)).mean())
        members.append(clf)
        seeds.append(seed)
        metrics.append({"seed": seed, "final_loss": history[-1], "train_accuracy": train_acc})
        if progress is not None:
            progress(i + 1, size)
    return TeacherEnsemble(members=members, seeds=seeds, metrics=metrics)


# ---------------------------------------------------------------------------
# model bundle directory


@dataclass
class ModelBundle:
    stats: NormStats
    pixel: PixelClassifier
    teachers: TeacherEnsemble | None = None
    svm: RbfSvm | None = None
    student: PatchClassifier | None = None
    manifest: dict = field(default_factory=dict)

    def patch_scorer(self) -> PatchClassifier:
        """The deployed patch model: the distilled student when available."""
        if self.student is not None:
            return self.student
        if self.teachers is None:
            raise ValueError("bundle has neither a student nor teachers")
        return self.teachers.members[0]


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def save_bundle(directory, bundle: ModelBundle) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    bundle.stats.save(d / "norm_stats.json")
    bundle.pixel.save(d / "pixel.wfnet")
    manifest = dict(bundle.manifest)
    manifest.update({"format_version": 1, "ensemble_size": 0, "has_svm": False, "has_student": False})
    if bundle.teachers is not None:
        tdir = d / "teachers"
        tdir.mkdir(exist_ok=True)
        for i, m in enumerate(bundle.teachers.members):
            m.save(tdir / f"teacher_{i:02d}.wfnet")
        manifest["ensemble_size"] = len(bundle.teachers.members)
        manifest["teacher_seeds"] = bundle.teachers.seeds
        manifest["teacher_metrics"] = bundle.teachers.metrics
    if bundle.svm is not None:
        bundle.svm.save(d / "svm.wfsvm")
        manifest["has_svm"] = True
    if bundle.student is not None:
        bundle.student.save(d / "student.wfnet")
        manifest["has_student"] = True
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_bundle(directory) -> ModelBundle:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    stats = NormStats.load(d / "norm_stats.json")
    pixel = PixelClassifier.load(d / "pixel.wfnet")
    teachers = None
    if manifest.get("ensemble_size"):
        members = [
            PatchClassifier.load(d / "teachers" / f"teacher_{i:02d}.wfnet")
            for i in range(manifest["ensemble_size"])
        ]
        teachers = TeacherEnsemble(
            members=members, seeds=manifest["teacher_seeds"], metrics=manifest.get("teacher_metrics", [])
        )
    svm = RbfSvm.load(d / "svm.wfsvm") if manifest.get("has_svm") else None
    student = PatchClassifier.load(d / "student.wfnet") if manifest.get("has_student") else None
    return ModelBundle(stats=stats, pixel=pixel, teachers=teachers, svm=svm, student=student, manifest=manifest)
