"""Pixel- and patch-dataset assembly: polygon sampling, NDVI screening, z-score normalization."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wastefinder.dataengine.raster import N_BANDS
from wastefinder.dataengine.spectrogram import SpectrogramField, ndvi_planes
from wastefinder.geometry import rasterize_polygon

NDVI_POSITIVE_CUTOFF = 0.4  # positives strictly above this (either row) are deleted
PATCH_SIZE = 28
PATCH_CHANNELS = 2 * N_BANDS  # two temporal frames concatenated along the channel axis


@dataclass
class NormStats:
    """Per-spectral-channel mean/std over the training set; frozen once computed."""

    mean: np.ndarray  # (12,) float64
    std: np.ndarray  # (12,) float64

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (N_BANDS,) or self.std.shape != (N_BANDS,):
            raise ValueError(f"stats must have {N_BANDS} channels")
        if not (self.std > 0).all():
            raise ValueError("per-channel std must be > 0")

    @classmethod
    def from_spectrograms(cls, values: np.ndarray) -> "NormStats":
        """Stats over (n, 2, 12) samples, pooling both temporal rows per channel."""
        flat = np.asarray(values, dtype=np.float64).reshape(-1, N_BANDS)
        return cls(mean=flat.mean(axis=0), std=flat.std(axis=0))

    def normalize(self, values: np.ndarray) -> np.ndarray:
        """Z-score any (..., 12) or (..., 24) trailing-channel array."""
        v = np.asarray(values)
        c = v.shape[-1]
        if c == N_BANDS:
            m, s = self.mean, self.std
        elif c == 2 * N_BANDS:
            m, s = np.tile(self.mean, 2), np.tile(self.std, 2)
        else:
            raise ValueError(f"cannot normalize trailing dimension {c}")
        return ((v - m) / s).astype(np.float32)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values)
        c = v.shape[-1]
        m = self.mean if c == N_BANDS else np.tile(self.mean, 2)
        s = self.std if c == N_BANDS else np.tile(self.std, 2)
        return (v * s + m).astype(np.float32)

    def normalize_field(self, fld: SpectrogramField) -> SpectrogramField:
        out = self.normalize(fld.values)
        out[~fld.valid] = 0.0  # invalid pixels sit at the channel mean
        return SpectrogramField(values=out, valid=fld.valid.copy(), normalized=True)

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps({"format_version": 1, "mean": self.mean.tolist(), "std": self.std.tolist()})
        )

    @classmethod
    def load(cls, path) -> "NormStats":
        d = json.loads(Path(path).read_text())
        return cls(mean=np.array(d["mean"]), std=np.array(d["std"]))


@dataclass
class PatchSample:
    """A labeled patch: a spectrogram field plus the polygons that scope pixel labels.

    pos_polygons bound waste present at both epochs; neg_polygons mark known
    negative zones inside otherwise positive patches (e.g. ground where waste
    existed at only one of the two epochs).
    """

    field: SpectrogramField
    label: int  # patch-level class: 1 waste, 0 background/confuser
    pos_polygons: list = field(default_factory=list)
    neg_polygons: list = field(default_factory=list)
    patch_id: str = ""


@dataclass
class PixelDataset:
    positives: np.ndarray  # (p, 2, 12) float32, normalized
    negatives: np.ndarray  # (n, 2, 12) float32, normalized
    stats: NormStats
    ndvi_deleted: int
    warnings: list[str]

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.concatenate([self.positives, self.negatives])
        y = np.concatenate([np.ones(len(self.positives)), np.zeros(len(self.negatives))])
        return x, y


def _polygon_pixels(fld: SpectrogramField, polygons) -> np.ndarray:
    m = np.zeros((fld.height, fld.width), dtype=bool)
    for ring in polygons:
        m |= rasterize_polygon(np.asarray(ring), fld.height, fld.width)
    return m


def assemble_pixel_dataset(patches: list[PatchSample], stats: NormStats | None = None) -> PixelDataset:
    """Build the spectrogram training set from labeled patches.

    Positives come only from inside positive polygons; any positive whose NDVI
    exceeds the vegetation cutoff on either temporal row is deleted (dormant or
    revegetated ground contaminates the class). Negatives pool every valid
    pixel of negative patches plus explicit negative zones of positive patches.
    Statistics are computed on the assembled (un-normalized) set unless frozen
    stats are supplied, then applied to both classes.
    """
    pos_list, neg_list, notes = [], [], []
    deleted = 0
    for k, p in enumerate(patches):
        if p.label == 1:
            in_poly = _polygon_pixels(p.field, p.pos_polygons) & p.field.valid
            vals = p.field.values[in_poly]
            if len(vals) == 0:
                msg = f"patch {p.patch_id or k}: positive polygon covers no valid pixels"
                warnings.warn(msg)
                notes.append(msg)
            else:
                nd = ndvi_planes(vals)
                keep = ~(nd > NDVI_POSITIVE_CUTOFF).any(axis=1)
                deleted += int((~keep).sum())
                if not keep.any():
                    msg = f"patch {p.patch_id or k}: all positives removed by NDVI filter"
                    warnings.warn(msg)
                    notes.append(msg)
                pos_list.append(vals[keep])
            if p.neg_polygons:
                in_neg = _polygon_pixels(p.field, p.neg_polygons) & p.field.valid
                neg_list.append(p.field.values[in_neg])
        else:
            neg_list.append(p.field.values[p.field.valid])
    positives = np.concatenate(pos_list) if pos_list else np.zeros((0, 2, N_BANDS), np.float32)
    negatives = np.concatenate(neg_list) if neg_list else np.zeros((0, 2, N_BANDS), np.float32)
    if stats is None:
        pooled = np.concatenate([positives, negatives]) if len(positives) + len(negatives) else None
        if pooled is None or len(pooled) < 2:
            raise ValueError("cannot compute normalization statistics from an empty dataset")
        stats = NormStats.from_spectrograms(pooled)
    return PixelDataset(
        positives=stats.normalize(positives),
        negatives=stats.normalize(negatives),
        stats=stats,
        ndvi_deleted=deleted,
        warnings=notes,
    )


def patch_tensor(fld: SpectrogramField) -> np.ndarray:
    """(h, w, 24) tensor: channels 0-11 current window, 12-23 the six-month lookback."""
    v = fld.values
    return np.concatenate([v[:, :, 0, :], v[:, :, 1, :]], axis=-1)


def assemble_patch_dataset(patches: list[PatchSample], stats: NormStats,
                           size: int = PATCH_SIZE) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Normalized (n, size, size, 24) tensors and labels from patch samples.

    Patches must already be cut to `size`; invalid pixels end up at the channel
    mean after normalization.
    """
    xs, ys, ids = [], [], []
    for k, p in enumerate(patches):
        if p.field.values.shape[:2] != (size, size):
            raise ValueError(
                f"patch {p.patch_id or k} has extent {p.field.values.shape[:2]}, expected {(size, size)}"
            )
        t = stats.normalize(patch_tensor(p.field))
        t[~p.field.valid] = 0.0
        xs.append(t)
        ys.append(p.label)
        ids.append(p.patch_id or str(k))
    x = np.stack(xs) if xs else np.zeros((0, size, size, PATCH_CHANNELS), np.float32)
    return x, np.asarray(ys, dtype=np.float64), ids


def load_label_records(path) -> list[dict]:
    """Reviewer-produced labels (JSON lines) for the next assembly cycle."""
    p = Path(path)
    if not p.exists():
        return []
    return [json.loads(line) for line in p.read_text().splitlines() if line.strip()]
