"""Spectral-temporal pairing: (2, 12) spectrograms from composites six months apart."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wastefinder.dataengine.months import month_diff
from wastefinder.dataengine.raster import Composite, NIR_BAND, RED_BAND

PAIR_OFFSET_MONTHS = 6
SPECTROGRAM_SHAPE = (2, 12)


@dataclass
class SpectrogramField:
    """Dense field of per-pixel spectrograms; row 0 = current window, row 1 = six months back."""

    values: np.ndarray  # (h, w, 2, 12) float32
    valid: np.ndarray  # (h, w) bool; invalid pixels carry zeros
    normalized: bool = False

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def spectrograms(self) -> tuple[np.ndarray, np.ndarray]:
        """(coords (n, 2) as (y, x), values (n, 2, 12)) for the valid pixels."""
        ys, xs = np.nonzero(self.valid)
        return np.column_stack([ys, xs]), self.values[ys, xs]


def build_spectrogram_field(c_now: Composite, c_prev: Composite) -> tuple[SpectrogramField, int]:
    """Pair two composites into per-pixel spectrograms.

    The previous window must start exactly six months before the current one.
    Pixels invalid in either composite are omitted from the valid plane; the
    count of omitted-but-somewhere-valid pixels is returned alongside.
    """
    offset = month_diff(c_now.window.start, c_prev.window.start)
    if offset != PAIR_OFFSET_MONTHS:
        raise ValueError(
            f"windows must be {PAIR_OFFSET_MONTHS} months apart; got "
            f"{c_prev.window.start}..{c_prev.window.end} vs {c_now.window.start}..{c_now.window.end}"
        )
    if c_now.bands.shape != c_prev.bands.shape:
        raise ValueError(
            f"composite dimensions differ: {c_now.bands.shape[1:]} vs {c_prev.bands.shape[1:]}"
        )
    valid = c_now.valid & c_prev.valid
    h, w = valid.shape
    values = np.zeros((h, w, 2, c_now.bands.shape[0]), dtype=np.float32)
    values[:, :, 0, :] = np.moveaxis(c_now.bands, 0, -1)
    values[:, :, 1, :] = np.moveaxis(c_prev.bands, 0, -1)
    values[~valid] = 0.0
    omitted = int((c_now.valid | c_prev.valid).sum() - valid.sum())
    return SpectrogramField(values=values, valid=valid), omitted


def ndvi(spectrogram: np.ndarray, row: int) -> float:
    """Normalized difference vegetation index on one temporal row of a (2, 12) spectrogram.

    Expects un-normalized reflectance. Returns 0 where NIR + red is zero.
    """
    s = np.asarray(spectrogram, dtype=np.float64)
    if s.shape != SPECTROGRAM_SHAPE:
        raise ValueError(f"expected shape {SPECTROGRAM_SHAPE}, got {s.shape}")
    nir, red = s[row, NIR_BAND], s[row, RED_BAND]
    total = nir + red
    if total == 0.0:
        return 0.0
    return float((nir - red) / total)


def ndvi_planes(values: np.ndarray) -> np.ndarray:
    """Vectorized NDVI over (..., 2, 12) spectrogram arrays; returns (..., 2)."""
    v = np.asarray(values, dtype=np.float64)
    nir, red = v[..., NIR_BAND], v[..., RED_BAND]
    total = nir + red
    out = np.zeros_like(total)
    np.divide(nir - red, total, out=out, where=total != 0)
    return out
