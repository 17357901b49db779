"""Raster frames, masked minimum compositing, and the versioned raster container format.

Band order is fixed: the 12 reflectance bands between 442 nm and 2186 nm in
wavelength order (the cirrus band is not part of the set). NDVI uses B08 as
near-infrared and B04 as red.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wastefinder.dataengine.months import month_add, month_index

BAND_ORDER = ("B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B09", "B11", "B12")
BAND_WAVELENGTH_NM = (443, 490, 560, 665, 705, 740, 783, 842, 865, 945, 1610, 2190)
RED_BAND = BAND_ORDER.index("B04")
NIR_BAND = BAND_ORDER.index("B08")
N_BANDS = len(BAND_ORDER)

PIXEL_SIZE_M = 10.0  # ground sampling distance implied throughout

RASTER_FORMAT_VERSION = 1


class EmptyWindowError(ValueError):
    def __init__(self, window, available):
        super().__init__(
            f"no frames intersect window {window.start}..{window.end}; "
            f"available timestamps: {sorted(available)}"
        )
        self.window = window
        self.available = sorted(available)


@dataclass(frozen=True)
class Window:
    """A compositing window: `span` consecutive months starting at `start`."""

    start: str
    span: int = 3

    @property
    def end(self) -> str:
        return month_add(self.start, self.span - 1)

    @property
    def months(self) -> list[str]:
        return [month_add(self.start, i) for i in range(self.span)]

    def contains(self, month: str) -> bool:
        return 0 <= month_index(month) - month_index(self.start) < self.span


@dataclass
class RasterFrame:
    """One observation: 12 band planes plus a cloud/shadow mask (True = excluded)."""

    bands: np.ndarray  # (12, h, w) float32 reflectance, >= 0
    mask: np.ndarray  # (h, w) bool
    month: str

    def __post_init__(self):
        if self.bands.shape[0] != N_BANDS:
            raise ValueError(f"expected {N_BANDS} band planes, got {self.bands.shape[0]}")
        if self.bands.shape[1:] != self.mask.shape:
            raise ValueError("band planes and mask disagree on dimensions")

    @property
    def height(self) -> int:
        return self.bands.shape[1]

    @property
    def width(self) -> int:
        return self.bands.shape[2]


@dataclass
class Composite:
    """Per-pixel/band minimum over unmasked observations in a window."""

    bands: np.ndarray  # (12, h, w) float32; 0 where invalid
    valid: np.ndarray  # (h, w) bool; False where every input was masked
    window: Window

    @property
    def height(self) -> int:
        return self.bands.shape[1]

    @property
    def width(self) -> int:
        return self.bands.shape[2]


def min_composite(frames: list[RasterFrame], window: Window) -> Composite:
    """Minimum unmasked value per pixel and band across frames in the window.

    Taking the minimum suppresses residual haze and cloud edges, which are
    bright; pixels masked in every contributing frame come out invalid.
    """
    sel = [f for f in frames if window.contains(f.month)]
    if not sel:
        raise EmptyWindowError(window, [f.month for f in frames])
    shape = sel[0].bands.shape
    for f in sel[1:]:
        if f.bands.shape != shape:
            raise ValueError("frames in a window must share dimensions")
    stack = np.stack([f.bands for f in sel])  # (n, 12, h, w)
    masks = np.stack([f.mask for f in sel])[:, None, :, :]  # (n, 1, h, w)
    filled = np.where(masks, np.inf, stack)
    out = filled.min(axis=0)
    valid = ~masks.all(axis=0)[0]
    out = np.where(valid[None, :, :], out, 0.0).astype(np.float32)
    return Composite(bands=out, valid=valid, window=window)


# ---------------------------------------------------------------------------
# raster container: JSON sidecar + little-endian float32 planes


def default_geotransform(origin_x: float = 500_000.0, origin_y: float = 9_200_000.0):
    """GDAL-style affine (x0, px_w, 0, y0, 0, -px_h) in a local planar frame, meters."""
    return [origin_x, PIXEL_SIZE_M, 0.0, origin_y, 0.0, -PIXEL_SIZE_M]


def pixel_to_geo(geotransform, px: float, py: float) -> tuple[float, float]:
    """Pixel-center coordinates (px, py) = (col, row) to planar (x, y)."""
    x0, dx, _, y0, _, dy = geotransform
    return (x0 + (px + 0.5) * dx, y0 + (py + 0.5) * dy)


def geo_to_pixel(geotransform, x: float, y: float) -> tuple[float, float]:
    x0, dx, _, y0, _, dy = geotransform
    return ((x - x0) / dx - 0.5, (y - y0) / dy - 0.5)


def save_frames(directory, frames: list[RasterFrame], geotransform=None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    h, w = frames[0].mask.shape
    meta = {
        "format_version": RASTER_FORMAT_VERSION,
        "width": w,
        "height": h,
        "bands": list(BAND_ORDER),
        "crs": "local-planar-meters",
        "geotransform": geotransform if geotransform is not None else default_geotransform(),
        "layout": "per frame: 12 band planes float32 LE row-major, then mask plane uint8",
        "frames": [{"month": f.month, "file": f"frame_{f.month}.bin"} for f in frames],
    }
    (d / "raster.json").write_text(json.dumps(meta, indent=2))
    for f in frames:
        with open(d / f"frame_{f.month}.bin", "wb") as fh:
            fh.write(np.ascontiguousarray(f.bands, dtype="<f4").tobytes())
            fh.write(f.mask.astype(np.uint8).tobytes())


def load_frames(directory) -> tuple[list[RasterFrame], list]:
    d = Path(directory)
    meta = json.loads((d / "raster.json").read_text())
    if meta["format_version"] != RASTER_FORMAT_VERSION:
        raise ValueError(f"unsupported raster format version {meta['format_version']}")
    h, w = meta["height"], meta["width"]
    nb = len(meta["bands"])
    frames = []
    for entry in meta["frames"]:
        raw = (d / entry["file"]).read_bytes()
        bands = np.frombuffer(raw[: nb * h * w * 4], dtype="<f4").reshape(nb, h, w).copy()
        mask = np.frombuffer(raw[nb * h * w * 4 :], dtype=np.uint8).reshape(h, w).astype(bool)
        frames.append(RasterFrame(bands=bands, mask=mask, month=entry["month"]))
    return frames, meta["geotransform"]
