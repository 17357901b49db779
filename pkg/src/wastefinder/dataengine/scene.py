"""Synthetic multi-band scene generation.

Scenes mix four background covers (vegetation with a seasonal greenness cycle,
bare earth, water, urban) and planted targets: waste sites with a broadband-
bright, low-NDVI, temporally stable spectrum, and greenhouse-style confusers
that reuse the plastic spectrum but in a regular striped layout so only
spatial context can tell them apart. Cloud/shadow masks are synthesized as
smooth random blobs covering a requested fraction. Everything is a pure
function of the scene seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from wastefinder.dataengine.months import month_index
from wastefinder.dataengine.raster import (
    RasterFrame,
    default_geotransform,
    load_frames,
    pixel_to_geo,
    save_frames,
)
from wastefinder.geometry import circle_ring
from wastefinder.imageops import gaussian_blur
from wastefinder.rng import spawn

# 12-band reflectance signatures (band order as in raster.BAND_ORDER).
# Waste carries the plastic feature: strong 1610 nm, suppressed 2190 nm.
WASTE_SPECTRUM = np.array(
    [0.24, 0.27, 0.30, 0.33, 0.35, 0.37, 0.39, 0.41, 0.41, 0.40, 0.46, 0.30], np.float64
)
VEG_LUSH = np.array(
    [0.03, 0.04, 0.06, 0.05, 0.10, 0.22, 0.30, 0.38, 0.41, 0.42, 0.22, 0.11], np.float64
)
VEG_DRY = np.array(
    [0.06, 0.08, 0.12, 0.14, 0.18, 0.24, 0.28, 0.32, 0.34, 0.34, 0.30, 0.22], np.float64
)
BARE_EARTH = np.array(
    [0.11, 0.14, 0.18, 0.23, 0.26, 0.28, 0.29, 0.31, 0.32, 0.31, 0.39, 0.36], np.float64
)
WATER = np.array(
    [0.060, 0.050, 0.040, 0.030, 0.020, 0.015, 0.012, 0.010, 0.009, 0.008, 0.005, 0.004], np.float64
)
URBAN = np.array(
    [0.16, 0.18, 0.21, 0.23, 0.25, 0.26, 0.27, 0.28, 0.28, 0.27, 0.31, 0.29], np.float64
)

GREENHOUSE_STRIPE_PX = 2  # stripe pitch of the confuser layout


@dataclass
class ScenePlant:
    """A planted target: waste site or greenhouse-style confuser, with a presence window."""

    center: tuple[float, float]  # (x, y) pixel coordinates
    radius: float
    kind: str = "site"  # 'site' | 'greenhouse'
    start: str | None = None  # first month present (inclusive); None = whole catalog
    end: str | None = None  # last month present (inclusive)
    radius_by_month: dict[str, float] = field(default_factory=dict)  # step changes, keyed by month

    def present(self, month: str) -> bool:
        mi = month_index(month)
        if self.start is not None and mi < month_index(self.start):
            return False
        if self.end is not None and mi > month_index(self.end):
            return False
        return True

    def radius_at(self, month: str) -> float:
        if not self.radius_by_month:
            return self.radius
        mi = month_index(month)
        r = self.radius
        for m in sorted(self.radius_by_month, key=month_index):
            if month_index(m) <= mi:
                r = self.radius_by_month[m]
        return r


@dataclass
class SceneSpec:
    width: int
    height: int
    months: list[str]
    plants: list[ScenePlant] = field(default_factory=list)
    cloud_fraction: float = 0.15
    noise: float = 0.01
    seed: int = 0
    veg_season_amp: float = 0.9  # 0..1 swing between dry and lush vegetation endmembers
    bare_fraction: float = 0.20
    water_fraction: float = 0.05
    urban_fraction: float = 0.04

    def validate(self) -> None:
        for i, p in enumerate(self.plants):
            x, y = p.center
            rmax = max([p.radius, *p.radius_by_month.values()] if p.radius_by_month else [p.radius])
            if x - rmax < 0 or x + rmax > self.width or y - rmax < 0 or y + rmax > self.height:
                raise ValueError(f"plant {i} ({p.kind}) extends beyond scene bounds")
        if not 0.0 <= self.cloud_fraction < 1.0:
            raise ValueError("cloud_fraction must be in [0, 1)")


@dataclass
class SceneTruth:
    """Ground truth stored alongside generated frames."""

    width: int
    height: int
    months: list[str]
    plants: list[ScenePlant]
    geotransform: list

    def sites(self) -> list[ScenePlant]:
        return [p for p in self.plants if p.kind == "site"]

    def confusers(self) -> list[ScenePlant]:
        return [p for p in self.plants if p.kind != "site"]

    def plant_mask(self, plant: ScenePlant, month: str) -> np.ndarray:
        if not plant.present(month):
            return np.zeros((self.height, self.width), dtype=bool)
        return _disk_mask(self.height, self.width, plant.center, plant.radius_at(month))

    def waste_mask(self, month: str) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        for p in self.sites():
            m |= self.plant_mask(p, month)
        return m

    def to_geojson(self) -> dict:
        feats = []
        for i, p in enumerate(self.plants):
            ring = circle_ring(p.center[0], p.center[1], p.radius)
            geo = [list(pixel_to_geo(self.geotransform, x, y)) for x, y in ring]
            geo.append(geo[0])
            feats.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [geo]},
                    "properties": {
                        "index": i,
                        "kind": p.kind,
                        "center_px": list(p.center),
                        "radius_px": p.radius,
                        "start": p.start,
                        "end": p.end,
                        "radius_by_month": p.radius_by_month,
                    },
                }
            )
        return {"type": "FeatureCollection", "format_version": 1, "features": feats}


def _disk_mask(h: int, w: int, center, radius: float) -> np.ndarray:
    cx, cy = center
    ys, xs = np.ogrid[:h, :w]
    return (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2 <= radius**2


def _smooth_field(rng: np.random.Generator, h: int, w: int, scale: float) -> np.ndarray:
    return gaussian_blur(rng.standard_normal((h, w)), scale)


def _cover_map(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    """0 vegetation, 1 bare earth, 2 water, 3 urban."""
    h, w = spec.height, spec.width
    cover = np.zeros((h, w), dtype=np.int8)
    bare = _smooth_field(rng, h, w, 12.0)
    cover[bare > np.quantile(bare, 1.0 - spec.bare_fraction)] = 1
    water = _smooth_field(rng, h, w, 16.0)
    cover[water > np.quantile(water, 1.0 - spec.water_fraction)] = 2
    urban = _smooth_field(rng, h, w, 6.0)
    cover[urban > np.quantile(urban, 1.0 - spec.urban_fraction)] = 3
    return cover


def _season_weight(month: str) -> float:
    """0 = fully dry, 1 = fully lush; annual sinusoid.

    The phase offset keeps integer months away from the zero crossings, so any
    two months six months apart differ in greenness (the pairing offset the
    spectrograms use).
    """
    mi = month_index(month)
    return 0.5 + 0.5 * np.sin(2.0 * np.pi * (mi - 2.5) / 12.0)


def generate_scene(spec: SceneSpec) -> tuple[list[RasterFrame], SceneTruth]:
    """Synthesize one frame per catalog month plus ground truth. Deterministic per seed."""
    spec.validate()
    h, w = spec.height, spec.width
    rng_bg = spawn(spec.seed, 0)
    cover = _cover_map(spec, rng_bg)
    # static per-pixel brightness texture; vanishes when noise is zero
    texture = 1.0 + 2.0 * spec.noise * rng_bg.standard_normal((h, w))
    texture = np.clip(texture, 0.5, None)

    base = {1: BARE_EARTH, 2: WATER, 3: URBAN}
    frames = []
    for fi, month in enumerate(spec.months):
        rng_f = spawn(spec.seed, 1, fi)
        sw = spec.veg_season_amp * _season_weight(month) + (1.0 - spec.veg_season_amp) * 0.5
        veg = sw * VEG_LUSH + (1.0 - sw) * VEG_DRY
        canvas = np.empty((len(WASTE_SPECTRUM), h, w), dtype=np.float64)
        canvas[:] = veg[:, None, None]
        for code, spectrum in base.items():
            sel = cover == code
            canvas[:, sel] = spectrum[:, None]
        canvas *= texture[None, :, :]
        if spec.noise > 0:
            canvas += spec.noise * rng_f.standard_normal(canvas.shape)

        for p in spec.plants:
            if not p.present(month):
                continue
            mask = _disk_mask(h, w, p.center, p.radius_at(month))
            if p.kind == "greenhouse":
                ys = np.arange(h)
                stripe = ((ys - int(p.center[1])) // GREENHOUSE_STRIPE_PX) % 2 == 0
                mask = mask & stripe[:, None]
            vals = np.repeat(WASTE_SPECTRUM[:, None], int(mask.sum()), axis=1)
            if spec.noise > 0:
                vals = vals + spec.noise * rng_f.standard_normal(vals.shape)
            canvas[:, mask] = vals

        np.clip(canvas, 0.0, None, out=canvas)

        if spec.cloud_fraction > 0:
            cfield = _smooth_field(rng_f, h, w, 10.0)
            cmask = cfield > np.quantile(cfield, 1.0 - spec.cloud_fraction)
        else:
            cmask = np.zeros((h, w), dtype=bool)
        frames.append(RasterFrame(bands=canvas.astype(np.float32), mask=cmask, month=month))

    truth = SceneTruth(
        width=w, height=h, months=list(spec.months), plants=list(spec.plants),
        geotransform=default_geotransform(),
    )
    return frames, truth


# ---------------------------------------------------------------------------
# on-disk scene bundles


def save_scene(directory, frames: list[RasterFrame], truth: SceneTruth, spec: SceneSpec | None = None) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_frames(d, frames, geotransform=truth.geotransform)
    (d / "truth.geojson").write_text(json.dumps(truth.to_geojson(), indent=2))
    if spec is not None:
        (d / "scene_spec.json").write_text(json.dumps(asdict(spec), indent=2))


def load_scene(directory) -> tuple[list[RasterFrame], SceneTruth]:
    d = Path(directory)
    frames, geotransform = load_frames(d)
    gj = json.loads((d / "truth.geojson").read_text())
    plants = []
    for f in gj["features"]:
        pr = f["properties"]
        plants.append(
            ScenePlant(
                center=tuple(pr["center_px"]),
                radius=pr["radius_px"],
                kind=pr["kind"],
                start=pr.get("start"),
                end=pr.get("end"),
                radius_by_month=pr.get("radius_by_month") or {},
            )
        )
    months = [f.month for f in frames]
    h, w = frames[0].mask.shape
    return frames, SceneTruth(width=w, height=h, months=months, plants=plants, geotransform=geotransform)
