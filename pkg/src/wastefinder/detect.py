"""Stage-3 inference and candidate generation.

Tiled per-pixel scoring produces waste-likelihood heatmaps; patch scores are
computed on a stride-8 lattice. Candidates come from determinant-of-Hessian
maxima over a Gaussian scale space of the thresholded heatmap and must be
confirmed by a covering patch score before they survive. Sensitivity modes
bundle the three thresholds involved.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from wastefinder.dataengine.dataset import NormStats, PATCH_SIZE
from wastefinder.dataengine.months import month_add
from wastefinder.dataengine.raster import RasterFrame, Window, min_composite, pixel_to_geo
from wastefinder.dataengine.spectrogram import SpectrogramField, build_spectrogram_field
from wastefinder.imageops import gaussian_blur

PATCH_GRID_STRIDE = 8

# determinant-of-Hessian configuration: scales span [min_sigma, 2*min_sigma]
# in 5 log steps, maxima over 3x3x3 neighborhoods, 50% overlap suppression
DOH_NUM_SCALES = 5
DOH_MAX_SIGMA_FACTOR = 2.0
DOH_RESPONSE_THRESHOLD = 0.005
BLOB_OVERLAP_LIMIT = 0.5
BLOB_RADIUS_FACTOR = np.sqrt(2.0)  # blob radius from its scale


@dataclass(frozen=True)
class SensitivityMode:
    """A named (pixel threshold, min blob scale, patch threshold) operating point."""

    name: str
    pixel_threshold: float
    min_sigma: float
    patch_threshold: float


MODES = {
    "low": SensitivityMode("low", pixel_threshold=0.9, min_sigma=5.0, patch_threshold=0.6),
    "med": SensitivityMode("med", pixel_threshold=0.6, min_sigma=5.0, patch_threshold=0.6),
    "high": SensitivityMode("high", pixel_threshold=0.6, min_sigma=3.5, patch_threshold=0.3),
}


class DetectionStageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


@dataclass
class Heatmap:
    scores: np.ndarray  # (h, w) float32 in [0, 1]; invalid pixels carry 0
    valid: np.ndarray  # (h, w) bool
    origin: tuple[int, int] = (0, 0)  # (x, y) of this tile in scene pixels

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]


@dataclass
class PatchScoreGrid:
    """Patch scores on a stride-8 lattice; cell (gy, gx) covers pixels [gx*s, gx*s+patch)."""

    scores: np.ndarray  # (gh, gw) float32
    stride: int = PATCH_GRID_STRIDE
    patch: int = PATCH_SIZE
    origin: tuple[int, int] = (0, 0)

    def cell_origin(self, gy: int, gx: int) -> tuple[int, int]:
        return (self.origin[0] + gx * self.stride, self.origin[1] + gy * self.stride)

    def covering_cells(self, px: float, py: float) -> list[tuple[int, int]]:
        """Grid cells whose patch extent contains scene pixel (px, py)."""
        x = px - self.origin[0]
        y = py - self.origin[1]
        gh, gw = self.scores.shape
        out = []
        gx_lo = int(np.ceil((x - self.patch + 1) / self.stride))
        gy_lo = int(np.ceil((y - self.patch + 1) / self.stride))
        for gy in range(max(gy_lo, 0), gh):
            if gy * self.stride > y:
                break
            for gx in range(max(gx_lo, 0), gw):
                if gx * self.stride > x:
                    break
                out.append((gy, gx))
        return out


@dataclass
class CandidateSite:
    id: str
    center_px: tuple[int, int]  # (x, y)
    center_geo: tuple[float, float]
    sigma: float
    pixel_score: float
    mode: str
    patch_score: float | None = None
    status: str = "candidate"
    first_month: str = ""


def candidate_id(center_geo, first_month: str) -> str:
    key = f"{center_geo[0]:.1f},{center_geo[1]:.1f},{first_month}"
    return hashlib.sha256(key.encode()).hexdigest()[:15]


# ---------------------------------------------------------------------------
# heatmap inference


def infer_heatmap(pixel_model, fld: SpectrogramField) -> Heatmap:
    """Score every valid pixel of a normalized spectrogram field."""
    if not fld.normalized:
        raise ValueError("spectrogram field must be normalized before inference")
    scores = np.zeros((fld.height, fld.width), dtype=np.float32)
    ys, xs = np.nonzero(fld.valid)
    if len(ys):
        scores[ys, xs] = pixel_model.score(fld.values[ys, xs])
    return Heatmap(scores=scores, valid=fld.valid.copy())


def infer_heatmap_tiled(pixel_model, fld: SpectrogramField, grid: tuple[int, int],
                        workers: int = 1) -> Heatmap:
    """Tile the field, score tiles in a worker pool, merge by tile index.

    Scoring is per-pixel, so the result is identical to the untiled run
    regardless of the decomposition or the worker count.
    """
    ty, tx = grid
    h, w = fld.valid.shape
    ys = np.linspace(0, h, ty + 1, dtype=int)
    xs = np.linspace(0, w, tx + 1, dtype=int)
    jobs = []
    for iy in range(ty):
        for ix in range(tx):
            sub = SpectrogramField(
                values=fld.values[ys[iy] : ys[iy + 1], xs[ix] : xs[ix + 1]],
                valid=fld.valid[ys[iy] : ys[iy + 1], xs[ix] : xs[ix + 1]],
                normalized=fld.normalized,
            )
            jobs.append(((iy, ix), sub))
    scores = np.zeros((h, w), dtype=np.float32)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda j: (j[0], infer_heatmap(pixel_model, j[1])), jobs))
    for (iy, ix), hm in sorted(results, key=lambda r: r[0]):
        scores[ys[iy] : ys[iy + 1], xs[ix] : xs[ix + 1]] = hm.scores
    return Heatmap(scores=scores, valid=fld.valid.copy())


def infer_patch_grid(patch_model, c_now, c_prev, stats: NormStats,
                     stride: int = PATCH_GRID_STRIDE, patch: int = PATCH_SIZE) -> PatchScoreGrid:
    """Convolve the patch classifier across a composite pair with the lattice stride."""
    fld, _ = build_spectrogram_field(c_now, c_prev)
    h, w = fld.valid.shape
    if h < patch or w < patch:
        raise ValueError(f"scene {h}x{w} is smaller than one {patch}-pixel patch")
    tensor = stats.normalize(
        np.concatenate([fld.values[:, :, 0, :], fld.values[:, :, 1, :]], axis=-1)
    )
    tensor[~fld.valid] = 0.0
    gh = (h - patch) // stride + 1
    gw = (w - patch) // stride + 1
    scores = np.empty((gh, gw), dtype=np.float32)
    row_patches = np.empty((gw, patch, patch, tensor.shape[-1]), dtype=np.float32)
    for gy in range(gh):
        y0 = gy * stride
        for gx in range(gw):
            x0 = gx * stride
            row_patches[gx] = tensor[y0 : y0 + patch, x0 : x0 + patch]
        scores[gy] = patch_model.score(row_patches)
    return PatchScoreGrid(scores=scores, stride=stride, patch=patch)


def average_timesteps(heatmaps: list[Heatmap]) -> Heatmap:
    """Per-pixel mean over the timesteps where the pixel is valid."""
    if not heatmaps:
        raise ValueError("cannot average an empty heatmap list")
    shape = heatmaps[0].scores.shape
    for hm in heatmaps:
        if hm.scores.shape != shape:
            raise ValueError("heatmaps must share dimensions")
    total = np.zeros(shape, dtype=np.float64)
    count = np.zeros(shape, dtype=np.int64)
    for hm in heatmaps:
        total += np.where(hm.valid, hm.scores, 0.0)
        count += hm.valid
    valid = count > 0
    scores = np.zeros(shape, dtype=np.float32)
    np.divide(total, count, out=total, where=valid)
    scores[valid] = total[valid].astype(np.float32)
    return Heatmap(scores=scores, valid=valid, origin=heatmaps[0].origin)


# ---------------------------------------------------------------------------
# determinant-of-Hessian candidate generation


def _doh_stack(z: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    stack = np.empty((len(sigmas), *z.shape), dtype=np.float64)
    for i, s in enumerate(sigmas):
        g = gaussian_blur(z, s)
        lyy = np.zeros_like(g)
        lxx = np.zeros_like(g)
        lxy = np.zeros_like(g)
        lyy[1:-1, :] = g[2:, :] - 2.0 * g[1:-1, :] + g[:-2, :]
        lxx[:, 1:-1] = g[:, 2:] - 2.0 * g[:, 1:-1] + g[:, :-2]
        lxy[1:-1, 1:-1] = 0.25 * (g[2:, 2:] - g[2:, :-2] - g[:-2, 2:] + g[:-2, :-2])
        stack[i] = (s**4) * (lxx * lyy - lxy * lxy)
    return stack


def _local_maxima(stack: np.ndarray, threshold: float) -> list[tuple[int, int, int]]:
    """Points >= every 3x3x3 neighbor (borders compare what exists) and above threshold."""
    m = stack
    for axis in range(3):
        p = np.moveaxis(np.pad(np.moveaxis(m, axis, 0), ((1, 1), (0, 0), (0, 0)),
                               constant_values=-np.inf), 0, axis)
        sl = [slice(None)] * 3
        shifted = []
        for d in (0, 1, 2):
            sl[axis] = slice(d, d + m.shape[axis])
            shifted.append(p[tuple(sl)])
        m = np.maximum(np.maximum(shifted[0], shifted[1]), shifted[2])
    peaks = (stack >= m) & (stack > threshold)
    return [tuple(ix) for ix in np.argwhere(peaks)]


def _disk_overlap_fraction(dist: float, r1: float, r2: float) -> float:
    """Intersection area of two disks over the smaller disk's area."""
    if dist >= r1 + r2:
        return 0.0
    rs, rl = min(r1, r2), max(r1, r2)
    if dist <= rl - rs:
        return 1.0
    d2, rs2, rl2 = dist * dist, rs * rs, rl * rl
    a1 = rs2 * np.arccos(np.clip((d2 + rs2 - rl2) / (2 * dist * rs), -1, 1))
    a2 = rl2 * np.arccos(np.clip((d2 + rl2 - rs2) / (2 * dist * rl), -1, 1))
    tri = 0.5 * np.sqrt(max((-dist + rs + rl) * (dist + rs - rl) * (dist - rs + rl) * (dist + rs + rl), 0.0))
    return float((a1 + a2 - tri) / (np.pi * rs2))


def detect_blobs(heatmap: Heatmap, mode: SensitivityMode,
                 doh_threshold: float = DOH_RESPONSE_THRESHOLD,
                 geotransform=None, first_month: str = "") -> list[CandidateSite]:
    """Candidate sites from scale-space Hessian-determinant maxima of the thresholded heatmap."""
    z = np.where(heatmap.scores >= mode.pixel_threshold, heatmap.scores, 0.0).astype(np.float64)
    z[~heatmap.valid] = 0.0
    if not z.any():
        return []
    sigmas = np.geomspace(mode.min_sigma, DOH_MAX_SIGMA_FACTOR * mode.min_sigma, DOH_NUM_SCALES)
    stack = _doh_stack(z, sigmas)
    raw = []
    for s, y, x in _local_maxima(stack, doh_threshold):
        raw.append((float(stack[s, y, x]), int(y), int(x), float(sigmas[s])))
    # strongest first; scan order breaks exact ties deterministically
    raw.sort(key=lambda b: (-b[0], b[1], b[2]))
    kept: list[tuple[float, int, int, float]] = []
    for b in raw:
        ok = True
        for k in kept:
            d = float(np.hypot(b[1] - k[1], b[2] - k[2]))
            if _disk_overlap_fraction(d, BLOB_RADIUS_FACTOR * b[3], BLOB_RADIUS_FACTOR * k[3]) > BLOB_OVERLAP_LIMIT:
                ok = False
                break
        if ok:
            kept.append(b)

    out = []
    h, w = heatmap.scores.shape
    ys, xs = np.ogrid[:h, :w]
    for _, y, x, sigma in kept:
        r = BLOB_RADIUS_FACTOR * sigma
        disk = ((xs - x) ** 2 + (ys - y) ** 2 <= r * r) & heatmap.valid
        pixel_score = float(heatmap.scores[disk].mean()) if disk.any() else 0.0
        px, py = x + heatmap.origin[0], y + heatmap.origin[1]
        geo = pixel_to_geo(geotransform, px, py) if geotransform is not None else (float(px), float(py))
        out.append(
            CandidateSite(
                id=candidate_id(geo, first_month),
                center_px=(int(px), int(py)),
                center_geo=(float(geo[0]), float(geo[1])),
                sigma=float(sigma),
                pixel_score=pixel_score,
                mode=mode.name,
                first_month=first_month,
            )
        )
    return out


def cross_validate(cands: list[CandidateSite], grids: list[PatchScoreGrid],
                   mode: SensitivityMode) -> tuple[list[CandidateSite], dict]:
    """Keep candidates covered by any patch scoring above the mode's patch threshold.

    The neighborhood is every lattice patch whose 28-pixel extent contains the
    candidate center, across all supplied grids (one per timestep).
    """
    kept, rejected, uncovered = [], [], []
    for c in cands:
        best = None
        for g in grids:
            for gy, gx in g.covering_cells(*c.center_px):
                v = float(g.scores[gy, gx])
                if best is None or v > best:
                    best = v
        if best is None:
            uncovered.append(c.id)
            continue
        c = replace(c, patch_score=best)
        if best > mode.patch_threshold:
            kept.append(c)
        else:
            rejected.append(c)
    report = {
        "input": len(cands),
        "accepted": len(kept),
        "rejected": len(rejected),
        "outside_grid": uncovered,
    }
    return kept, {"rejected_sites": rejected, **report}


# ---------------------------------------------------------------------------
# full pipeline over a scene time series


@dataclass
class DetectionResult:
    mode: SensitivityMode
    months: list[str]
    averaged: Heatmap
    heatmaps: list[tuple[str, Heatmap]]
    grids: list[tuple[str, PatchScoreGrid]]
    candidates: list[CandidateSite]
    rejected: list[CandidateSite] = field(default_factory=list)  # failed patch cross-validation
    report: dict = field(default_factory=dict)


def composite_pair(frames: list[RasterFrame], month: str, span: int = 3):
    """Trailing windows: the pair for month m is ([m-2, m], [m-8, m-6])."""
    now = Window(start=month_add(month, -(span - 1)), span=span)
    prev = Window(start=month_add(month, -(span - 1) - 6), span=span)
    return min_composite(frames, now), min_composite(frames, prev)


def run_detection(frames: list[RasterFrame], bundle, mode: SensitivityMode, months: list[str],
                  geotransform=None, doh_threshold: float = DOH_RESPONSE_THRESHOLD,
                  tile_grid: tuple[int, int] = (1, 1), workers: int = 1) -> DetectionResult:
    """Composite -> spectrograms -> heatmaps -> timestep average -> blobs -> patch cross-validation."""
    patch_model = bundle.patch_scorer()
    heatmaps, grids = [], []
    for month in months:
        try:
            c_now, c_prev = composite_pair(frames, month)
        except ValueError as e:
            raise DetectionStageError("compositing", e) from e
        try:
            fld, _ = build_spectrogram_field(c_now, c_prev)
            nfld = bundle.stats.normalize_field(fld)
        except ValueError as e:
            raise DetectionStageError("spectrograms", e) from e
        try:
            heatmaps.append((month, infer_heatmap_tiled(bundle.pixel, nfld, tile_grid, workers)))
            grids.append((month, infer_patch_grid(patch_model, c_now, c_prev, bundle.stats)))
        except ValueError as e:
            raise DetectionStageError("inference", e) from e
    averaged = average_timesteps([hm for _, hm in heatmaps])
    cands = detect_blobs(averaged, mode, doh_threshold=doh_threshold,
                         geotransform=geotransform, first_month=months[0])
    kept, report = cross_validate(cands, [g for _, g in grids], mode)
    rejected = report.pop("rejected_sites")
    return DetectionResult(
        mode=mode, months=list(months), averaged=averaged, heatmaps=heatmaps,
        grids=grids, candidates=kept, rejected=rejected, report=report,
    )


# ---------------------------------------------------------------------------
# persistence


def candidates_to_geojson(cands: list[CandidateSite]) -> dict:
    feats = []
    for c in cands:
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [c.center_geo[0], c.center_geo[1]]},
                "properties": {
                    "id": c.id,
                    "mode": c.mode,
                    "pixel_score": c.pixel_score,
                    "patch_score": c.patch_score,
                    "blob_sigma": c.sigma,
                    "status": c.status,
                    "center_px": list(c.center_px),
                    "first_month": c.first_month,
                },
            }
        )
    return {"type": "FeatureCollection", "format_version": 1, "features": feats}


def candidates_from_geojson(gj: dict) -> list[CandidateSite]:
    out = []
    for f in gj["features"]:
        p = f["properties"]
        out.append(
            CandidateSite(
                id=p["id"],
                center_px=tuple(p.get("center_px", (0, 0))),
                center_geo=tuple(f["geometry"]["coordinates"]),
                sigma=p["blob_sigma"],
                pixel_score=p["pixel_score"],
                patch_score=p.get("patch_score"),
                mode=p["mode"],
                status=p.get("status", "candidate"),
                first_month=p.get("first_month", ""),
            )
        )
    return out


def save_heatmap(path_prefix, hm: Heatmap) -> None:
    """Raster-container style: JSON sidecar plus little-endian float32/uint8 planes."""
    meta = {
        "format_version": 1,
        "width": hm.width,
        "height": hm.height,
        "origin": list(hm.origin),
        "layout": "scores float32 LE row-major, then validity uint8",
    }
    Path(str(path_prefix) + ".json").write_text(json.dumps(meta))
    with open(str(path_prefix) + ".bin", "wb") as f:
        f.write(np.ascontiguousarray(hm.scores, dtype="<f4").tobytes())
        f.write(hm.valid.astype(np.uint8).tobytes())


def load_heatmap(path_prefix) -> Heatmap:
    meta = json.loads(Path(str(path_prefix) + ".json").read_text())
    raw = Path(str(path_prefix) + ".bin").read_bytes()
    h, w = meta["height"], meta["width"]
    scores = np.frombuffer(raw[: h * w * 4], dtype="<f4").reshape(h, w).copy()
    valid = np.frombuffer(raw[h * w * 4 :], dtype=np.uint8).reshape(h, w).astype(bool)
    return Heatmap(scores=scores, valid=valid, origin=tuple(meta["origin"]))
