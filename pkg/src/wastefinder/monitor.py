"""Stage-4 footprint monitoring.

Monthly heatmaps per site region, a forward-looking rolling-median mask that
suppresses single-frame outliers, border-following contour extraction on the
thresholded result, area time series, and waterway-distance metadata.

Contours trace pixel edges (not centers), so the polygon area of a component
minus its holes equals its pixel count exactly; footprints are reported as
outer boundaries with hole area already subtracted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wastefinder.dataengine.months import month_index
from wastefinder.dataengine.raster import RasterFrame, pixel_to_geo
from wastefinder.detect import Heatmap, composite_pair, infer_heatmap
from wastefinder.dataengine.spectrogram import build_spectrogram_field
from wastefinder.geometry import signed_area
from wastefinder.imageops import label_components

FOOTPRINT_THRESHOLD = 0.5  # binarization of masked predictions
ROLLING_WINDOW = 8  # number of following frames feeding the median mask
HECTARES_PER_PIXEL = 0.01  # 10 m pixels: 100 m^2 each


# ---------------------------------------------------------------------------
# monthly heatmaps


def monthly_heatmaps(frames: list[RasterFrame], pixel_model, stats,
                     ) -> tuple[list[tuple[str, Heatmap]], list[tuple[str, str]]]:
    """One heatmap per catalog month whose six-month lookback is also in the catalog.

    Months whose composite pair has no jointly valid pixel are reported as gaps.
    """
    if not frames:
        raise ValueError("empty frame catalog")
    months = sorted({f.month for f in frames}, key=month_index)
    first = month_index(months[0])
    series: list[tuple[str, Heatmap]] = []
    gaps: list[tuple[str, str]] = []
    for m in months:
        if month_index(m) - first < 6:
            continue
        try:
            c_now, c_prev = composite_pair(frames, m)
        except ValueError as e:
            gaps.append((m, str(e)))
            continue
        fld, _ = build_spectrogram_field(c_now, c_prev)
        if not fld.valid.any():
            gaps.append((m, "no jointly valid pixels in composite pair"))
            continue
        series.append((m, infer_heatmap(pixel_model, stats.normalize_field(fld))))
    return series, gaps


def rolling_mask(series: list[Heatmap], index: int, window: int = ROLLING_WINDOW,
                 threshold: float = FOOTPRINT_THRESHOLD) -> Heatmap:
    """Mask frame `index` by the thresholded median of up to `window` following frames.

    With fewer following frames available all of them are used; the last frame
    has none and passes through unmasked. The mask is multiplicative, so it can
    only remove predictions, never add them.
    """
    if not 0 <= index < len(series):
        raise IndexError(f"index {index} outside series of length {len(series)}")
    cur = series[index]
    following = series[index + 1 : index + 1 + window]
    if not following:
        return Heatmap(cur.scores.copy(), cur.valid.copy(), cur.origin)
    med = np.median(np.stack([h.scores for h in following]), axis=0)
    keep = med > threshold
    return Heatmap((cur.scores * keep).astype(np.float32), cur.valid.copy(), cur.origin)


# ---------------------------------------------------------------------------
# border following on the binary footprint


def _boundary_edges(mask: np.ndarray):
    """Directed pixel-edge segments with the region on a fixed side.

    Edge vertices are lattice corners; pixel (r, c) spans corners (c, r) to
    (c+1, r+1). Each exposed side contributes one edge, oriented so that outer
    rings come out with positive shoelace area and holes negative.
    """
    padded = np.pad(mask, 1)
    edges = []  # (start, direction)
    rs, cs = np.nonzero(mask & ~padded[:-2, 1:-1])  # exposed top sides
    edges += [((c, r), (1, 0)) for r, c in zip(rs, cs)]
    rs, cs = np.nonzero(mask & ~padded[1:-1, 2:])  # right
    edges += [((c + 1, r), (0, 1)) for r, c in zip(rs, cs)]
    rs, cs = np.nonzero(mask & ~padded[2:, 1:-1])  # bottom
    edges += [((c + 1, r + 1), (-1, 0)) for r, c in zip(rs, cs)]
    rs, cs = np.nonzero(mask & ~padded[1:-1, :-2])  # left
    edges += [((c, r + 1), (0, -1)) for r, c in zip(rs, cs)]
    return edges


def _turn_preference(incoming):
    """Outgoing directions from best to worst: left turn, straight, right turn, back.

    The left-most rule splits corner-touching hole boundaries into separate
    rings; every directed edge is used exactly once either way, so the summed
    signed area stays exact by Green's theorem.
    """
    dx, dy = incoming
    return ((dy, -dx), (dx, dy), (-dy, dx), (-dx, -dy))


def _chain_rings(edges):
    """Join directed edges into closed rings (each edge used exactly once)."""
    by_start: dict[tuple, list[int]] = {}
    for i, (start, _) in enumerate(edges):
        by_start.setdefault(start, []).append(i)
    used = [False] * len(edges)
    rings = []
    for i0 in range(len(edges)):
        if used[i0]:
            continue
        start0, d = edges[i0]
        used[i0] = True
        ring = [start0]
        cur = (start0[0] + d[0], start0[1] + d[1])
        incoming = d
        while cur != start0:
            ring.append(cur)
            options = [j for j in by_start.get(cur, ()) if not used[j]]
            if not options:
                raise RuntimeError("open boundary chain; mask edges are inconsistent")
            if len(options) > 1:
                prefer = _turn_preference(incoming)
                options.sort(key=lambda j: prefer.index(edges[j][1]))
            j = options[0]
            used[j] = True
            incoming = edges[j][1]
            cur = (cur[0] + incoming[0], cur[1] + incoming[1])
        rings.append(np.array(ring, dtype=np.float64))
    return rings


def _simplify_ring(ring: np.ndarray) -> np.ndarray:
    """Drop collinear vertices (unit edges sharing a direction)."""
    d = np.diff(np.vstack([ring, ring[:1]]), axis=0)
    keep = np.any(d != np.roll(d, 1, axis=0), axis=1)
    return ring[keep]


@dataclass
class ContourRecord:
    """Outer boundary of one connected positive region."""

    ring: np.ndarray  # (n, 2) lattice-corner vertices, pixel coordinates
    area_px: float  # shoelace area of the outer ring minus its holes
    pixel_count: int
    hole_count: int

    @property
    def area_ha(self) -> float:
        return self.area_px * HECTARES_PER_PIXEL


def extract_contours(mask_or_heatmap, threshold: float = FOOTPRINT_THRESHOLD) -> list[ContourRecord]:
    """Outer boundaries of 4-connected positive regions via border following.

    Each component is traced on its own sub-mask; its area is the signed sum
    over all of its boundary rings (holes count negative), which equals the
    component's pixel count exactly.
    """
    if isinstance(mask_or_heatmap, Heatmap):
        mask = (mask_or_heatmap.scores > threshold) & mask_or_heatmap.valid
    else:
        mask = np.asarray(mask_or_heatmap).astype(bool)
    if not mask.any():
        return []
    labels, n = label_components(mask, connectivity=4)
    out = []
    for comp in range(1, n + 1):
        sel = labels == comp
        rs, cs = np.nonzero(sel)
        r0, r1 = rs.min(), rs.max() + 1
        c0, c1 = cs.min(), cs.max() + 1
        rings = _chain_rings(_boundary_edges(sel[r0:r1, c0:c1]))
        areas = [signed_area(r) for r in rings]
        outer_i = int(np.argmax(areas))
        outer = _simplify_ring(rings[outer_i]) + np.array([c0, r0], dtype=np.float64)
        out.append(
            ContourRecord(
                ring=outer,
                area_px=float(sum(areas)),
                pixel_count=int(len(rs)),
                hole_count=sum(1 for a in areas if a < 0),
            )
        )
    return out


# ---------------------------------------------------------------------------
# footprint series


@dataclass
class FootprintRecord:
    month: str
    contours: list[ContourRecord]

    @property
    def area_ha(self) -> float:
        return float(sum(c.area_px for c in self.contours) * HECTARES_PER_PIXEL)


@dataclass
class FootprintSeries:
    site_id: str
    records: list[FootprintRecord] = field(default_factory=list)

    def __post_init__(self):
        months = [month_index(r.month) for r in self.records]
        if any(b <= a for a, b in zip(months, months[1:])):
            raise ValueError("footprint months must be strictly increasing")

    def to_geojson(self, geotransform=None) -> dict:
        by_month = {}
        for r in self.records:
            feats = []
            for c in r.contours:
                ring = c.ring
                if geotransform is not None:
                    # contour vertices are lattice corners, offset half a pixel from centers
                    pts = [pixel_to_geo(geotransform, x - 0.5, y - 0.5) for x, y in ring]
                else:
                    pts = [(float(x), float(y)) for x, y in ring]
                pts.append(pts[0])
                feats.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in pts]]},
                        "properties": {"area_ha": c.area_ha, "pixel_count": c.pixel_count},
                    }
                )
            by_month[r.month] = {
                "type": "FeatureCollection",
                "features": feats,
                "properties": {"area_ha": r.area_ha},
            }
        return {"format_version": 1, "site_id": self.site_id, "months": by_month}


def footprint_series(site_id: str, monthly: list[tuple[str, Heatmap]],
                     threshold: float = FOOTPRINT_THRESHOLD,
                     window: int = ROLLING_WINDOW) -> FootprintSeries:
    """Apply the rolling mask to each month and trace the resulting footprints."""
    heatmaps = [hm for _, hm in monthly]
    records = []
    for i, (month, _) in enumerate(monthly):
        masked = rolling_mask(heatmaps, i, window=window, threshold=threshold)
        records.append(FootprintRecord(month=month, contours=extract_contours(masked, threshold)))
    return FootprintSeries(site_id=site_id, records=records)


def area_series(fp: FootprintSeries) -> tuple[list[tuple[str, float]], float | None]:
    """Per-month total hectares and their mean; mean is None (flagged) for an empty series."""
    rows = [(r.month, r.area_ha) for r in fp.records]
    if not rows:
        return [], None
    return rows, float(np.mean([a for _, a in rows]))


# ---------------------------------------------------------------------------
# waterway distance


@dataclass
class Waterway:
    tag: str  # river | stream | canal | waterbody | ...
    coords: np.ndarray  # (n, 2) planar meters
    name: str = ""

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if len(self.coords) < 2:
            raise ValueError("waterway features need at least 2 vertices")


def distance_to_waterway(point: tuple[float, float], waterways: list[Waterway]) -> tuple[float, str]:
    """Minimum point-to-segment distance over all features; ties keep the first feature."""
    if not waterways:
        raise ValueError("empty waterway set")
    px, py = float(point[0]), float(point[1])
    best, best_tag = np.inf, ""
    for wway in waterways:
        a = wway.coords[:-1]
        b = wway.coords[1:]
        d = b - a
        l2 = (d * d).sum(axis=1)
        t = np.zeros(len(a))
        nz = l2 > 0
        t[nz] = ((np.array([px, py]) - a[nz]) * d[nz]).sum(axis=1) / l2[nz]
        np.clip(t, 0.0, 1.0, out=t)
        foot = a + t[:, None] * d
        dist = float(np.hypot(px - foot[:, 0], py - foot[:, 1]).min())
        if dist < best:
            best, best_tag = dist, wway.tag
    return best, best_tag


def load_waterways_geojson(path) -> list[Waterway]:
    """LineString/Polygon features with a `tag` (or `waterway`/`water`) property."""
    gj = json.loads(Path(path).read_text())
    out = []
    for f in gj["features"]:
        props = f.get("properties") or {}
        tag = props.get("tag") or props.get("waterway") or props.get("water") or "waterbody"
        name = props.get("name", "")
        geom = f["geometry"]
        if geom["type"] == "LineString":
            out.append(Waterway(tag=tag, coords=np.array(geom["coordinates"]), name=name))
        elif geom["type"] == "Polygon":
            for ring in geom["coordinates"]:
                out.append(Waterway(tag=tag, coords=np.array(ring), name=name))
        else:
            raise ValueError(f"unsupported waterway geometry {geom['type']}")
    return out
