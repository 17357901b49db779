"""Planar geometry helpers: point-in-polygon, rasterization, shoelace area, point-segment distance."""

from __future__ import annotations

import numpy as np


def polygon_area(ring: np.ndarray) -> float:
    """Unsigned shoelace area of a closed ring given as (n, 2) vertices."""
    x, y = np.asarray(ring, dtype=np.float64).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def signed_area(ring: np.ndarray) -> float:
    x, y = np.asarray(ring, dtype=np.float64).T
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd ray-cast test, vectorized over (m, 2) points. Boundary points are implementation-defined."""
    pts = np.asarray(points, dtype=np.float64)
    ring = np.asarray(ring, dtype=np.float64)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = ring[:, 0][None, :], ring[:, 1][None, :]
    x2, y2 = np.roll(ring[:, 0], -1)[None, :], np.roll(ring[:, 1], -1)[None, :]
    crosses = ((y1 > y) != (y2 > y)) & (x < (x2 - x1) * (y - y1) / (y2 - y1 + 1e-300) + x1)
    return crosses.sum(axis=1) % 2 == 1


def rasterize_polygon(ring: np.ndarray, height: int, width: int) -> np.ndarray:
    """Boolean mask of pixels whose centers fall inside the ring (pixel coords, x=col, y=row)."""
    ring = np.asarray(ring, dtype=np.float64)
    x0 = max(int(np.floor(ring[:, 0].min())), 0)
    x1 = min(int(np.ceil(ring[:, 0].max())) + 1, width)
    y0 = max(int(np.floor(ring[:, 1].min())), 0)
    y1 = min(int(np.ceil(ring[:, 1].max())) + 1, height)
    mask = np.zeros((height, width), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys, xs = np.mgrid[y0:y1, x0:x1]
    centers = np.column_stack([xs.ravel() + 0.5, ys.ravel() + 0.5])
    inside = points_in_polygon(centers, ring).reshape(y1 - y0, x1 - x0)
    mask[y0:y1, x0:x1] = inside
    return mask


def circle_ring(cx: float, cy: float, radius: float, n: int = 32) -> np.ndarray:
    """Closed polygon approximating a circle (first vertex not repeated)."""
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    """Euclidean distance from point p to segment ab."""
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return float(np.hypot(px - ax, py - ay))
    t = ((px - ax) * dx + (py - ay) * dy) / L2
    t = min(1.0, max(0.0, t))
    return float(np.hypot(px - (ax + t * dx), py - (ay + t * dy)))


def point_polyline_distance(px: float, py: float, coords: np.ndarray) -> float:
    """Min distance from point to an open polyline given as (n, 2) vertices; vectorized over segments."""
    c = np.asarray(coords, dtype=np.float64)
    if len(c) == 1:
        return float(np.hypot(px - c[0, 0], py - c[0, 1]))
    a, b = c[:-1], c[1:]
    d = b - a
    L2 = (d * d).sum(axis=1)
    ap = np.array([px, py]) - a
    t = np.where(L2 > 0, (ap * d).sum(axis=1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a + t[:, None] * d
    return float(np.hypot(px - foot[:, 0], py - foot[:, 1]).min())
