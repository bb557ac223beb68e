"""Geometry kernels: polygon rasterization and shape footprints.

Pixel-inclusion convention used everywhere: a pixel (x, y) belongs to a
shape iff its center (x + 0.5, y + 0.5) lies inside the shape; polygons
use the even-odd rule. Crossings exactly on a pixel center resolve to
the half-open rule (left edge included, right edge excluded).
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np


def point_in_polygon(px: float, py: float, vertices: Sequence[tuple[float, float]]) -> bool:
    """Even-odd test: count edge crossings strictly to the right of the point.

    Edges spanning the horizontal line through (px, py) are taken half-open
    in y ([ymin, ymax)) so shared vertices are counted once.
    """
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        if (y1 <= py < y2) or (y2 <= py < y1):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > px:
                inside = not inside
    return inside


def _scanline_crossings(vertices: Sequence[tuple[float, float]], y_center: float) -> list[float]:
    xs = []
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        if (y1 <= y_center < y2) or (y2 <= y_center < y1):
            xs.append(x1 + (y_center - y1) * (x2 - x1) / (y2 - y1))
    xs.sort()
    return xs


def rasterize_polygon(vertices: Sequence[tuple[float, float]], height: int, width: int) -> np.ndarray:
    """Scanline even-odd fill of one polygon onto an HxW boolean grid."""
    mask = np.zeros((height, width), dtype=bool)
    if len(vertices) < 3:
        return mask
    ys = [v[1] for v in vertices]
    row_lo = max(0, int(math.floor(min(ys) - 0.5)))
    row_hi = min(height - 1, int(math.ceil(max(ys))))
    for row in range(row_lo, row_hi + 1):
        xs = _scanline_crossings(vertices, row + 0.5)
        # fill pixel x iff x + 0.5 in [xs[2i], xs[2i+1])
        for a, b in zip(xs[0::2], xs[1::2]):
            x_start = max(0, math.ceil(a - 0.5))
            x_end = min(width - 1, math.ceil(b - 0.5) - 1)
            if x_end >= x_start:
                mask[row, x_start : x_end + 1] = True
    return mask


def rasterize_polygons(polygons: Iterable[Sequence[tuple[float, float]]], height: int, width: int) -> np.ndarray:
    """Union (per-polygon even-odd fills OR-ed together)."""
    mask = np.zeros((height, width), dtype=bool)
    for verts in polygons:
        mask |= rasterize_polygon(verts, height, width)
    return mask


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or improper intersection of open segments (shared endpoints excluded by caller)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def polygon_is_simple(vertices: Sequence[tuple[float, float]]) -> bool:
    """O(V^2) pairwise segment test; adjacent edges may share their endpoint."""
    n = len(vertices)
    if n < 3:
        return False
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            p1, p2 = edges[i]
            q1, q2 = edges[j]
            if adjacent:
                # allowed to touch at the shared vertex only
                shared = p2 if j == i + 1 else p1
                other_p = p1 if j == i + 1 else p2
                other_q = q2 if j == i + 1 else q1
                if _segments_intersect(p1, p2, q1, q2):
                    # collinear overlap beyond the shared vertex is a degenerate spike
                    if _point_strictly_inside_segment(other_q, p1, p2) or _point_strictly_inside_segment(
                        other_p, q1, q2
                    ):
                        return False
                continue
            if _segments_intersect(p1, p2, q1, q2):
                return False
    return True


def _point_strictly_inside_segment(c, a, b) -> bool:
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if cross != 0:
        return False
    dot = (c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1])
    length2 = (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    return 0 < dot < length2


def polygon_area(vertices: Sequence[tuple[float, float]]) -> float:
    """Unsigned shoelace area."""
    n = len(vertices)
    acc = 0.0
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def circle_mask(radius: float, center: tuple[float, float] | None = None, size: tuple[int, int] | None = None) -> np.ndarray:
    """Boolean footprint of a disk under the pixel-center convention.

    Without explicit center/size the disk is centered in its tight bounding
    box of side ceil(2*radius).
    """
    if size is None:
        side = max(1, int(math.ceil(2 * radius)))
        size = (side, side)
    if center is None:
        center = (size[1] / 2.0, size[0] / 2.0)
    h, w = size
    ys, xs = np.mgrid[0:h, 0:w]
    return (xs + 0.5 - center[0]) ** 2 + (ys + 0.5 - center[1]) ** 2 <= radius**2


def equilateral_triangle_vertices(side: float, orientation: float, center: tuple[float, float]) -> list[tuple[float, float]]:
    """Vertices of an equilateral triangle given side, rotation and centroid."""
    circum = side / math.sqrt(3.0)
    verts = []
    for k in range(3):
        ang = orientation + 2.0 * math.pi * k / 3.0
        verts.append((center[0] + circum * math.cos(ang), center[1] + circum * math.sin(ang)))
    return verts


def triangle_mask(side: float, orientation: float) -> np.ndarray:
    """Boolean footprint of an equilateral triangle centered in its circumdisk box."""
    circum = side / math.sqrt(3.0)
    box = max(1, int(math.ceil(2 * circum)))
    center = (box / 2.0, box / 2.0)
    verts = equilateral_triangle_vertices(side, orientation, center)
    return rasterize_polygon(verts, box, box)
