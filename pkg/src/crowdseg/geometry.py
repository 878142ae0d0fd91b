"""Polygon contours, binary masks, rasterization and overlap metrics.

Conventions (fixed for determinism):
  * pixel (x, y) has its center at (x + 0.5, y + 0.5);
  * rasterization fills pixel centers inside the closed contour under the
    even-odd rule with half-open edges ([ymin, ymax) vertically, [xl, xr)
    horizontally), so points exactly on an edge resolve deterministically;
  * the crossing abscissa is always computed as
    ``x1 + (yc - y1) * (x2 - x1) / (y2 - y1)`` so independent point-in-polygon
    checks using the same expression agree bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Polygon:
    """Closed contour given as ordered vertices in image coordinates.

    The closing segment (last vertex back to the first) is implicit.
    """

    vertices: np.ndarray  # (n, 2) float64, columns x, y

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if v.size and not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class Mask:
    """Binary raster; ``bits[y, x]`` is 1 for object pixels."""

    bits: np.ndarray  # (h, w) uint8 in {0, 1}

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise GeometryError("mask must be two-dimensional")
        if b.dtype != np.uint8:
            b = b.astype(np.uint8)
        if b.size and b.max() > 1:
            raise GeometryError("mask values must be 0 or 1")
        object.__setattr__(self, "bits", b)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def area(self) -> int:
        return int(self.bits.sum())


def rasterize(poly: Polygon, width: int, height: int) -> Mask:
    """Scanline even-odd fill of ``poly`` onto a ``width`` x ``height`` grid.

    A pixel is set when its center lies inside the contour; the result is
    clipped to the image bounds. Self-intersecting contours follow the
    even-odd rule (used deliberately for inverted/scribble annotations).
    """
    if len(poly) < 3:
        raise GeometryError("degenerate contour: need at least 3 vertices")
    if width <= 0 or height <= 0:
        raise GeometryError("mask dimensions must be positive")

    v = poly.vertices
    x1 = v[:, 0]
    y1 = v[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)

    bits = np.zeros((height, width), dtype=np.uint8)
    ylo = max(0, int(math.floor(y1.min() - 0.5)))
    yhi = min(height - 1, int(math.ceil(y1.max())))
    nonhoriz = y1 != y2
    if not nonhoriz.any():
        return Mask(bits)
    ex1, ey1, ex2, ey2 = x1[nonhoriz], y1[nonhoriz], x2[nonhoriz], y2[nonhoriz]

    for y in range(ylo, yhi + 1):
        yc = y + 0.5
        crossing = ((ey1 <= yc) & (yc < ey2)) | ((ey2 <= yc) & (yc < ey1))
        if not crossing.any():
            continue
        xs = ex1[crossing] + (yc - ey1[crossing]) * (ex2[crossing] - ex1[crossing]) / (
            ey2[crossing] - ey1[crossing]
        )
        xs = np.sort(xs)
        for a, b in zip(xs[0::2], xs[1::2]):
            # centers x + 0.5 in [a, b)
            lo = max(0, math.ceil(a - 0.5))
            hi = min(width, math.ceil(b - 0.5))
            if hi > lo:
                bits[y, lo:hi] = 1
    return Mask(bits)


def dice(u: Mask, v: Mask) -> float:
    """Dice similarity coefficient 2|U∩V| / (|U|+|V|) of two equal-size masks.

    Two empty masks compare as 1.0 (perfect agreement on "no object");
    exactly one empty mask gives 0.0.
    """
    if u.bits.shape != v.bits.shape:
        raise GeometryError(
            f"mask dimensions differ: {u.bits.shape} vs {v.bits.shape}"
        )
    nu = u.area()
    nv = v.area()
    if nu == 0 and nv == 0:
        return 1.0
    inter = int(np.sum((u.bits & v.bits)))
    return 2.0 * inter / (nu + nv)


def contour_length(poly: Polygon) -> float:
    """Perimeter of the closed contour, closing segment included."""
    if len(poly) < 2:
        raise GeometryError("contour length needs at least 2 vertices")
    d = np.roll(poly.vertices, -1, axis=0) - poly.vertices
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def polyline_length(points: np.ndarray) -> float:
    """Length of an open polyline (no closing segment)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    d = np.diff(pts, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def path_length(events, coordinate_space: str = "image") -> float:
    """Total distance traveled over an event sequence.

    ``events`` is any sequence with ``canvas_pos`` / ``image_pos`` attributes;
    ``coordinate_space`` selects which of the two to measure in.
    """
    if coordinate_space == "image":
        pts = [e.image_pos for e in events]
    elif coordinate_space == "canvas":
        pts = [e.canvas_pos for e in events]
    else:
        raise GeometryError(f"unknown coordinate space {coordinate_space!r}")
    return polyline_length(np.asarray(pts, dtype=np.float64)) if pts else 0.0


def segment_normals(poly: Polygon) -> np.ndarray:
    """Unnormalized normal (-dy, dx) of every segment, closing one included."""
    if len(poly) < 2:
        raise GeometryError("segment normals need at least 2 vertices")
    d = np.roll(poly.vertices, -1, axis=0) - poly.vertices
    return np.column_stack([-d[:, 1], d[:, 0]])


def vertex_normals(poly: Polygon) -> np.ndarray:
    """Per-vertex normal: the average of the two adjacent segment normals."""
    if len(poly) < 3:
        raise GeometryError("vertex normals need at least 3 vertices")
    n = segment_normals(poly)
    return 0.5 * np.roll(n, 1, axis=0) + 0.5 * n


def write_polygon(path, poly: Polygon) -> None:
    """One ``x y`` vertex pair per line, image coordinates, drawing order."""
    with open(path, "w", encoding="ascii") as fh:
        for x, y in poly.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def read_polygon(path) -> Polygon:
    verts = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GeometryError(f"{path}:{lineno}: expected 'x y' pair")
            try:
                verts.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise GeometryError(f"{path}:{lineno}: bad number") from exc
    return Polygon(np.asarray(verts, dtype=np.float64).reshape(-1, 2))
