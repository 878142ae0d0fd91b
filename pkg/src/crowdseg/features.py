"""Fixed-order feature vector summarizing one annotation session.

The vector combines clickstream dynamics (velocity, acceleration, event
counts, stroke structure) with image evidence (angles between movement /
contour normals and the local intensity gradient). Blocks that are
undefined for a session (no corrections, zero-length contour, all-zero
gradients, ...) are filled with a zero sentinel so every session
featurizes, spam included.

Summary-statistic conventions: population standard deviation, median as
the mean of the two middle order statistics, 95% quantile by linear
interpolation between order statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clickstream import (
    CANVAS,
    DOUBLE_CLICK,
    MOUSE_DOWN,
    MOUSE_MOVE,
    Clickstream,
    Stroke,
    canvas_clicks,
    classify_strokes,
    count_events,
    segment_strokes,
    zoom_count,
)
from .geometry import Polygon, contour_length, path_length, vertex_normals
from .imaging import GradientField, sample_gradient


class FeatureError(ValueError):
    pass


SCHEMA_VERSION = "features/v1"

_STAT_SUFFIXES = ("mean", "median", "std", "q95")


def _stat_block(prefix: str) -> tuple[str, ...]:
    return tuple(f"{prefix}_{s}" for s in _STAT_SUFFIXES)


FEATURE_NAMES: tuple[str, ...] = (
    _stat_block("velocity")
    + _stat_block("acceleration")
    + (
        "zoom_events",
        "canvas_clicks",
        "double_clicks",
        "time_per_click",
        "travel_contour_ratio",
        "stroke_count",
        "draw_count",
        "correction_count",
        "event_count",
    )
    + _stat_block("draw_velocity")
    + _stat_block("draw_acceleration")
    + _stat_block("correction_velocity")
    + _stat_block("correction_acceleration")
    + _stat_block("draw_gradient_angle")
    + _stat_block("correction_gradient_angle")
    + _stat_block("click_gradient_angle")
    + _stat_block("normal_gradient_angle")
)

N_FEATURES = len(FEATURE_NAMES)  # 49


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    median: float
    std: float
    q95: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mean, self.median, self.std, self.q95)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # (N_FEATURES,)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise FeatureError(f"expected {N_FEATURES} features, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FeatureError("feature values must be finite")
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_NAMES.index(name)])


def summary_stats(xs) -> SummaryStats:
    """Mean / median / population std / 95% quantile; zeros when empty."""
    arr = np.asarray(list(xs), dtype=np.float64)
    if arr.size == 0:
        return SummaryStats(0.0, 0.0, 0.0, 0.0)
    return SummaryStats(
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        std=float(arr.std()),
        q95=float(np.percentile(arr, 95)),
    )


def _velocity_samples(stream: Clickstream) -> list[tuple[int, float, float]]:
    """(event index, timestamp, speed) per event with a predecessor.

    Speed is the canvas-space displacement over elapsed time for mouse-move
    events, and zero for every click/wheel event. Move events with zero
    elapsed time are skipped.
    """
    out: list[tuple[int, float, float]] = []
    events = stream.events
    for i in range(1, len(events)):
        e = events[i]
        if e.kind != MOUSE_MOVE:
            out.append((i, e.t, 0.0))
            continue
        prev = events[i - 1]
        dt = e.t - prev.t
        if dt <= 0:
            continue
        dist = math.hypot(
            e.canvas_pos[0] - prev.canvas_pos[0], e.canvas_pos[1] - prev.canvas_pos[1]
        )
        out.append((i, e.t, dist / dt))
    return out


def velocity_series(stream: Clickstream) -> list[float]:
    """Per-event speeds in canvas px/ms."""
    if len(stream) < 2:
        raise FeatureError("velocity needs at least 2 events")
    return [s for _, _, s in _velocity_samples(stream)]


def _acceleration_samples(stream: Clickstream) -> list[tuple[int, float]]:
    samples = _velocity_samples(stream)
    out: list[tuple[int, float]] = []
    for (_, t0, v0), (i1, t1, v1) in zip(samples, samples[1:]):
        dt = t1 - t0
        if dt > 0:
            out.append((i1, (v1 - v0) / dt))
    return out


def acceleration_series(stream: Clickstream) -> list[float]:
    """Signed speed change per millisecond (canvas px/ms^2)."""
    if len(stream) < 3:
        raise FeatureError("acceleration needs at least 3 events")
    return [a for _, a in _acceleration_samples(stream)]


def angle_to_gradient(direction, gradient) -> float:
    """Angle in [0, 90] degrees between a movement/normal and the gradient.

    The raw angle is folded so that parallel and anti-parallel both map to 0
    and perpendicular to 90, since a contour may be traced in either
    direction along an edge.
    """
    dx, dy = float(direction[0]), float(direction[1])
    gx, gy = float(gradient[0]), float(gradient[1])
    nd = math.hypot(dx, dy)
    ng = math.hypot(gx, gy)
    if nd == 0.0 or ng == 0.0:
        raise FeatureError("undefined angle for zero-length vector")
    cos_omega = (dx * gx + dy * gy) / (nd * ng)
    omega = math.degrees(math.acos(min(1.0, max(-1.0, cos_omega))))
    gamma = omega if 0.0 <= omega <= 180.0 else 360.0 - omega
    return 90.0 - abs(90.0 - gamma)


def _angles_for_moves(
    stream: Clickstream, strokes: list[Stroke], grad: GradientField
) -> list[float]:
    """Folded gradient angles for the move events of the given strokes."""
    events = stream.events
    angles: list[float] = []
    for s in strokes:
        for i in s.move_indices:
            prev = events[i - 1]
            cur = events[i]
            d = (
                cur.image_pos[0] - prev.image_pos[0],
                cur.image_pos[1] - prev.image_pos[1],
            )
            if d == (0.0, 0.0):
                continue
            g = sample_gradient(grad, cur.image_pos)
            if g[0] == 0.0 and g[1] == 0.0:
                continue
            angles.append(angle_to_gradient(d, g))
    return angles


def _angles_for_clicks(stream: Clickstream, grad: GradientField) -> list[float]:
    """Angles for consecutive canvas clicks, direction = previous -> current."""
    clicks = [
        e for e in stream.events if e.kind == MOUSE_DOWN and e.target == CANVAS
    ]
    angles: list[float] = []
    for prev, cur in zip(clicks, clicks[1:]):
        d = (
            cur.image_pos[0] - prev.image_pos[0],
            cur.image_pos[1] - prev.image_pos[1],
        )
        if d == (0.0, 0.0):
            continue
        g = sample_gradient(grad, cur.image_pos)
        if g[0] == 0.0 and g[1] == 0.0:
            continue
        angles.append(angle_to_gradient(d, g))
    return angles


def _angles_for_contour(poly: Polygon, grad: GradientField) -> list[float]:
    if len(poly) < 3:
        return []
    normals = vertex_normals(poly)
    angles: list[float] = []
    for vertex, normal in zip(poly.vertices, normals):
        if normal[0] == 0.0 and normal[1] == 0.0:
            continue
        g = sample_gradient(grad, vertex)
        if g[0] == 0.0 and g[1] == 0.0:
            continue
        angles.append(angle_to_gradient(normal, g))
    return angles


def extract_features(
    stream: Clickstream, poly: Polygon, grad: GradientField
) -> FeatureVector:
    """Compute the full feature vector for one session.

    ``poly`` is the final contour the session produced (may be empty when
    the worker deleted it) and ``grad`` the gradient field of the annotated
    image.
    """
    vel_samples = _velocity_samples(stream) if len(stream) >= 2 else []
    acc_samples = _acceleration_samples(stream) if len(stream) >= 3 else []
    speeds = [v for _, _, v in vel_samples]
    accels = [a for _, a in acc_samples]
    speed_at = {i: v for i, _, v in vel_samples}
    accel_at = {i: a for i, a in acc_samples}

    strokes = segment_strokes(stream)
    draws, corrections = classify_strokes(strokes, stream)

    def stroke_values(subset: list[Stroke], table: dict[int, float]) -> list[float]:
        return [
            table[i] for s in subset for i in s.move_indices if i in table
        ]

    n_clicks = canvas_clicks(stream)
    elapsed = stream.elapsed_ms()
    travel = path_length(stream.events, "image")
    ratio = 0.0
    if len(poly) >= 2:
        clen = contour_length(poly)
        if clen > 0.0:
            ratio = travel / clen

    values: list[float] = []
    values += summary_stats(speeds).as_tuple()
    values += summary_stats(accels).as_tuple()
    values += [
        float(zoom_count(stream)),
        float(n_clicks),
        float(count_events(stream, kind=DOUBLE_CLICK, target=CANVAS)),
        elapsed / max(n_clicks, 1),
        ratio,
        float(len(strokes)),
        float(len(draws)),
        float(len(corrections)),
        float(len(stream)),
    ]
    values += summary_stats(stroke_values(draws, speed_at)).as_tuple()
    values += summary_stats(stroke_values(draws, accel_at)).as_tuple()
    values += summary_stats(stroke_values(corrections, speed_at)).as_tuple()
    values += summary_stats(stroke_values(corrections, accel_at)).as_tuple()
    values += summary_stats(_angles_for_moves(stream, draws, grad)).as_tuple()
    values += summary_stats(_angles_for_moves(stream, corrections, grad)).as_tuple()
    values += summary_stats(_angles_for_clicks(stream, grad)).as_tuple()
    values += summary_stats(_angles_for_contour(poly, grad)).as_tuple()
    return FeatureVector(np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------------------
# feature matrix file (TSV): comment line with the schema version, then a
# header row, then one row per annotation.

_META_COLUMNS = ("worker_id", "image_id")
_LABEL_COLUMN = "true_dsc"


def write_feature_table(path, rows, with_labels: bool) -> None:
    """``rows``: iterable of (worker_id, image_id, FeatureVector, dsc|None)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#schema_version={SCHEMA_VERSION}\n")
        header = list(_META_COLUMNS) + list(FEATURE_NAMES)
        if with_labels:
            header.append(_LABEL_COLUMN)
        fh.write("\t".join(header) + "\n")
        for worker_id, image_id, fv, label in rows:
            if fv.schema_version != SCHEMA_VERSION:
                raise FeatureError(
                    f"schema mismatch: {fv.schema_version} vs {SCHEMA_VERSION}"
                )
            cells = [worker_id, image_id] + [repr(float(v)) for v in fv.values]
            if with_labels:
                if label is None:
                    raise FeatureError("missing label for labeled feature table")
                cells.append(repr(float(label)))
            fh.write("\t".join(cells) + "\n")


def read_feature_table(path):
    """Returns (schema_version, worker_ids, image_ids, X, labels|None)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("#schema_version="):
            raise FeatureError(f"{path}: missing schema_version line")
        schema = first.split("=", 1)[1]
        header = fh.readline().strip().split("\t")
        with_labels = header[-1] == _LABEL_COLUMN
        expected = list(_META_COLUMNS) + list(FEATURE_NAMES) + (
            [_LABEL_COLUMN] if with_labels else []
        )
        if schema == SCHEMA_VERSION and header != expected:
            raise FeatureError(f"{path}: unexpected column header")
        workers: list[str] = []
        images: list[str] = []
        feats: list[list[float]] = []
        labels: list[float] = []
        n_cols = len(header)
        for lineno, line in enumerate(fh, start=3):
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != n_cols:
                raise FeatureError(f"{path}:{lineno}: expected {n_cols} columns")
            workers.append(cells[0])
            images.append(cells[1])
            end = n_cols - 1 if with_labels else n_cols
            feats.append([float(c) for c in cells[2:end]])
            if with_labels:
                labels.append(float(cells[-1]))
    X = np.asarray(feats, dtype=np.float64).reshape(len(feats), -1)
    return schema, workers, images, X, (np.asarray(labels) if with_labels else None)
