"""Synthetic scenes and worker behavior models for end-to-end testing.

Workers are simulated as archetypes mirroring the error classes observed in
real crowds: diligent tracing, sloppy tracing, random-scribble spam,
bounding boxes instead of contours, accurate segmentation of the wrong
(decoy) object, and inverted segmentations. Every simulated session emits
a wire-format clickstream consistent with its returned polygon, so the
whole pipeline can run without any real crowd.

Randomness: numpy PCG64 generators. The dataset builder derives one child
seed per scene from SeedSequence((seed, 1, image_index)) and one per
annotation from SeedSequence((seed, 2, image_index, worker_index)), making
datasets byte-reproducible for a given root seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clickstream import (
    CANVAS,
    MOUSE_DOWN,
    MOUSE_MOVE,
    MOUSE_UP,
    SAVE_BUTTON,
    WHEEL,
    Clickstream,
    Event,
)
from .geometry import Mask, Polygon, dice, rasterize
from .imaging import GrayImage


class SimulationError(ValueError):
    pass


DILIGENT = "diligent"
SLOPPY = "sloppy"
SPAMMER = "spammer"
BOUNDING_BOX = "bounding-box"
WRONG_OBJECT = "wrong-object"
INVERTED = "inverted"
ARCHETYPE_KINDS = (DILIGENT, SLOPPY, SPAMMER, BOUNDING_BOX, WRONG_OBJECT, INVERTED)

SCENE_SHAPES = ("circle", "blob", "rectangle")

_BACKGROUND = 60.0
_TARGET_FILL = 170.0
_DECOY_FILL = 220.0
_NOISE_SIGMA = 4.0
_MIN_SIZE = 48


@dataclass(frozen=True)
class WorkerArchetype:
    kind: str
    jitter_sigma: float = 0.7  # px of boundary-tracing noise
    speed: float = 0.25  # cursor px per ms
    correction_rate: float = 0.0  # probability of correcting a given vertex
    zoom_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ARCHETYPE_KINDS:
            raise SimulationError(f"unknown archetype {self.kind!r}")
        if self.jitter_sigma < 0:
            raise SimulationError("jitter_sigma must be >= 0")
        if self.speed <= 0:
            raise SimulationError("speed must be positive")
        if not 0.0 <= self.correction_rate <= 1.0:
            raise SimulationError("correction_rate must be a probability")
        if not 0.0 <= self.zoom_prob <= 1.0:
            raise SimulationError("zoom_prob must be a probability")


_PRESETS = {
    DILIGENT: dict(jitter_sigma=0.7, speed=0.25, correction_rate=0.03, zoom_prob=0.5),
    SLOPPY: dict(jitter_sigma=2.5, speed=1.0, correction_rate=0.0, zoom_prob=0.2),
    SPAMMER: dict(jitter_sigma=0.0, speed=3.0, correction_rate=0.0, zoom_prob=0.0),
    BOUNDING_BOX: dict(jitter_sigma=1.5, speed=0.5, correction_rate=0.0, zoom_prob=0.0),
    WRONG_OBJECT: dict(jitter_sigma=0.7, speed=0.25, correction_rate=0.03, zoom_prob=0.5),
    INVERTED: dict(jitter_sigma=0.7, speed=0.3, correction_rate=0.0, zoom_prob=0.0),
}


def archetype(kind: str, seed: int = 0, **overrides) -> WorkerArchetype:
    """Archetype with its canonical behavior parameters."""
    if kind not in _PRESETS:
        raise SimulationError(f"unknown archetype {kind!r}")
    params = dict(_PRESETS[kind])
    params.update(overrides)
    return WorkerArchetype(kind=kind, seed=seed, **params)


@dataclass(frozen=True)
class SyntheticScene:
    image: GrayImage
    reference: Mask
    reference_contour: Polygon
    decoy_reference: Mask | None = None
    decoy_contour: Polygon | None = None
    shape: str = "circle"

    def __post_init__(self):
        if self.reference.area() == 0:
            raise SimulationError("reference mask must be non-empty")
        if self.reference.bits.shape != self.image.intensity.shape:
            raise SimulationError("image and reference dimensions differ")

    @property
    def size(self) -> tuple[int, int]:
        return (self.image.width, self.image.height)


def _circle_contour(cx: float, cy: float, radius: float, step: float = 2.5) -> Polygon:
    n = max(24, int(round(2 * math.pi * radius / step)))
    ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return Polygon(np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)]))


def _blob_contour(rng, cx: float, cy: float, radius: float) -> Polygon:
    n = max(32, int(round(2 * math.pi * radius / 2.5)))
    ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    wobble = np.zeros(n)
    for k in (2, 3, 5):
        wobble += rng.uniform(0.04, 0.12) * np.sin(k * ang + rng.uniform(0, 2 * math.pi))
    r = radius * (1.0 + wobble)
    return Polygon(np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang)]))


def generate_scene(
    shape: str, size: int, seed: int = 0, decoy: bool = True
) -> SyntheticScene:
    """Textured image with one target shape and (optionally) a decoy circle.

    The target boundary carries an intensity contrast of 110 gray levels
    against the background so gradient-based features are meaningful.
    """
    if shape not in SCENE_SHAPES:
        raise SimulationError(f"unknown scene shape {shape!r}")
    if size < _MIN_SIZE:
        raise SimulationError(f"scene size must be >= {_MIN_SIZE}")
    rng = np.random.default_rng(seed)
    # target in the lower-right half so the decoy corner stays clear
    cx = size * 0.5 + rng.uniform(0.0, size / 16.0)
    cy = size * 0.5 + rng.uniform(0.0, size / 16.0)
    radius = round(size * 5.0 / 32.0)
    if shape == "circle":
        contour = _circle_contour(cx, cy, radius)
    elif shape == "blob":
        contour = _blob_contour(rng, cx, cy, radius)
    else:
        half_w = size * rng.uniform(0.14, 0.20)
        half_h = size * rng.uniform(0.14, 0.20)
        contour = Polygon(
            np.array(
                [
                    [cx - half_w, cy - half_h],
                    [cx + half_w, cy - half_h],
                    [cx + half_w, cy + half_h],
                    [cx - half_w, cy + half_h],
                ]
            )
        )
    reference = rasterize(contour, size, size)

    decoy_contour = None
    decoy_reference = None
    if decoy:
        decoy_contour = _circle_contour(size * 0.18, size * 0.18, size * 0.09)
        decoy_reference = rasterize(decoy_contour, size, size)

    img = np.full((size, size), _BACKGROUND)
    img[reference.bits == 1] = _TARGET_FILL
    if decoy_reference is not None:
        img[decoy_reference.bits == 1] = _DECOY_FILL
    img += rng.normal(0.0, _NOISE_SIGMA, size=(size, size))
    return SyntheticScene(
        image=GrayImage(np.clip(img, 0.0, 255.0)),
        reference=reference,
        reference_contour=contour,
        decoy_reference=decoy_reference,
        decoy_contour=decoy_contour,
        shape=shape,
    )


def _resample_closed(vertices: np.ndarray, step: float) -> np.ndarray:
    """Points every ``step`` px along the closed polyline, start included."""
    pts = np.asarray(vertices, dtype=np.float64)
    closed = np.vstack([pts, pts[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    n_out = max(8, int(total / step))
    distances = np.linspace(0.0, total, n_out, endpoint=False)
    cumulative = np.concatenate([[0.0], np.cumsum(seg_len)])
    out = np.empty((n_out, 2))
    for k, d in enumerate(distances):
        i = int(np.searchsorted(cumulative, d, side="right")) - 1
        i = min(i, len(seg) - 1)
        f = 0.0 if seg_len[i] == 0 else (d - cumulative[i]) / seg_len[i]
        out[k] = closed[i] + f * seg[i]
    return out


class _SessionRecorder:
    """Accumulates events on an integer-millisecond timeline."""

    def __init__(self, rng: np.random.Generator, size: int):
        self.rng = rng
        self.size = size
        self.t = int(rng.integers(0, 40))
        self.events: list[Event] = []

    def _tick(self) -> float:
        self.t += int(self.rng.integers(10, 21))
        return float(self.t)

    def _clip(self, p) -> tuple[float, float]:
        return (
            float(min(max(p[0], 0.0), self.size - 1.0)),
            float(min(max(p[1], 0.0), self.size - 1.0)),
        )

    def emit(self, p, kind: str, target: str = CANVAS) -> tuple[float, float]:
        pos = self._clip(p)
        self.events.append(Event(self._tick(), pos, pos, kind, target))
        return pos

    def wander(self, toward, n: int) -> None:
        start = self.rng.uniform(0, self.size, size=2)
        for f in np.linspace(0.0, 0.8, n):
            p = start + f * (np.asarray(toward) - start)
            self.emit(p, MOUSE_MOVE)

    def zoom(self, n: int, at) -> None:
        for _ in range(n):
            self.emit(at, WHEEL)

    def save(self) -> None:
        corner = (self.size - 2.0, self.size - 2.0)
        self.emit(corner, MOUSE_DOWN, SAVE_BUTTON)
        self.emit(corner, MOUSE_UP, SAVE_BUTTON)


def _trace_strokes(rec: _SessionRecorder, points: np.ndarray, n_chunks: int) -> list:
    """Drag-draw ``points`` as chained strokes; returns the vertex list."""
    vertices: list[tuple[float, float]] = []
    chunks = np.array_split(np.arange(len(points)), n_chunks)
    pen = None
    for chunk in chunks:
        if len(chunk) == 0:
            continue
        start = pen if pen is not None else tuple(points[chunk[0]])
        pen = rec.emit(start, MOUSE_DOWN)
        if not vertices or vertices[-1] != pen:
            vertices.append(pen)
        for idx in chunk:
            p = rec.emit(points[idx], MOUSE_MOVE)
            if vertices[-1] != p:
                vertices.append(p)
            pen = p
        rec.emit(pen, MOUSE_UP)
    return vertices


def _apply_corrections(
    rec: _SessionRecorder, vertices: list, rate: float, sigma: float
) -> list:
    """Grab existing vertices and nudge them; returns updated vertices."""
    if rate <= 0.0 or len(vertices) < 4:
        return vertices
    out = list(vertices)
    candidates = [
        i for i in range(len(out) - 1) if rec.rng.random() < rate
    ][:4]
    for i in candidates:
        grab = rec.emit(out[i], MOUSE_DOWN)
        assert grab == out[i]  # stays on-canvas: the grab matches an old event
        p = np.asarray(out[i], dtype=float)
        for _ in range(int(rec.rng.integers(2, 4))):
            p = p + rec.rng.normal(0.0, max(sigma, 0.3), size=2)
            moved = rec.emit(p, MOUSE_MOVE)
        out[i] = moved
        rec.emit(moved, MOUSE_UP)
    return out


def _trace_session(rec, contour, arch, n_chunks=None, zoom=True):
    step = max(1.5, arch.speed * 15.0)
    points = _resample_closed(contour.vertices, step)
    jitter = rec.rng.normal(0.0, arch.jitter_sigma, size=points.shape)
    points = points + jitter
    if zoom and rec.rng.random() < arch.zoom_prob:
        # hover near (not exactly on) the future stroke start
        rec.zoom(int(rec.rng.integers(1, 3)), points[0] + rec.rng.uniform(1.0, 6.0, 2))
    rec.wander(points[0], int(rec.rng.integers(2, 5)))
    if n_chunks is None:
        n_chunks = int(rec.rng.integers(1, 4))
    vertices = _trace_strokes(rec, points, n_chunks)
    vertices = _apply_corrections(rec, vertices, arch.correction_rate, arch.jitter_sigma)
    return vertices


def simulate_annotation(
    scene: SyntheticScene,
    w: WorkerArchetype,
    worker_id: str = "w0",
    image_id: str = "img0",
) -> tuple[Clickstream, Polygon]:
    """One simulated session: returns the emitted clickstream, whose final
    contour vertices all appear as events, and the resulting polygon."""
    rng = np.random.default_rng(w.seed)
    size = scene.image.width
    rec = _SessionRecorder(rng, size)

    if w.kind in (DILIGENT, SLOPPY):
        vertices = _trace_session(rec, scene.reference_contour, w)
    elif w.kind == WRONG_OBJECT:
        if scene.decoy_contour is None:
            raise SimulationError("wrong-object archetype needs a scene with a decoy")
        vertices = _trace_session(rec, scene.decoy_contour, w)
    elif w.kind == SPAMMER:
        # a short, fast scribble around one random spot; the tight 8 px
        # amplitude keeps the even-odd fill area far below any reference
        n = int(rng.integers(6, 13))
        centre = rng.uniform(size * 0.15, size * 0.85, size=2)
        p = np.clip(centre + rng.uniform(-8.0, 8.0, 2), 2.0, size - 3.0)
        vertices = [rec.emit(p, MOUSE_DOWN)]
        for _ in range(n):
            p = np.clip(centre + rng.uniform(-8.0, 8.0, 2), 2.0, size - 3.0)
            moved = rec.emit(p, MOUSE_MOVE)
            if vertices[-1] != moved:
                vertices.append(moved)
        rec.emit(vertices[-1], MOUSE_UP)
    elif w.kind == BOUNDING_BOX:
        ys, xs = np.nonzero(scene.reference.bits)
        jit = lambda: rng.normal(0.0, w.jitter_sigma)
        x0, x1 = xs.min() + jit(), xs.max() + 1 + jit()
        y0, y1 = ys.min() + jit(), ys.max() + 1 + jit()
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        rec.wander(corners[0], int(rng.integers(2, 4)))
        vertices = []
        pos = np.asarray(corners[0])
        for corner in corners:
            target = np.asarray(corner)
            if not np.array_equal(pos, target):
                # travel moves approach but never hit the corner exactly
                for f in (0.4, 0.8)[: int(rng.integers(1, 3))]:
                    rec.emit(pos + f * (target - pos), MOUSE_MOVE)
            p = rec.emit(corner, MOUSE_DOWN)
            rec.emit(corner, MOUSE_UP)
            vertices.append(p)
            pos = target
    else:  # INVERTED: frame clicks, then a diligent trace of the object
        m = 2.0
        frame = [(m, m), (size - 1 - m, m), (size - 1 - m, size - 1 - m), (m, size - 1 - m)]
        vertices = []
        for corner in frame:
            p = rec.emit(corner, MOUSE_DOWN)
            rec.emit(corner, MOUSE_UP)
            vertices.append(p)
        vertices += _trace_session(rec, scene.reference_contour, w, zoom=False)

    rec.save()
    stream = Clickstream(
        events=tuple(rec.events),
        worker_id=worker_id,
        image_id=image_id,
        canvas_size=(size, size),
        image_size=(size, size),
    )
    return stream, Polygon(np.asarray(vertices, dtype=np.float64))


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    worker_id: str
    archetype: str
    stream: Clickstream
    polygon: Polygon
    true_dsc: float


@dataclass(frozen=True)
class SimulatedDataset:
    scenes: dict[str, SyntheticScene]
    rows: tuple[AnnotationRecord, ...]
    seed: int
    size: int


def _assign_archetypes(mix: dict[str, float], n_workers: int, rng) -> list[str]:
    """Largest-remainder allocation of archetype counts, then a shuffle."""
    if not mix:
        raise SimulationError("archetype mix must not be empty")
    total = sum(mix.values())
    if total <= 0:
        raise SimulationError("archetype mix fractions must sum to > 0")
    kinds = sorted(mix)
    for kind in kinds:
        if kind not in ARCHETYPE_KINDS:
            raise SimulationError(f"unknown archetype {kind!r} in mix")
    quotas = {k: mix[k] / total * n_workers for k in kinds}
    counts = {k: int(math.floor(quotas[k])) for k in kinds}
    leftover = n_workers - sum(counts.values())
    by_remainder = sorted(kinds, key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in by_remainder[:leftover]:
        counts[k] += 1
    assigned = [k for k in kinds for _ in range(counts[k])]
    rng.shuffle(assigned)
    return assigned


def _child_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def build_dataset(
    n_images: int,
    n_workers: int,
    archetype_mix: dict[str, float],
    seed: int = 0,
    size: int = 96,
) -> SimulatedDataset:
    """Simulate every worker annotating every image exactly once.

    Each synthetic worker keeps one archetype across all images; labels are
    the true Dice scores of the rasterized polygons against the scene
    references.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    kinds = _assign_archetypes(archetype_mix, n_workers, rng) if n_workers else []
    worker_ids = [f"w{seed}_{j:03d}" for j in range(n_workers)]
    scenes: dict[str, SyntheticScene] = {}
    rows: list[AnnotationRecord] = []
    for i in range(n_images):
        image_id = f"img{seed}_{i:03d}"
        shape = SCENE_SHAPES[i % len(SCENE_SHAPES)]
        scene = generate_scene(shape, size, seed=_child_seed(seed, 1, i))
        scenes[image_id] = scene
        for j, worker_id in enumerate(worker_ids):
            arch = archetype(kinds[j], seed=_child_seed(seed, 2, i, j))
            stream, poly = simulate_annotation(scene, arch, worker_id, image_id)
            label = dice(rasterize(poly, size, size), scene.reference)
            rows.append(
                AnnotationRecord(
                    image_id=image_id,
                    worker_id=worker_id,
                    archetype=kinds[j],
                    stream=stream,
                    polygon=poly,
                    true_dsc=label,
                )
            )
    return SimulatedDataset(scenes=scenes, rows=tuple(rows), seed=seed, size=size)
