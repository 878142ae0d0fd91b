"""Clickstream event model: parsing, stroke segmentation, classification.

Wire format (one annotation session per file, JSON lines):

  line 1   header object:
           {"format": "clickstream/v1", "worker_id": str, "image_id": str,
            "canvas_w": int, "canvas_h": int, "image_w": int, "image_h": int}
  line 2+  one event object per line, fields in this order:
           {"t_ms": int, "cx": num, "cy": num, "ix": num, "iy": num,
            "kind": str, "target": str}

``kind`` and ``target`` are closed enumerations (see EVENT_KINDS and
EVENT_TARGETS); anything else is a parse error. Events must be ordered by
non-decreasing ``t_ms``; ties keep their input order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .kdtree import KDTree2

FORMAT_VERSION = "clickstream/v1"

MOUSE_DOWN = "mouse-down"
MOUSE_UP = "mouse-up"
MOUSE_MOVE = "mouse-move"
WHEEL = "wheel"
DOUBLE_CLICK = "double-click"
EVENT_KINDS = frozenset({MOUSE_DOWN, MOUSE_UP, MOUSE_MOVE, WHEEL, DOUBLE_CLICK})

CANVAS = "canvas"
DELETE_BUTTON = "delete-contour-button"
ZOOM_BUTTON = "zoom-button"
SAVE_BUTTON = "save-button"
EVENT_TARGETS = frozenset({CANVAS, DELETE_BUTTON, ZOOM_BUTTON, SAVE_BUTTON})

DRAW = "draw"
CORRECTION = "correction"
UNCLASSIFIED = "unclassified"


class ClickstreamError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    t: float  # milliseconds
    canvas_pos: tuple[float, float]
    image_pos: tuple[float, float]
    kind: str
    target: str


@dataclass(frozen=True)
class Clickstream:
    events: tuple[Event, ...]
    worker_id: str
    image_id: str
    canvas_size: tuple[int, int] = (0, 0)
    image_size: tuple[int, int] = (0, 0)

    def __len__(self) -> int:
        return len(self.events)

    def elapsed_ms(self) -> float:
        if not self.events:
            return 0.0
        return self.events[-1].t - self.events[0].t


@dataclass(frozen=True)
class Stroke:
    """Mouse-move run between a canvas mouse-down and the next mouse-up."""

    events: tuple[Event, ...]  # the contained mouse-move events
    down: Event
    up: Event
    move_indices: tuple[int, ...]  # positions of ``events`` in the stream
    classification: str = UNCLASSIFIED


@dataclass(frozen=True)
class StrokeDiagnostics:
    unmatched_downs: int = 0
    unmatched_ups: int = 0


def _parse_number(obj, key, lineno, integer=False):
    if key not in obj:
        raise ClickstreamError(f"line {lineno}: missing field {key!r}")
    value = obj[key]
    if integer:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ClickstreamError(f"line {lineno}: field {key!r} must be an integer")
        return value
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ClickstreamError(f"line {lineno}: field {key!r} must be a number")
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ClickstreamError(f"line {lineno}: field {key!r} must be finite")
    return value


def parse_clickstream(raw_log: bytes | str) -> Clickstream:
    """Parse one wire-format log; see the module docstring for the format."""
    if isinstance(raw_log, bytes):
        raw_log = raw_log.decode("utf-8")
    lines = [ln for ln in raw_log.split("\n") if ln.strip()]
    if not lines:
        raise ClickstreamError("empty stream")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ClickstreamError(f"line 1: malformed header: {exc.msg}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_VERSION:
        raise ClickstreamError(f"line 1: expected header with format={FORMAT_VERSION!r}")
    for key in ("worker_id", "image_id", "canvas_w", "canvas_h", "image_w", "image_h"):
        if key not in header:
            raise ClickstreamError(f"line 1: header missing field {key!r}")

    events = []
    prev_t = None
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ClickstreamError(f"line {lineno}: malformed event: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ClickstreamError(f"line {lineno}: event must be an object")
        t = _parse_number(obj, "t_ms", lineno, integer=True)
        if t < 0:
            raise ClickstreamError(f"line {lineno}: t_ms must be non-negative")
        if prev_t is not None and t < prev_t:
            raise ClickstreamError(
                f"line {lineno}: timestamps not sorted ({t} after {prev_t})"
            )
        prev_t = t
        cx = _parse_number(obj, "cx", lineno)
        cy = _parse_number(obj, "cy", lineno)
        ix = _parse_number(obj, "ix", lineno)
        iy = _parse_number(obj, "iy", lineno)
        kind = obj.get("kind")
        if kind not in EVENT_KINDS:
            raise ClickstreamError(f"line {lineno}: unknown event kind {kind!r}")
        target = obj.get("target")
        if target not in EVENT_TARGETS:
            raise ClickstreamError(f"line {lineno}: unknown event target {target!r}")
        events.append(Event(float(t), (cx, cy), (ix, iy), kind, target))
    if not events:
        raise ClickstreamError("empty stream")
    return Clickstream(
        events=tuple(events),
        worker_id=str(header["worker_id"]),
        image_id=str(header["image_id"]),
        canvas_size=(int(header["canvas_w"]), int(header["canvas_h"])),
        image_size=(int(header["image_w"]), int(header["image_h"])),
    )


def serialize_clickstream(stream: Clickstream) -> str:
    """Canonical wire form; parse(serialize(parse(x))) round-trips exactly."""
    header = {
        "format": FORMAT_VERSION,
        "worker_id": stream.worker_id,
        "image_id": stream.image_id,
        "canvas_w": stream.canvas_size[0],
        "canvas_h": stream.canvas_size[1],
        "image_w": stream.image_size[0],
        "image_h": stream.image_size[1],
    }
    out = [json.dumps(header, separators=(", ", ": "))]
    for e in stream.events:
        rec = {
            "t_ms": int(e.t),
            "cx": e.canvas_pos[0],
            "cy": e.canvas_pos[1],
            "ix": e.image_pos[0],
            "iy": e.image_pos[1],
            "kind": e.kind,
            "target": e.target,
        }
        out.append(json.dumps(rec, separators=(", ", ": ")))
    return "\n".join(out) + "\n"


def load_clickstream(path) -> Clickstream:
    with open(path, "rb") as fh:
        return parse_clickstream(fh.read())


def save_clickstream(path, stream: Clickstream) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_clickstream(stream))


def _scan_strokes(stream: Clickstream):
    strokes: list[Stroke] = []
    unmatched_downs = 0
    unmatched_ups = 0
    open_down: Event | None = None
    moves: list[Event] = []
    move_idx: list[int] = []
    for i, e in enumerate(stream.events):
        if e.kind == MOUSE_DOWN and e.target == CANVAS:
            if open_down is not None:
                unmatched_downs += 1  # down with no up before the next down
            open_down = e
            moves = []
            move_idx = []
        elif e.kind == MOUSE_MOVE and open_down is not None:
            moves.append(e)
            move_idx.append(i)
        elif e.kind == MOUSE_UP:
            if open_down is None:
                unmatched_ups += 1
            else:
                strokes.append(
                    Stroke(tuple(moves), open_down, e, tuple(move_idx))
                )
                open_down = None
    if open_down is not None:
        unmatched_downs += 1
    return strokes, StrokeDiagnostics(unmatched_downs, unmatched_ups)


def segment_strokes(stream: Clickstream) -> list[Stroke]:
    """Pair each canvas mouse-down with the next mouse-up.

    Moves in between are attached to the stroke; downs that never see an up
    (and ups with no open down) produce no stroke and are only counted by
    :func:`stroke_diagnostics`.
    """
    return _scan_strokes(stream)[0]


def stroke_diagnostics(stream: Clickstream) -> StrokeDiagnostics:
    return _scan_strokes(stream)[1]


def _same_position(a: tuple[float, float], b: tuple[float, float], tol: float) -> bool:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy <= tol * tol


def classify_strokes(
    strokes: list[Stroke], stream: Clickstream, tolerance: float = 0.0
) -> tuple[list[Stroke], list[Stroke]]:
    """Split strokes into draw operations and contour corrections.

    Three cases, evaluated in order for each stroke:
      1. its down position equals the up position of the most recent draw
         stroke -> draw (the contour is being continued);
      2. any strictly earlier event in the stream happened at the same
         canvas position -> correction (an existing contour point is
         being grabbed);
      3. otherwise -> draw (a new contour is started).

    "Same position" is exact coordinate equality by default; ``tolerance``
    is a radius in canvas pixels for interfaces that emit sub-pixel floats.
    Earlier events are indexed in a 2-d tree; every query is equivalent to
    a linear scan over events with ``t < stroke.down.t``.
    """
    draws: list[Stroke] = []
    corrections: list[Stroke] = []
    tree = KDTree2()
    cursor = 0
    events = stream.events
    last_draw_up: Event | None = None
    for s in strokes:
        while cursor < len(events) and events[cursor].t < s.down.t:
            e = events[cursor]
            tree.insert(e.canvas_pos[0], e.canvas_pos[1])
            cursor += 1
        if last_draw_up is not None and _same_position(
            s.down.canvas_pos, last_draw_up.canvas_pos, tolerance
        ):
            cls = DRAW
        elif tree.any_within(s.down.canvas_pos[0], s.down.canvas_pos[1], tolerance):
            cls = CORRECTION
        else:
            cls = DRAW
        stroke = replace(s, classification=cls)
        if cls == DRAW:
            draws.append(stroke)
            last_draw_up = stroke.up
        else:
            corrections.append(stroke)
    return draws, corrections


def count_events(stream: Clickstream, kind: str | None = None, target: str | None = None) -> int:
    """Number of events matching the given kind/target filters (None = any)."""
    return sum(
        1
        for e in stream.events
        if (kind is None or e.kind == kind) and (target is None or e.target == target)
    )


def zoom_count(stream: Clickstream) -> int:
    """Wheel events plus clicks on the zoom button."""
    return count_events(stream, kind=WHEEL) + count_events(
        stream, kind=MOUSE_DOWN, target=ZOOM_BUTTON
    )


def canvas_clicks(stream: Clickstream) -> int:
    return count_events(stream, kind=MOUSE_DOWN, target=CANVAS)
