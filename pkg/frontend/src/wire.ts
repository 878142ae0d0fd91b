/**
 * Clickstream wire format (clickstream/v1), shared with the analysis
 * pipeline: a JSON-lines file whose first line is a header object and
 * every further line one mouse event. Field names are normative.
 */

export const FORMAT_VERSION = "clickstream/v1";

export type EventKind =
  | "mouse-down"
  | "mouse-up"
  | "mouse-move"
  | "wheel"
  | "double-click";

export type EventTarget =
  | "canvas"
  | "delete-contour-button"
  | "zoom-button"
  | "save-button";

export interface WireEvent {
  t_ms: number; // integer milliseconds, non-decreasing
  cx: number;
  cy: number;
  ix: number;
  iy: number;
  kind: EventKind;
  target: EventTarget;
}

export interface WireHeader {
  format: typeof FORMAT_VERSION;
  worker_id: string;
  image_id: string;
  canvas_w: number;
  canvas_h: number;
  image_w: number;
  image_h: number;
}

export function encodeLog(header: WireHeader, events: readonly WireEvent[]): string {
  const lines = [JSON.stringify(header)];
  for (const e of events) {
    // key order fixed by construction
    lines.push(
      JSON.stringify({
        t_ms: e.t_ms,
        cx: e.cx,
        cy: e.cy,
        ix: e.ix,
        iy: e.iy,
        kind: e.kind,
        target: e.target,
      }),
    );
  }
  return lines.join("\n") + "\n";
}

/** Polygon file: one `x y` vertex per line, image coordinates. */
export function encodePolygon(vertices: readonly { x: number; y: number }[]): string {
  return vertices.map((v) => `${v.x} ${v.y}`).join("\n") + "\n";
}
