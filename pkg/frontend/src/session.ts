/**
 * Annotation session: one contour being drawn over one image, with every
 * mouse action recorded into an append-only, time-ordered event buffer.
 *
 * Contour semantics:
 *  - a click on empty canvas adds a vertex; press-and-drag appends a
 *    vertex per recorded move (freehand drawing);
 *  - pressing on the most recent vertex continues drawing from it;
 *  - pressing on any other vertex grabs it: dragging moves that vertex
 *    (a correction); the press is snapped onto the vertex so the recorded
 *    position matches the event that created it;
 *  - double-clicking a vertex deletes it; the delete-contour button
 *    clears everything;
 *  - save is blocked while the contour has fewer than 3 vertices.
 *
 * Vertices are stored in image coordinates; hit-testing happens in canvas
 * space so it tracks the current zoom.
 */

import { Viewport, Point } from "./viewport.js";
import {
  EventKind,
  EventTarget,
  WireEvent,
  WireHeader,
  FORMAT_VERSION,
  encodeLog,
  encodePolygon,
} from "./wire.js";

export interface SessionConfig {
  workerId: string;
  imageId: string;
  imageWidth: number;
  imageHeight: number;
  canvasWidth: number;
  canvasHeight: number;
  /** monotone clock in milliseconds; defaults to performance.now */
  clock?: () => number;
  /** vertex grab radius in canvas pixels */
  hitRadius?: number;
}

export interface SavedAnnotation {
  log: string;
  polygon: string;
}

type DragMode = "none" | "draw" | "correct";

export class AnnotationSession {
  readonly viewport = new Viewport();
  private readonly events: WireEvent[] = [];
  private readonly contour: Point[] = []; // image coordinates
  private readonly clock: () => number;
  private readonly hitRadius: number;
  private readonly t0: number;
  private lastT = 0;
  private drag: DragMode = "none";
  private grabbed = -1; // contour index while correcting
  private lastCursor: Point = { x: 0, y: 0 };

  constructor(readonly config: SessionConfig) {
    this.clock = config.clock ?? (() => performance.now());
    this.hitRadius = config.hitRadius ?? 6;
    this.t0 = this.clock();
  }

  // ----- recording ---------------------------------------------------

  private record(kind: EventKind, target: EventTarget, canvas: Point): void {
    const image = this.viewport.toImage(canvas);
    const t = Math.max(this.lastT, Math.round(this.clock() - this.t0));
    this.lastT = t;
    this.events.push({
      t_ms: t,
      cx: canvas.x,
      cy: canvas.y,
      ix: image.x,
      iy: image.y,
      kind,
      target,
    });
  }

  eventCount(): number {
    return this.events.length;
  }

  recordedEvents(): readonly WireEvent[] {
    return this.events;
  }

  vertices(): readonly Point[] {
    return this.contour;
  }

  verticesOnCanvas(): Point[] {
    return this.contour.map((p) => this.viewport.toCanvas(p));
  }

  // ----- interactions ------------------------------------------------

  private hitVertex(canvas: Point): number {
    const r2 = this.hitRadius * this.hitRadius;
    let best = -1;
    let bestD = r2;
    this.contour.forEach((p, i) => {
      const c = this.viewport.toCanvas(p);
      const d = (c.x - canvas.x) ** 2 + (c.y - canvas.y) ** 2;
      if (d <= bestD) {
        best = i;
        bestD = d;
      }
    });
    return best;
  }

  pointerDown(canvas: Point): void {
    this.lastCursor = canvas;
    const hit = this.hitVertex(canvas);
    if (hit >= 0) {
      // snap the press onto the vertex so the recorded position coincides
      // with the event that originally created it; grabbing the newest
      // vertex continues the contour, any other vertex is corrected
      const snapped = this.viewport.toCanvas(this.contour[hit]);
      if (hit === this.contour.length - 1) {
        this.drag = "draw";
      } else {
        this.drag = "correct";
        this.grabbed = hit;
      }
      this.record("mouse-down", "canvas", snapped);
      return;
    }
    this.record("mouse-down", "canvas", canvas);
    this.drag = "draw";
    this.contour.push(this.viewport.toImage(canvas));
  }

  pointerMove(canvas: Point): void {
    this.lastCursor = canvas;
    this.record("mouse-move", "canvas", canvas);
    if (this.drag === "draw") {
      this.contour.push(this.viewport.toImage(canvas));
    } else if (this.drag === "correct") {
      this.contour[this.grabbed] = this.viewport.toImage(canvas);
    }
  }

  pointerUp(canvas: Point): void {
    this.lastCursor = canvas;
    this.record("mouse-up", "canvas", canvas);
    this.drag = "none";
    this.grabbed = -1;
  }

  doubleClick(canvas: Point): void {
    this.lastCursor = canvas;
    this.record("double-click", "canvas", canvas);
    const hit = this.hitVertex(canvas);
    if (hit >= 0) {
      this.contour.splice(hit, 1);
    }
  }

  wheelZoom(canvas: Point, deltaY: number): void {
    this.lastCursor = canvas;
    this.record("wheel", "canvas", canvas);
    this.viewport.zoomBy(Math.exp(-deltaY / 480), canvas);
  }

  zoomButton(factor: number): void {
    this.record("mouse-down", "zoom-button", this.lastCursor);
    this.record("mouse-up", "zoom-button", this.lastCursor);
    const centre = {
      x: this.config.canvasWidth / 2,
      y: this.config.canvasHeight / 2,
    };
    this.viewport.zoomBy(factor, centre);
  }

  deleteContour(): void {
    this.record("mouse-down", "delete-contour-button", this.lastCursor);
    this.record("mouse-up", "delete-contour-button", this.lastCursor);
    this.contour.length = 0;
  }

  // ----- output ------------------------------------------------------

  canSave(): boolean {
    return this.contour.length >= 3;
  }

  /** Returns the log + polygon files, or throws when there is no contour. */
  save(): SavedAnnotation {
    if (!this.canSave()) {
      throw new Error("draw a contour first: saving needs at least 3 points");
    }
    this.record("mouse-down", "save-button", this.lastCursor);
    this.record("mouse-up", "save-button", this.lastCursor);
    const header: WireHeader = {
      format: FORMAT_VERSION,
      worker_id: this.config.workerId,
      image_id: this.config.imageId,
      canvas_w: this.config.canvasWidth,
      canvas_h: this.config.canvasHeight,
      image_w: this.config.imageWidth,
      image_h: this.config.imageHeight,
    };
    return {
      log: encodeLog(header, this.events),
      polygon: encodePolygon(this.contour),
    };
  }
}
