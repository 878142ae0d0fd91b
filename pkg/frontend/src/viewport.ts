/**
 * Affine zoom/pan mapping between canvas and image coordinates:
 * canvas = image * zoom + pan. Zooming keeps a chosen canvas point fixed.
 */

export interface Point {
  x: number;
  y: number;
}

export class Viewport {
  zoom = 1;
  panX = 0;
  panY = 0;

  constructor(
    readonly minZoom = 0.25,
    readonly maxZoom = 32,
  ) {}

  toImage(c: Point): Point {
    return { x: (c.x - this.panX) / this.zoom, y: (c.y - this.panY) / this.zoom };
  }

  toCanvas(p: Point): Point {
    return { x: p.x * this.zoom + this.panX, y: p.y * this.zoom + this.panY };
  }

  /** Multiply the zoom by `factor`, keeping canvas point `at` fixed. */
  zoomBy(factor: number, at: Point): void {
    const next = Math.min(this.maxZoom, Math.max(this.minZoom, this.zoom * factor));
    const ratio = next / this.zoom;
    this.panX = at.x - (at.x - this.panX) * ratio;
    this.panY = at.y - (at.y - this.panY) * ratio;
    this.zoom = next;
  }

  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }
}
