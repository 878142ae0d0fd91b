/**
 * Emit recorded fixture sessions for the cross-component contract tests:
 * the analysis pipeline must parse, validate and classify everything this
 * tool records. Written to fixtures/ (committed) as log + polygon pairs.
 *
 * Run via `npm run fixtures`.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { AnnotationSession, SavedAnnotation } from "./session.js";

const OUT = join(dirname(fileURLToPath(import.meta.url)), "..", "fixtures");

/** Deterministic millisecond clock advancing 10-17 ms per reading. */
function makeClock(): () => number {
  let t = 0;
  let step = 0;
  return () => {
    t += 10 + ((step++ * 7) % 8);
    return t;
  };
}

function session(workerId: string, imageId: string): AnnotationSession {
  return new AnnotationSession({
    workerId,
    imageId,
    imageWidth: 640,
    imageHeight: 480,
    canvasWidth: 640,
    canvasHeight: 480,
    clock: makeClock(),
    hitRadius: 6,
  });
}

function write(name: string, saved: SavedAnnotation): void {
  writeFileSync(join(OUT, `${name}.clicks.jsonl`), saved.log);
  writeFileSync(join(OUT, `${name}.poly.txt`), saved.polygon);
  console.log(`wrote fixtures/${name}.{clicks.jsonl,poly.txt}`);
}

/** Four-click square plus save: the classic point-mode session. */
function clickSquare(): void {
  const s = session("fixture-click", "img-square");
  for (const [x, y] of [
    [100, 100],
    [300, 100],
    [300, 300],
    [100, 300],
  ]) {
    s.pointerMove({ x: x - 11, y: y + 7 }); // travel toward the corner
    s.pointerDown({ x, y });
    s.pointerUp({ x, y });
  }
  write("click_square", s.save());
}

/** Freehand trace in two chained strokes, then a vertex drag correction. */
function dragCorrection(): void {
  const s = session("fixture-drag", "img-blob");
  const cx = 320;
  const cy = 240;
  const r = 120;
  const pts: { x: number; y: number }[] = [];
  for (let k = 0; k < 40; k++) {
    const a = (2 * Math.PI * k) / 40;
    pts.push({ x: cx + r * Math.cos(a), y: cy + r * Math.sin(a) });
  }
  // first stroke: half the circle
  s.pointerDown(pts[0]);
  for (const p of pts.slice(1, 20)) s.pointerMove(p);
  s.pointerUp(pts[19]);
  // chained second stroke starting on the newest vertex
  s.pointerDown(pts[19]);
  for (const p of pts.slice(20)) s.pointerMove(p);
  s.pointerUp(pts[39]);
  // grab an earlier vertex (press lands within the hit radius and snaps)
  const victim = s.vertices()[5];
  s.pointerDown({ x: victim.x + 2, y: victim.y - 1 });
  s.pointerMove({ x: victim.x + 6, y: victim.y + 5 });
  s.pointerMove({ x: victim.x + 9, y: victim.y + 8 });
  s.pointerUp({ x: victim.x + 9, y: victim.y + 8 });
  write("drag_correction", s.save());
}

/** Zoomed session exercising wheel, zoom button, deletions and redraw. */
function zoomAndEdit(): void {
  const s = session("fixture-zoom", "img-zoomed");
  // a throwaway triangle, deleted wholesale
  for (const [x, y] of [
    [50, 50],
    [90, 50],
    [70, 90],
  ]) {
    s.pointerDown({ x, y });
    s.pointerUp({ x, y });
  }
  s.deleteContour();
  // zoom in around the working area, then draw
  s.wheelZoom({ x: 320, y: 240 }, -480);
  s.wheelZoom({ x: 320, y: 240 }, -480);
  s.zoomButton(1.25);
  for (const [x, y] of [
    [200, 160],
    [420, 170],
    [430, 330],
    [310, 380],
    [190, 320],
  ]) {
    s.pointerMove({ x: x - 5, y: y - 3 });
    s.pointerDown({ x, y });
    s.pointerUp({ x, y });
  }
  // drop one vertex with a double click
  const target = s.verticesOnCanvas()[3];
  s.doubleClick({ x: target.x + 1, y: target.y + 1 });
  write("zoom_and_edit", s.save());
}

mkdirSync(OUT, { recursive: true });
clickSquare();
dragCorrection();
zoomAndEdit();
