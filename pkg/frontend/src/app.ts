/**
 * Browser glue: wires DOM events on the annotation canvas to an
 * AnnotationSession and renders the image + contour. Configuration comes
 * from URL parameters: ?image=<url>&worker_id=<id>&image_id=<id>.
 */

import { AnnotationSession } from "./session.js";
import { Point } from "./viewport.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function download(name: string, text: string): void {
  const blob = new Blob([text], { type: "text/plain" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const workerId = params.get("worker_id") ?? "anonymous";
  const imageId = params.get("image_id") ?? "unknown-image";
  const imageUrl = params.get("image");

  const canvas = byId<HTMLCanvasElement>("annotator");
  const ctx = canvas.getContext("2d")!;
  const status = byId<HTMLSpanElement>("status");

  const image = new Image();
  let session: AnnotationSession | null = null;

  function render(): void {
    if (!session) return;
    const vp = session.viewport;
    ctx.save();
    ctx.fillStyle = "#202020";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.translate(vp.panX, vp.panY);
    ctx.scale(vp.zoom, vp.zoom);
    ctx.imageSmoothingEnabled = vp.zoom < 4;
    if (image.complete && image.naturalWidth) ctx.drawImage(image, 0, 0);
    ctx.restore();

    const pts = session.verticesOnCanvas();
    if (pts.length) {
      ctx.strokeStyle = "#ff5050";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(pts[0].x, pts[0].y);
      for (const p of pts.slice(1)) ctx.lineTo(p.x, p.y);
      ctx.closePath();
      ctx.stroke();
      ctx.fillStyle = "#ffd040";
      for (const p of pts) {
        ctx.beginPath();
        ctx.arc(p.x, p.y, 2.5, 0, Math.PI * 2);
        ctx.fill();
      }
    }
    status.textContent =
      `${session.vertices().length} points | zoom ${vp.zoom.toFixed(2)} | ` +
      `${session.eventCount()} events`;
  }

  function start(): void {
    session = new AnnotationSession({
      workerId,
      imageId,
      imageWidth: image.naturalWidth || canvas.width,
      imageHeight: image.naturalHeight || canvas.height,
      canvasWidth: canvas.width,
      canvasHeight: canvas.height,
    });
    render();
  }

  const cursor = (ev: MouseEvent): Point => {
    const rect = canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  };

  let pending: Point | null = null;
  canvas.addEventListener("mousedown", (ev) => {
    session?.pointerDown(cursor(ev));
    render();
  });
  canvas.addEventListener("mousemove", (ev) => {
    // throttle continuous recording to the display refresh cadence
    if (pending === null) {
      requestAnimationFrame(() => {
        if (pending) session?.pointerMove(pending);
        pending = null;
        render();
      });
    }
    pending = cursor(ev);
  });
  canvas.addEventListener("mouseup", (ev) => {
    session?.pointerUp(cursor(ev));
    render();
  });
  canvas.addEventListener("dblclick", (ev) => {
    session?.doubleClick(cursor(ev));
    render();
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    session?.wheelZoom(cursor(ev), ev.deltaY);
    render();
  });

  byId<HTMLButtonElement>("zoom-in").addEventListener("click", () => {
    session?.zoomButton(1.25);
    render();
  });
  byId<HTMLButtonElement>("zoom-out").addEventListener("click", () => {
    session?.zoomButton(0.8);
    render();
  });
  byId<HTMLButtonElement>("delete-contour").addEventListener("click", () => {
    session?.deleteContour();
    render();
  });
  byId<HTMLButtonElement>("save").addEventListener("click", () => {
    if (!session) return;
    if (!session.canSave()) {
      status.textContent = "cannot save: draw a contour first (3+ points)";
      return;
    }
    const saved = session.save();
    download(`${workerId}.clicks.jsonl`, saved.log);
    download(`${workerId}.poly.txt`, saved.polygon);
    render();
  });

  image.addEventListener("load", start);
  image.addEventListener("error", () => {
    status.textContent = `could not load image ${imageUrl}; annotating a blank canvas`;
    start();
  });
  if (imageUrl) {
    image.src = imageUrl;
  } else {
    start();
  }
}

boot();
