/** Single-page annotation console: sketch, validate, run, inspect. */
import { ApiClient, ApiError } from "./api";
import { parseHistoryCsv, sparklinePath } from "./history";
import { createOverlay, overlayDimensionsMatch, pngDimensions, withOpacity, type OverlayState } from "./overlay";
import { AnnotationStore } from "./store";
import type { AnnotationDocument, RunRecord, ToolMode } from "./types";

const store = new AnnotationStore();
const api = new ApiClient({ baseUrl: localStorage.getItem("yoho-api") ?? "http://127.0.0.1:8000" });

let imageBitmap: ImageBitmap | null = null;
let imageBlob: Blob | null = null;
let maskBitmap: ImageBitmap | null = null;
let overlay: OverlayState | null = null;
let zoom = 1;
let panX = 0;
let panY = 0;
let panning: { startX: number; startY: number } | null = null;
let runHistory: { runId: string; doc: AnnotationDocument; state: string }[] = [];

const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const badges = document.getElementById("badges")!;
const statusEl = document.getElementById("status")!;
const runsEl = document.getElementById("runs")!;
const sparkline = document.getElementById("sparkline") as unknown as SVGSVGElement;

function toImageCoords(ev: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  const x = (ev.clientX - rect.left - panX) / zoom;
  const y = (ev.clientY - rect.top - panY) / zoom;
  return [x, y];
}

function draw(): void {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.setTransform(zoom, 0, 0, zoom, panX, panY);
  if (imageBitmap) ctx.drawImage(imageBitmap, 0, 0);
  if (maskBitmap && overlay?.visible) {
    ctx.globalAlpha = overlay.opacity;
    ctx.drawImage(maskBitmap, 0, 0);
    ctx.globalAlpha = 1;
  }
  ctx.lineWidth = 2 / zoom;
  ctx.strokeStyle = store.reverse ? "#2bb3ff" : "#ffd43b";
  for (const verts of store.rois) {
    ctx.beginPath();
    verts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.closePath();
    ctx.stroke();
  }
  if (store.draft.length > 0) {
    ctx.strokeStyle = "#ff922b";
    ctx.beginPath();
    store.draft.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
    for (const [x, y] of store.draft) {
      ctx.beginPath();
      ctx.arc(x, y, 3 / zoom, 0, Math.PI * 2);
      ctx.stroke();
    }
  }
  ctx.strokeStyle = "#51cf66";
  for (const c of [...store.samples, ...(store.pendingCircle ? [store.pendingCircle] : [])]) {
    ctx.beginPath();
    ctx.arc(c.cx, c.cy, Math.max(c.r, 0.5), 0, Math.PI * 2);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(c.cx, c.cy, 1.5 / zoom, 0, Math.PI * 2);
    ctx.stroke();
  }
  refreshBadges();
}

function refreshBadges(): void {
  badges.innerHTML = "";
  if (!store.hasImage) {
    badges.append(badge("load an image to begin", "warn"));
    return;
  }
  const issues = store.issues();
  for (const e of issues.errors) badges.append(badge(e, "error"));
  for (const w of issues.warnings) badges.append(badge(w, "warn"));
  if (issues.errors.length === 0) badges.append(badge("annotation valid", "ok"));
  (document.getElementById("submit") as HTMLButtonElement).disabled = !store.canExport;
  (document.getElementById("export") as HTMLButtonElement).disabled = !store.canExport;
}

function badge(text: string, kind: "ok" | "warn" | "error"): HTMLElement {
  const el = document.createElement("span");
  el.className = `badge ${kind}`;
  el.textContent = text;
  return el;
}

function setStatus(text: string, isError = false): void {
  statusEl.textContent = text;
  statusEl.className = isError ? "status error" : "status";
}

async function loadImageFile(file: File): Promise<void> {
  imageBlob = file;
  imageBitmap = await createImageBitmap(file);
  maskBitmap = null;
  overlay = null;
  canvas.width = Math.max(imageBitmap.width, 512);
  canvas.height = Math.max(imageBitmap.height, 512);
  zoom = 1;
  panX = panY = 0;
  store.apply({ type: "loadImage", name: file.name, width: imageBitmap.width, height: imageBitmap.height });
  setStatus(`loaded ${file.name} (${imageBitmap.width}x${imageBitmap.height})`);
  draw();
}

function renderRuns(): void {
  runsEl.innerHTML = "";
  for (const run of [...runHistory].reverse()) {
    const li = document.createElement("li");
    li.textContent = `${run.runId.slice(0, 8)} - ${run.state} `;
    const dup = document.createElement("button");
    dup.textContent = "duplicate & edit";
    dup.onclick = () => {
      store.importDocument(run.doc);
      setStatus(`annotation of ${run.runId.slice(0, 8)} loaded for editing`);
      draw();
    };
    li.append(dup);
    runsEl.append(li);
  }
}

async function submitRun(): Promise<void> {
  if (!imageBlob || !store.canExport) return;
  const doc = store.export();
  const profile = (document.getElementById("profile") as HTMLSelectElement).value;
  try {
    const { run_id } = await api.submitRun(imageBlob, store.imageName, doc, profile);
    const entry = { runId: run_id, doc, state: "queued" };
    runHistory.push(entry);
    renderRuns();
    setStatus(`run ${run_id} submitted`);
    const rec = await api.pollRun(run_id, (r: RunRecord) => {
      entry.state = r.state === "training" ? `training ${r.step}/${r.total_steps}` : r.state;
      setStatus(`run ${run_id.slice(0, 8)}: ${entry.state}`);
      renderRuns();
    });
    if (rec.state === "failed") {
      setStatus(`run failed: ${rec.error}`, true);
      return;
    }
    await showResult(run_id);
  } catch (err) {
    // keep the annotation intact; surface the body verbatim
    const msg = err instanceof ApiError ? err.body : String(err);
    setStatus(`submission error: ${msg}`, true);
  }
}

async function showResult(runId: string): Promise<void> {
  const maskBlob = await api.fetchMask(runId);
  const bytes = new Uint8Array(await maskBlob.arrayBuffer());
  const dims = pngDimensions(bytes);
  overlay = createOverlay(runId, dims, { width: store.width, height: store.height });
  if (!overlayDimensionsMatch(overlay)) {
    setStatus(`mask size ${dims.width}x${dims.height} does not match the image`, true);
  }
  maskBitmap = await createImageBitmap(maskBlob);
  const csv = await api.fetchHistoryCsv(runId);
  const points = parseHistoryCsv(csv);
  sparkline.innerHTML = `<polyline fill="none" stroke="#ff6b6b" stroke-width="1" points="${sparklinePath(points, 220, 48)}"/>`;
  setStatus(`run ${runId.slice(0, 8)} done - overlay ready`);
  draw();
}

function bindToolbar(): void {
  for (const tool of ["polygon", "circle", "pan", "erase"] as ToolMode[]) {
    const btn = document.getElementById(`tool-${tool}`) as HTMLButtonElement;
    btn.onclick = () => {
      store.apply({ type: "selectTool", tool });
      document.querySelectorAll(".tool").forEach((b) => b.classList.remove("active"));
      btn.classList.add("active");
      draw();
    };
  }
  (document.getElementById("reverse") as HTMLInputElement).onchange = () => {
    store.apply({ type: "toggleReverse" });
    draw();
  };
  (document.getElementById("undo") as HTMLButtonElement).onclick = () => {
    store.apply({ type: "undo" });
    draw();
  };
  (document.getElementById("opacity") as HTMLInputElement).oninput = (ev) => {
    if (overlay) {
      overlay = withOpacity(overlay, Number((ev.target as HTMLInputElement).value) / 100);
      draw();
    }
  };
  (document.getElementById("export") as HTMLButtonElement).onclick = () => {
    const blob = new Blob([JSON.stringify(store.export(), null, 1)], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "annotation.json";
    a.click();
  };
  (document.getElementById("submit") as HTMLButtonElement).onclick = () => void submitRun();
  (document.getElementById("file") as HTMLInputElement).onchange = (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) void loadImageFile(file);
  };
}

function bindCanvas(): void {
  canvas.addEventListener("mousedown", (ev) => {
    const [x, y] = toImageCoords(ev);
    if (store.tool === "pan") {
      panning = { startX: ev.clientX - panX, startY: ev.clientY - panY };
    } else if (store.tool === "circle") {
      store.apply({ type: "dragStart", x, y });
    }
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (panning) {
      panX = ev.clientX - panning.startX;
      panY = ev.clientY - panning.startY;
      draw();
      return;
    }
    const [x, y] = toImageCoords(ev);
    if (store.pendingCircle) {
      store.apply({ type: "dragMove", x, y });
      draw();
    }
  });
  canvas.addEventListener("mouseup", (ev) => {
    if (panning) {
      panning = null;
      return;
    }
    const [x, y] = toImageCoords(ev);
    if (store.pendingCircle) {
      store.apply({ type: "dragEnd", x, y });
      draw();
    }
  });
  canvas.addEventListener("click", (ev) => {
    if (store.tool === "pan" || store.tool === "circle") return;
    const [x, y] = toImageCoords(ev);
    store.apply({ type: "click", x, y });
    draw();
  });
  canvas.addEventListener("dblclick", () => {
    store.apply({ type: "dblclick" });
    draw();
  });
  canvas.addEventListener("wheel", (ev) => {
    if (store.tool !== "pan") return;
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.1 : 1 / 1.1;
    zoom = Math.min(8, Math.max(0.25, zoom * factor));
    draw();
  });
}

bindToolbar();
bindCanvas();
draw();
