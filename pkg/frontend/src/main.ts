/**
 * Application wiring: upload form, canvas interaction, trace / vessel /
 * measure launches, result panels, and artifact export.
 *
 * Every displayed number comes from a stored server response; exports
 * write the exact response bytes.
 */

import {
  ApiClient,
  ApiFailure,
  type Alignment,
  type Target,
  type TraceConfig,
  type TraceRequest,
  type VesselMethod,
} from "./api.js";
import { paint, renderPlan, type PaintAssets, type ViewMode } from "./draw.js";
import { AnnotationState, WorkflowState, type Pt } from "./state.js";
import {
  createViewport,
  fitViewport,
  inBounds,
  panBy,
  screenToImage,
  zoomAt,
  type Viewport,
} from "./view.js";

type Tool =
  | "select"
  | "pan"
  | "endpoint-upper"
  | "guide-upper"
  | "endpoint-lower"
  | "guide-lower"
  | "fovea";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view-canvas");
const ctx = canvas.getContext("2d")!;
const stage = el<HTMLElement>("stage");

const api = new ApiClient();
const workflow = new WorkflowState();
let annotations: AnnotationState | null = null;
let view: Viewport = createViewport();
let tool: Tool = "select";
let mode: ViewMode = "raw";
let cursor: Pt | null = null;
let retryAction: (() => void) | null = null;
const assets: PaintAssets = { raw: null, edgeUpper: null, edgeLower: null, mask: null };
const edgeLoading: Partial<Record<Target, boolean>> = {};

let drag: { kind: "pan"; lastX: number; lastY: number } | { kind: "point" } | null = null;
let redrawQueued = false;

function redraw(): void {
  if (redrawQueued) {
    return;
  }
  redrawQueued = true;
  requestAnimationFrame(() => {
    redrawQueued = false;
    const session = workflow.session;
    if (session === null) {
      ctx.fillStyle = "#14181d";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      return;
    }
    const plan = renderPlan({
      mode,
      traces: {
        upper: workflow.traces.upper?.payload,
        lower: workflow.traces.lower?.payload,
      },
      showBand: el<HTMLInputElement>("show-band").checked,
      maskOpacity: Number(el<HTMLInputElement>("mask-opacity").value),
      hasMask: assets.mask !== null,
      annotations,
      roiPolygon: workflow.report?.payload.roi_polygon ?? null,
      crossing: workflow.crossing,
      cursor,
    });
    paint(ctx, view, plan, assets, session.width, session.height);
  });
}

function resizeCanvas(): void {
  const rect = canvas.getBoundingClientRect();
  const width = Math.max(1, Math.round(rect.width));
  const height = Math.max(1, Math.round(rect.height));
  if (canvas.width !== width || canvas.height !== height) {
    canvas.width = width;
    canvas.height = height;
    redraw();
  }
}

new ResizeObserver(resizeCanvas).observe(stage);

// ---- control state ----

function updateControls(): void {
  const haveSession = workflow.session !== null;
  const bothTraces = workflow.traces.upper !== undefined && workflow.traces.lower !== undefined;
  for (const target of ["upper", "lower"] as Target[]) {
    el<HTMLButtonElement>(`trace-${target}`).disabled =
      !haveSession || !workflow.canLaunchTrace() || annotations?.canTrace(target) !== true;
  }
  el<HTMLButtonElement>("run-vessels").disabled =
    !haveSession || !bothTraces || workflow.pendingVessels;
  el<HTMLButtonElement>("run-measure").disabled =
    !haveSession || !bothTraces || annotations?.fovea == null || workflow.pendingMeasure;

  el<HTMLButtonElement>("export-upper").disabled = workflow.traces.upper === undefined;
  el<HTMLButtonElement>("export-lower").disabled = workflow.traces.lower === undefined;
  el<HTMLButtonElement>("export-vessels").disabled = workflow.vessels === null;
  el<HTMLButtonElement>("export-mask").disabled = workflow.vessels === null;
  el<HTMLButtonElement>("export-report").disabled = workflow.report === null;

  const fovea = annotations?.fovea ?? null;
  el<HTMLElement>("fovea-label").textContent =
    fovea === null ? "fovea: not set" : `fovea: (${fovea.x}, ${fovea.y})`;

  const hashes: string[] = [];
  for (const target of ["upper", "lower"] as Target[]) {
    const record = workflow.traces[target];
    if (record !== undefined) {
      hashes.push(`${target} ${record.hash}`);
    }
  }
  el<HTMLElement>("hash-label").textContent = hashes.join("  ");
  el<HTMLElement>("zoom-label").textContent = `${view.zoom}×`;
}

function showError(operation: string, failure: ApiFailure, retry: () => void): void {
  workflow.recordError({ status: failure.status, bodyText: failure.bodyText, operation });
  retryAction = retry;
  el<HTMLElement>("error-status").textContent = `HTTP ${failure.status} during ${operation}`;
  // the exact body the server sent, unmodified
  el<HTMLElement>("error-body").textContent = failure.bodyText;
  el<HTMLElement>("error-panel").hidden = false;
  redraw();
}

function dismissError(): void {
  workflow.clearError();
  retryAction = null;
  el<HTMLElement>("error-panel").hidden = true;
}

function setStatus(id: string, text: string): void {
  el<HTMLElement>(id).textContent = text;
}

// ---- session ----

function loadImageElement(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const image = new Image();
    image.onload = () => resolve(image);
    image.onerror = () => reject(new Error(`failed to load ${url}`));
    image.src = url;
  });
}

/** Color the white mask pixels and make the background transparent. */
function tintMask(image: HTMLImageElement): HTMLCanvasElement {
  const off = document.createElement("canvas");
  off.width = image.naturalWidth;
  off.height = image.naturalHeight;
  const offCtx = off.getContext("2d")!;
  offCtx.drawImage(image, 0, 0);
  const data = offCtx.getImageData(0, 0, off.width, off.height);
  const px = data.data;
  for (let i = 0; i < px.length; i += 4) {
    if (px[i]! > 127) {
      px[i] = 235;
      px[i + 1] = 77;
      px[i + 2] = 92;
      px[i + 3] = 255;
    } else {
      px[i + 3] = 0;
    }
  }
  offCtx.putImageData(data, 0, 0);
  return off;
}

async function createSession(event: SubmitEvent): Promise<void> {
  event.preventDefault();
  const files = el<HTMLInputElement>("image-file").files;
  if (files === null || files.length === 0) {
    return;
  }
  const axial = Number(el<HTMLInputElement>("axial-scale").value);
  const lateral = Number(el<HTMLInputElement>("lateral-scale").value);
  const eye = el<HTMLSelectElement>("eye").value;
  const previous = workflow.session;
  try {
    const info = await api.createSession(files[0]!, axial, lateral, eye);
    workflow.session = info;
    workflow.traces = {};
    workflow.vessels = null;
    workflow.report = null;
    workflow.crossing = false;
    annotations = new AnnotationState(info.width, info.height);
    assets.raw = await loadImageElement(api.imageUrl(info.session_id));
    assets.edgeUpper = null;
    assets.edgeLower = null;
    assets.mask = null;
    mode = "raw";
    el<HTMLInputElement>("view-modes").querySelectorAll("input").forEach((input) => {
      (input as HTMLInputElement).checked = input.value === "raw";
    });
    view = fitViewport(info.width, info.height, canvas.width, canvas.height);
    el<HTMLElement>("session-label").textContent =
      `session ${info.session_id.slice(0, 8)}  ${info.width}×${info.height} px`;
    setStatus("trace-status", "");
    setStatus("vessel-status", "");
    el<HTMLElement>("report").replaceChildren();
    dismissError();
    if (previous !== null) {
      void api.deleteSession(previous.session_id).catch(() => undefined);
    }
  } catch (error) {
    if (error instanceof ApiFailure) {
      showError("session upload", error, () => void createSession(event));
    } else {
      throw error;
    }
  }
  updateControls();
  redraw();
}

async function ensureEdgeMap(target: Target): Promise<void> {
  const session = workflow.session;
  if (session === null || edgeLoading[target] === true) {
    return;
  }
  const key = target === "upper" ? "edgeUpper" : "edgeLower";
  if (assets[key] !== null) {
    return;
  }
  edgeLoading[target] = true;
  try {
    assets[key] = await loadImageElement(api.edgemapUrl(session.session_id, target));
  } finally {
    edgeLoading[target] = false;
  }
  redraw();
}

// ---- algorithm launches ----

function numberOrUndefined(id: string): number | undefined {
  const raw = el<HTMLInputElement>(id).value.trim();
  return raw === "" ? undefined : Number(raw);
}

function traceConfig(): TraceConfig {
  const config: TraceConfig = {};
  const curves = numberOrUndefined("n-curves");
  if (curves !== undefined) {
    config.n_curves = curves;
  }
  const deltaX = numberOrUndefined("delta-x");
  if (deltaX !== undefined) {
    config.delta_x = deltaX;
  }
  const noise = numberOrUndefined("noise-sigma");
  if (noise !== undefined) {
    config.noise_sigma = noise;
  }
  if (el<HTMLInputElement>("sigma-f-on").checked) {
    config.sigma_f = Number(el<HTMLInputElement>("sigma-f").value);
  }
  if (el<HTMLInputElement>("sigma-l-on").checked) {
    config.sigma_l = Number(el<HTMLInputElement>("sigma-l").value);
  }
  return config;
}

async function runTrace(target: Target): Promise<void> {
  const session = workflow.session;
  if (session === null || annotations === null || !workflow.beginTrace()) {
    return;
  }
  const inputs = annotations.traceInputs(target);
  const request: TraceRequest = {
    target,
    endpoints: inputs.endpoints,
    guides: inputs.guides,
    config: traceConfig(),
  };
  const seed = numberOrUndefined("seed");
  if (seed !== undefined) {
    request.seed = seed;
  }
  updateControls();
  setStatus("trace-status", `tracing ${target}…`);
  try {
    const { payload, text } = await api.trace(session.session_id, request);
    const { changed } = workflow.finishTrace(target, payload, text);
    if (changed) {
      assets.mask = null;
      el<HTMLElement>("report").replaceChildren();
      setStatus("vessel-status", "");
    }
    const hash = workflow.traces[target]!.hash;
    setStatus(
      "trace-status",
      changed
        ? `${target}: ${payload.iterations} iterations, hash ${hash}`
        : `${target}: identical to previous run (hash ${hash})`,
    );
    dismissError();
  } catch (error) {
    if (error instanceof ApiFailure) {
      workflow.abortTrace(null);
      setStatus("trace-status", "");
      showError(`trace ${target}`, error, () => void runTrace(target));
    } else {
      workflow.abortTrace(null);
      setStatus("trace-status", String(error));
    }
  }
  updateControls();
  redraw();
}

async function runVessels(): Promise<void> {
  const session = workflow.session;
  if (session === null || workflow.pendingVessels) {
    return;
  }
  workflow.pendingVessels = true;
  updateControls();
  setStatus("vessel-status", "segmenting…");
  const method = el<HTMLSelectElement>("vessel-method").value as VesselMethod;
  try {
    const result = await api.vessels(session.session_id, { method });
    workflow.vessels = { summary: result.payload, text: result.text };
    const maskImage = await loadImageElement(
      `${api.maskUrl(session.session_id)}?r=${Date.now()}`,
    );
    assets.mask = tintMask(maskImage);
    const cvi = result.payload.cvi_preview;
    setStatus(
      "vessel-status",
      `${result.payload.vessel_pixels} vessel px / ${result.payload.region_pixels} region px` +
        (cvi === null ? "" : `, CVI preview ${cvi.toFixed(4)}`),
    );
    workflow.crossing = false;
    dismissError();
  } catch (error) {
    if (error instanceof ApiFailure) {
      setStatus("vessel-status", "");
      showError("vessels", error, () => void runVessels());
    } else {
      setStatus("vessel-status", String(error));
    }
  }
  workflow.pendingVessels = false;
  updateControls();
  redraw();
}

function reportRows(payload: Record<string, unknown>): [string, string][] {
  const rows: [string, string][] = [
    ["SFCT", `${(payload.sfct_microns as number).toFixed(2)} µm`],
    ["mean thickness", `${(payload.avg_thickness_microns as number).toFixed(2)} µm`],
    ["area", `${(payload.area_mm2 as number).toFixed(4)} mm²`],
  ];
  if (typeof payload.vessel_area_mm2 === "number") {
    rows.push(["vessel area", `${payload.vessel_area_mm2.toFixed(4)} mm²`]);
  }
  if (typeof payload.cvi === "number") {
    rows.push(["CVI", payload.cvi.toFixed(4)]);
  }
  return rows;
}

async function runMeasure(): Promise<void> {
  const session = workflow.session;
  const fovea = annotations?.fovea ?? null;
  if (session === null || fovea === null || workflow.pendingMeasure) {
    return;
  }
  workflow.pendingMeasure = true;
  updateControls();
  try {
    const result = await api.measure(session.session_id, {
      fovea: [fovea.x, fovea.y],
      roi_microns: Number(el<HTMLInputElement>("roi-microns").value),
      alignment: el<HTMLSelectElement>("alignment").value as Alignment,
    });
    workflow.report = { payload: result.payload, text: result.text };
    const list = el<HTMLElement>("report");
    list.replaceChildren();
    for (const [name, value] of reportRows(result.payload as unknown as Record<string, unknown>)) {
      const dt = document.createElement("dt");
      dt.textContent = name;
      const dd = document.createElement("dd");
      dd.textContent = value;
      list.append(dt, dd);
    }
    dismissError();
  } catch (error) {
    if (error instanceof ApiFailure) {
      showError("measure", error, () => void runMeasure());
    } else {
      throw error;
    }
  } finally {
    workflow.pendingMeasure = false;
  }
  updateControls();
  redraw();
}

// ---- export ----

function download(name: string, data: BlobPart, type: string): void {
  const url = URL.createObjectURL(new Blob([data], { type }));
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  URL.revokeObjectURL(url);
}

function exportTrace(target: Target): void {
  const record = workflow.traces[target];
  if (record !== undefined) {
    download(`trace_${target}.json`, record.text, "application/json");
  }
}

async function exportMask(): Promise<void> {
  const session = workflow.session;
  if (session === null) {
    return;
  }
  try {
    const bytes = await api.maskBytes(session.session_id);
    download("vessels.png", bytes, "image/png");
  } catch (error) {
    if (error instanceof ApiFailure) {
      showError("mask export", error, () => void exportMask());
    }
  }
}

// ---- canvas interaction ----

function canvasPoint(event: MouseEvent): { sx: number; sy: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    sx: ((event.clientX - rect.left) * canvas.width) / rect.width,
    sy: ((event.clientY - rect.top) * canvas.height) / rect.height,
  };
}

function imagePoint(event: MouseEvent): Pt | null {
  const session = workflow.session;
  if (session === null) {
    return null;
  }
  const { sx, sy } = canvasPoint(event);
  const { ix, iy } = screenToImage(view, sx, sy);
  return inBounds(ix, iy, session.width, session.height) ? { x: ix, y: iy } : null;
}

canvas.addEventListener("mousedown", (event) => {
  if (event.button === 1 || tool === "pan") {
    drag = { kind: "pan", lastX: event.clientX, lastY: event.clientY };
    event.preventDefault();
    return;
  }
  if (event.button !== 0 || annotations === null) {
    return;
  }
  const p = imagePoint(event);
  if (p === null) {
    annotations.selection = null;
    redraw();
    return;
  }
  switch (tool) {
    case "select": {
      const radius = Math.max(2, 8 / view.zoom);
      if (annotations.selectAt(p, radius) !== null) {
        drag = { kind: "point" };
      }
      break;
    }
    case "endpoint-upper":
      annotations.addEndpoint("upper", p);
      break;
    case "guide-upper":
      annotations.addGuide("upper", p);
      break;
    case "endpoint-lower":
      annotations.addEndpoint("lower", p);
      break;
    case "guide-lower":
      annotations.addGuide("lower", p);
      break;
    case "fovea":
      annotations.setFovea(p);
      break;
  }
  updateControls();
  redraw();
});

canvas.addEventListener("mousemove", (event) => {
  if (drag !== null && drag.kind === "pan") {
    view = panBy(view, event.clientX - drag.lastX, event.clientY - drag.lastY);
    drag.lastX = event.clientX;
    drag.lastY = event.clientY;
    redraw();
    return;
  }
  const p = imagePoint(event);
  if (drag !== null && drag.kind === "point" && annotations?.selection != null && p !== null) {
    annotations.movePoint(annotations.selection, p);
  }
  cursor = p;
  el<HTMLElement>("cursor-label").textContent = p === null ? "" : `(${p.x}, ${p.y})`;
  redraw();
});

window.addEventListener("mouseup", () => {
  drag = null;
});

canvas.addEventListener("mouseleave", () => {
  cursor = null;
  el<HTMLElement>("cursor-label").textContent = "";
  redraw();
});

canvas.addEventListener(
  "wheel",
  (event) => {
    event.preventDefault();
    const { sx, sy } = canvasPoint(event);
    view = zoomAt(view, event.deltaY < 0 ? 1 : -1, sx, sy);
    updateControls();
    redraw();
  },
  { passive: false },
);

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
    return;
  }
  if (annotations === null) {
    return;
  }
  const selection = annotations.selection;
  const step = event.shiftKey ? 5 : 1;
  switch (event.key) {
    case "ArrowLeft":
    case "ArrowRight":
    case "ArrowUp":
    case "ArrowDown": {
      if (selection === null) {
        return;
      }
      const dx = event.key === "ArrowLeft" ? -step : event.key === "ArrowRight" ? step : 0;
      const dy = event.key === "ArrowUp" ? -step : event.key === "ArrowDown" ? step : 0;
      annotations.nudgePoint(selection, dx, dy);
      event.preventDefault();
      break;
    }
    case "Delete":
    case "Backspace":
      if (selection === null) {
        return;
      }
      annotations.deletePoint(selection);
      event.preventDefault();
      break;
    case "Escape":
      annotations.selection = null;
      break;
    default:
      return;
  }
  updateControls();
  redraw();
});

// ---- static wiring ----

el<HTMLFormElement>("upload-form").addEventListener("submit", (event) => {
  void createSession(event);
});

el<HTMLElement>("tools").addEventListener("click", (event) => {
  const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-tool]");
  if (button === null) {
    return;
  }
  tool = button.dataset.tool as Tool;
  document.querySelectorAll("#tools button").forEach((node) => {
    node.classList.toggle("active", node === button);
  });
  canvas.classList.toggle("panning", tool === "pan");
});

el<HTMLElement>("view-modes").addEventListener("change", (event) => {
  const value = (event.target as HTMLInputElement).value as ViewMode;
  mode = value;
  if (value === "edge-upper") {
    void ensureEdgeMap("upper");
  } else if (value === "edge-lower") {
    void ensureEdgeMap("lower");
  }
  redraw();
});

el<HTMLButtonElement>("zoom-in").addEventListener("click", () => {
  view = zoomAt(view, 1, canvas.width / 2, canvas.height / 2);
  updateControls();
  redraw();
});
el<HTMLButtonElement>("zoom-out").addEventListener("click", () => {
  view = zoomAt(view, -1, canvas.width / 2, canvas.height / 2);
  updateControls();
  redraw();
});
el<HTMLButtonElement>("zoom-fit").addEventListener("click", () => {
  const session = workflow.session;
  if (session !== null) {
    view = fitViewport(session.width, session.height, canvas.width, canvas.height);
    updateControls();
    redraw();
  }
});
el<HTMLInputElement>("show-band").addEventListener("change", redraw);

for (const name of ["sigma-f", "sigma-l"]) {
  const slider = el<HTMLInputElement>(name);
  const toggle = el<HTMLInputElement>(`${name}-on`);
  const label = el<HTMLElement>(`${name}-value`);
  toggle.addEventListener("change", () => {
    slider.disabled = !toggle.checked;
  });
  slider.addEventListener("input", () => {
    label.textContent = slider.value;
  });
}

el<HTMLInputElement>("mask-opacity").addEventListener("input", () => {
  el<HTMLElement>("mask-opacity-value").textContent = Number(
    el<HTMLInputElement>("mask-opacity").value,
  ).toFixed(2);
  redraw();
});

el<HTMLButtonElement>("trace-upper").addEventListener("click", () => void runTrace("upper"));
el<HTMLButtonElement>("trace-lower").addEventListener("click", () => void runTrace("lower"));
el<HTMLButtonElement>("run-vessels").addEventListener("click", () => void runVessels());
el<HTMLButtonElement>("run-measure").addEventListener("click", () => void runMeasure());

el<HTMLButtonElement>("export-upper").addEventListener("click", () => exportTrace("upper"));
el<HTMLButtonElement>("export-lower").addEventListener("click", () => exportTrace("lower"));
el<HTMLButtonElement>("export-vessels").addEventListener("click", () => {
  if (workflow.vessels !== null) {
    download("vessels.json", workflow.vessels.text, "application/json");
  }
});
el<HTMLButtonElement>("export-mask").addEventListener("click", () => void exportMask());
el<HTMLButtonElement>("export-report").addEventListener("click", () => {
  if (workflow.report !== null) {
    download("measure.json", workflow.report.text, "application/json");
  }
});

el<HTMLButtonElement>("retry-button").addEventListener("click", () => {
  const action = retryAction;
  dismissError();
  action?.();
});
el<HTMLButtonElement>("dismiss-error").addEventListener("click", dismissError);

resizeCanvas();
updateControls();
