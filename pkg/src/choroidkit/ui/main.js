/**
 * Application wiring: upload form, canvas interaction, trace / vessel /
 * measure launches, result panels, and artifact export.
 *
 * Every displayed number comes from a stored server response; exports
 * write the exact response bytes.
 */
import { ApiClient, ApiFailure, } from "./api.js";
import { paint, renderPlan } from "./draw.js";
import { AnnotationState, WorkflowState } from "./state.js";
import { createViewport, fitViewport, inBounds, panBy, screenToImage, zoomAt, } from "./view.js";
function el(id) {
    const node = document.getElementById(id);
    if (node === null) {
        throw new Error(`missing element #${id}`);
    }
    return node;
}
const canvas = el("view-canvas");
const ctx = canvas.getContext("2d");
const stage = el("stage");
const api = new ApiClient();
const workflow = new WorkflowState();
let annotations = null;
let view = createViewport();
let tool = "select";
let mode = "raw";
let cursor = null;
let retryAction = null;
const assets = { raw: null, edgeUpper: null, edgeLower: null, mask: null };
const edgeLoading = {};
let drag = null;
let redrawQueued = false;
function redraw() {
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
            showBand: el("show-band").checked,
            maskOpacity: Number(el("mask-opacity").value),
            hasMask: assets.mask !== null,
            annotations,
            roiPolygon: workflow.report?.payload.roi_polygon ?? null,
            crossing: workflow.crossing,
            cursor,
        });
        paint(ctx, view, plan, assets, session.width, session.height);
    });
}
function resizeCanvas() {
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
function updateControls() {
    const haveSession = workflow.session !== null;
    const bothTraces = workflow.traces.upper !== undefined && workflow.traces.lower !== undefined;
    for (const target of ["upper", "lower"]) {
        el(`trace-${target}`).disabled =
            !haveSession || !workflow.canLaunchTrace() || annotations?.canTrace(target) !== true;
    }
    el("run-vessels").disabled =
        !haveSession || !bothTraces || workflow.pendingVessels;
    el("run-measure").disabled =
        !haveSession || !bothTraces || annotations?.fovea == null || workflow.pendingMeasure;
    el("export-upper").disabled = workflow.traces.upper === undefined;
    el("export-lower").disabled = workflow.traces.lower === undefined;
    el("export-vessels").disabled = workflow.vessels === null;
    el("export-mask").disabled = workflow.vessels === null;
    el("export-report").disabled = workflow.report === null;
    const fovea = annotations?.fovea ?? null;
    el("fovea-label").textContent =
        fovea === null ? "fovea: not set" : `fovea: (${fovea.x}, ${fovea.y})`;
    const hashes = [];
    for (const target of ["upper", "lower"]) {
        const record = workflow.traces[target];
        if (record !== undefined) {
            hashes.push(`${target} ${record.hash}`);
        }
    }
    el("hash-label").textContent = hashes.join("  ");
    el("zoom-label").textContent = `${view.zoom}×`;
}
function showError(operation, failure, retry) {
    workflow.recordError({ status: failure.status, bodyText: failure.bodyText, operation });
    retryAction = retry;
    el("error-status").textContent = `HTTP ${failure.status} during ${operation}`;
    // the exact body the server sent, unmodified
    el("error-body").textContent = failure.bodyText;
    el("error-panel").hidden = false;
    redraw();
}
function dismissError() {
    workflow.clearError();
    retryAction = null;
    el("error-panel").hidden = true;
}
function setStatus(id, text) {
    el(id).textContent = text;
}
// ---- session ----
function loadImageElement(url) {
    return new Promise((resolve, reject) => {
        const image = new Image();
        image.onload = () => resolve(image);
        image.onerror = () => reject(new Error(`failed to load ${url}`));
        image.src = url;
    });
}
/** Color the white mask pixels and make the background transparent. */
function tintMask(image) {
    const off = document.createElement("canvas");
    off.width = image.naturalWidth;
    off.height = image.naturalHeight;
    const offCtx = off.getContext("2d");
    offCtx.drawImage(image, 0, 0);
    const data = offCtx.getImageData(0, 0, off.width, off.height);
    const px = data.data;
    for (let i = 0; i < px.length; i += 4) {
        if (px[i] > 127) {
            px[i] = 235;
            px[i + 1] = 77;
            px[i + 2] = 92;
            px[i + 3] = 255;
        }
        else {
            px[i + 3] = 0;
        }
    }
    offCtx.putImageData(data, 0, 0);
    return off;
}
async function createSession(event) {
    event.preventDefault();
    const files = el("image-file").files;
    if (files === null || files.length === 0) {
        return;
    }
    const axial = Number(el("axial-scale").value);
    const lateral = Number(el("lateral-scale").value);
    const eye = el("eye").value;
    const previous = workflow.session;
    try {
        const info = await api.createSession(files[0], axial, lateral, eye);
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
        el("view-modes").querySelectorAll("input").forEach((input) => {
            input.checked = input.value === "raw";
        });
        view = fitViewport(info.width, info.height, canvas.width, canvas.height);
        el("session-label").textContent =
            `session ${info.session_id.slice(0, 8)}  ${info.width}×${info.height} px`;
        setStatus("trace-status", "");
        setStatus("vessel-status", "");
        el("report").replaceChildren();
        dismissError();
        if (previous !== null) {
            void api.deleteSession(previous.session_id).catch(() => undefined);
        }
    }
    catch (error) {
        if (error instanceof ApiFailure) {
            showError("session upload", error, () => void createSession(event));
        }
        else {
            throw error;
        }
    }
    updateControls();
    redraw();
}
async function ensureEdgeMap(target) {
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
    }
    finally {
        edgeLoading[target] = false;
    }
    redraw();
}
// ---- algorithm launches ----
function numberOrUndefined(id) {
    const raw = el(id).value.trim();
    return raw === "" ? undefined : Number(raw);
}
function traceConfig() {
    const config = {};
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
    if (el("sigma-f-on").checked) {
        config.sigma_f = Number(el("sigma-f").value);
    }
    if (el("sigma-l-on").checked) {
        config.sigma_l = Number(el("sigma-l").value);
    }
    return config;
}
async function runTrace(target) {
    const session = workflow.session;
    if (session === null || annotations === null || !workflow.beginTrace()) {
        return;
    }
    const inputs = annotations.traceInputs(target);
    const request = {
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
            el("report").replaceChildren();
            setStatus("vessel-status", "");
        }
        const hash = workflow.traces[target].hash;
        setStatus("trace-status", changed
            ? `${target}: ${payload.iterations} iterations, hash ${hash}`
            : `${target}: identical to previous run (hash ${hash})`);
        dismissError();
    }
    catch (error) {
        if (error instanceof ApiFailure) {
            workflow.abortTrace(null);
            setStatus("trace-status", "");
            showError(`trace ${target}`, error, () => void runTrace(target));
        }
        else {
            workflow.abortTrace(null);
            setStatus("trace-status", String(error));
        }
    }
    updateControls();
    redraw();
}
async function runVessels() {
    const session = workflow.session;
    if (session === null || workflow.pendingVessels) {
        return;
    }
    workflow.pendingVessels = true;
    updateControls();
    setStatus("vessel-status", "segmenting…");
    const method = el("vessel-method").value;
    try {
        const result = await api.vessels(session.session_id, { method });
        workflow.vessels = { summary: result.payload, text: result.text };
        const maskImage = await loadImageElement(`${api.maskUrl(session.session_id)}?r=${Date.now()}`);
        assets.mask = tintMask(maskImage);
        const cvi = result.payload.cvi_preview;
        setStatus("vessel-status", `${result.payload.vessel_pixels} vessel px / ${result.payload.region_pixels} region px` +
            (cvi === null ? "" : `, CVI preview ${cvi.toFixed(4)}`));
        workflow.crossing = false;
        dismissError();
    }
    catch (error) {
        if (error instanceof ApiFailure) {
            setStatus("vessel-status", "");
            showError("vessels", error, () => void runVessels());
        }
        else {
            setStatus("vessel-status", String(error));
        }
    }
    workflow.pendingVessels = false;
    updateControls();
    redraw();
}
function reportRows(payload) {
    const rows = [
        ["SFCT", `${payload.sfct_microns.toFixed(2)} µm`],
        ["mean thickness", `${payload.avg_thickness_microns.toFixed(2)} µm`],
        ["area", `${payload.area_mm2.toFixed(4)} mm²`],
    ];
    if (typeof payload.vessel_area_mm2 === "number") {
        rows.push(["vessel area", `${payload.vessel_area_mm2.toFixed(4)} mm²`]);
    }
    if (typeof payload.cvi === "number") {
        rows.push(["CVI", payload.cvi.toFixed(4)]);
    }
    return rows;
}
async function runMeasure() {
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
            roi_microns: Number(el("roi-microns").value),
            alignment: el("alignment").value,
        });
        workflow.report = { payload: result.payload, text: result.text };
        const list = el("report");
        list.replaceChildren();
        for (const [name, value] of reportRows(result.payload)) {
            const dt = document.createElement("dt");
            dt.textContent = name;
            const dd = document.createElement("dd");
            dd.textContent = value;
            list.append(dt, dd);
        }
        dismissError();
    }
    catch (error) {
        if (error instanceof ApiFailure) {
            showError("measure", error, () => void runMeasure());
        }
        else {
            throw error;
        }
    }
    finally {
        workflow.pendingMeasure = false;
    }
    updateControls();
    redraw();
}
// ---- export ----
function download(name, data, type) {
    const url = URL.createObjectURL(new Blob([data], { type }));
    const anchor = document.createElement("a");
    anchor.href = url;
    anchor.download = name;
    anchor.click();
    URL.revokeObjectURL(url);
}
function exportTrace(target) {
    const record = workflow.traces[target];
    if (record !== undefined) {
        download(`trace_${target}.json`, record.text, "application/json");
    }
}
async function exportMask() {
    const session = workflow.session;
    if (session === null) {
        return;
    }
    try {
        const bytes = await api.maskBytes(session.session_id);
        download("vessels.png", bytes, "image/png");
    }
    catch (error) {
        if (error instanceof ApiFailure) {
            showError("mask export", error, () => void exportMask());
        }
    }
}
// ---- canvas interaction ----
function canvasPoint(event) {
    const rect = canvas.getBoundingClientRect();
    return {
        sx: ((event.clientX - rect.left) * canvas.width) / rect.width,
        sy: ((event.clientY - rect.top) * canvas.height) / rect.height,
    };
}
function imagePoint(event) {
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
    el("cursor-label").textContent = p === null ? "" : `(${p.x}, ${p.y})`;
    redraw();
});
window.addEventListener("mouseup", () => {
    drag = null;
});
canvas.addEventListener("mouseleave", () => {
    cursor = null;
    el("cursor-label").textContent = "";
    redraw();
});
canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const { sx, sy } = canvasPoint(event);
    view = zoomAt(view, event.deltaY < 0 ? 1 : -1, sx, sy);
    updateControls();
    redraw();
}, { passive: false });
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
el("upload-form").addEventListener("submit", (event) => {
    void createSession(event);
});
el("tools").addEventListener("click", (event) => {
    const button = event.target.closest("button[data-tool]");
    if (button === null) {
        return;
    }
    tool = button.dataset.tool;
    document.querySelectorAll("#tools button").forEach((node) => {
        node.classList.toggle("active", node === button);
    });
    canvas.classList.toggle("panning", tool === "pan");
});
el("view-modes").addEventListener("change", (event) => {
    const value = event.target.value;
    mode = value;
    if (value === "edge-upper") {
        void ensureEdgeMap("upper");
    }
    else if (value === "edge-lower") {
        void ensureEdgeMap("lower");
    }
    redraw();
});
el("zoom-in").addEventListener("click", () => {
    view = zoomAt(view, 1, canvas.width / 2, canvas.height / 2);
    updateControls();
    redraw();
});
el("zoom-out").addEventListener("click", () => {
    view = zoomAt(view, -1, canvas.width / 2, canvas.height / 2);
    updateControls();
    redraw();
});
el("zoom-fit").addEventListener("click", () => {
    const session = workflow.session;
    if (session !== null) {
        view = fitViewport(session.width, session.height, canvas.width, canvas.height);
        updateControls();
        redraw();
    }
});
el("show-band").addEventListener("change", redraw);
for (const name of ["sigma-f", "sigma-l"]) {
    const slider = el(name);
    const toggle = el(`${name}-on`);
    const label = el(`${name}-value`);
    toggle.addEventListener("change", () => {
        slider.disabled = !toggle.checked;
    });
    slider.addEventListener("input", () => {
        label.textContent = slider.value;
    });
}
el("mask-opacity").addEventListener("input", () => {
    el("mask-opacity-value").textContent = Number(el("mask-opacity").value).toFixed(2);
    redraw();
});
el("trace-upper").addEventListener("click", () => void runTrace("upper"));
el("trace-lower").addEventListener("click", () => void runTrace("lower"));
el("run-vessels").addEventListener("click", () => void runVessels());
el("run-measure").addEventListener("click", () => void runMeasure());
el("export-upper").addEventListener("click", () => exportTrace("upper"));
el("export-lower").addEventListener("click", () => exportTrace("lower"));
el("export-vessels").addEventListener("click", () => {
    if (workflow.vessels !== null) {
        download("vessels.json", workflow.vessels.text, "application/json");
    }
});
el("export-mask").addEventListener("click", () => void exportMask());
el("export-report").addEventListener("click", () => {
    if (workflow.report !== null) {
        download("measure.json", workflow.report.text, "application/json");
    }
});
el("retry-button").addEventListener("click", () => {
    const action = retryAction;
    dismissError();
    action?.();
});
el("dismiss-error").addEventListener("click", dismissError);
resizeCanvas();
updateControls();
