/**
 * Rendering in two stages: renderPlan turns the current state into a flat
 * list of draw operations (pure data, unit-testable without a canvas), and
 * paint executes that list on a 2D context under the viewport transform.
 *
 * Trace rows and band edges are drawn at the row values the server
 * returned; the only client-side arithmetic is the screen transform.
 */
import { imageToScreen } from "./view.js";
/**
 * Image columns where the lower boundary sits at or above the upper one,
 * the condition the server rejects as "crossing traces". Pure comparison
 * of two server-returned traces for highlighting; no new result.
 */
export function crossingColumns(upper, lower) {
    const columns = [];
    const start = Math.max(upper.trace.c0, lower.trace.c0);
    const stop = Math.min(upper.trace.c0 + upper.trace.rows.length, lower.trace.c0 + lower.trace.rows.length);
    for (let column = start; column < stop; column++) {
        const upperRow = upper.trace.rows[column - upper.trace.c0];
        const lowerRow = lower.trace.rows[column - lower.trace.c0];
        if (Math.round(lowerRow) < Math.round(upperRow)) {
            columns.push(column);
        }
    }
    return columns;
}
function selectedIndex(selection, target, kind) {
    if (selection !== null && selection.target === target && selection.kind === kind) {
        return selection.index;
    }
    return null;
}
export function renderPlan(inputs) {
    const plan = [{ kind: "image", mode: inputs.mode }];
    // opacity 0 leaves the underlying image untouched
    if (inputs.hasMask && inputs.maskOpacity > 0) {
        plan.push({ kind: "mask", opacity: inputs.maskOpacity });
    }
    for (const target of ["upper", "lower"]) {
        const payload = inputs.traces[target];
        if (payload === undefined) {
            continue;
        }
        if (inputs.showBand) {
            plan.push({
                kind: "band",
                target,
                c0: payload.trace.c0,
                lower: payload.trace.band_lower,
                upper: payload.trace.band_upper,
            });
        }
        plan.push({ kind: "trace", target, c0: payload.trace.c0, rows: payload.trace.rows });
    }
    const upper = inputs.traces.upper;
    const lower = inputs.traces.lower;
    if (inputs.crossing && upper !== undefined && lower !== undefined) {
        const columns = crossingColumns(upper, lower);
        if (columns.length > 0) {
            plan.push({ kind: "crossing", columns });
        }
    }
    if (inputs.roiPolygon !== null && inputs.roiPolygon.length >= 3) {
        plan.push({ kind: "roi", polygon: inputs.roiPolygon });
    }
    if (inputs.annotations !== null) {
        const a = inputs.annotations;
        for (const target of ["upper", "lower"]) {
            if (a.endpoints[target].length > 0) {
                plan.push({
                    kind: "points",
                    target,
                    pointKind: "endpoint",
                    points: a.endpoints[target],
                    selected: selectedIndex(a.selection, target, "endpoint"),
                });
            }
            if (a.guides[target].length > 0) {
                plan.push({
                    kind: "points",
                    target,
                    pointKind: "guide",
                    points: a.guides[target],
                    selected: selectedIndex(a.selection, target, "guide"),
                });
            }
        }
        if (a.fovea !== null) {
            plan.push({ kind: "fovea", p: a.fovea });
        }
    }
    if (inputs.cursor !== null) {
        plan.push({ kind: "crosshair", p: inputs.cursor });
    }
    return plan;
}
const TARGET_COLORS = { upper: "#f5a623", lower: "#31c7f0" };
const BAND_COLORS = {
    upper: "rgba(245, 166, 35, 0.25)",
    lower: "rgba(49, 199, 240, 0.25)",
};
function tracePath(ctx, view, c0, rows, reverse) {
    const count = rows.length;
    for (let i = 0; i < count; i++) {
        const index = reverse ? count - 1 - i : i;
        // pixel centers: column c covers [c, c+1) on screen
        const sx = (c0 + index + 0.5) * view.zoom + view.panX;
        const sy = (rows[index] + 0.5) * view.zoom + view.panY;
        if (i === 0 && !reverse) {
            ctx.moveTo(sx, sy);
        }
        else {
            ctx.lineTo(sx, sy);
        }
    }
}
function paintImage(ctx, view, source, imageWidth, imageHeight, alpha) {
    ctx.save();
    ctx.globalAlpha = alpha;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(source, view.panX, view.panY, imageWidth * view.zoom, imageHeight * view.zoom);
    ctx.restore();
}
export function paint(ctx, view, plan, assets, imageWidth, imageHeight) {
    ctx.fillStyle = "#14181d";
    ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    for (const op of plan) {
        switch (op.kind) {
            case "image": {
                const source = op.mode === "raw" ? assets.raw : op.mode === "edge-upper" ? assets.edgeUpper : assets.edgeLower;
                if (source !== null) {
                    paintImage(ctx, view, source, imageWidth, imageHeight, 1.0);
                }
                break;
            }
            case "mask": {
                if (assets.mask !== null) {
                    paintImage(ctx, view, assets.mask, imageWidth, imageHeight, op.opacity);
                }
                break;
            }
            case "band": {
                ctx.save();
                ctx.fillStyle = BAND_COLORS[op.target];
                ctx.beginPath();
                tracePath(ctx, view, op.c0, op.lower, false);
                tracePath(ctx, view, op.c0, op.upper, true);
                ctx.closePath();
                ctx.fill();
                ctx.restore();
                break;
            }
            case "trace": {
                ctx.save();
                ctx.strokeStyle = TARGET_COLORS[op.target];
                ctx.lineWidth = 1.5;
                ctx.beginPath();
                tracePath(ctx, view, op.c0, op.rows, false);
                ctx.stroke();
                ctx.restore();
                break;
            }
            case "crossing": {
                ctx.save();
                ctx.fillStyle = "rgba(235, 64, 52, 0.35)";
                for (const column of op.columns) {
                    const { sx } = imageToScreen(view, column, 0);
                    ctx.fillRect(sx, view.panY, view.zoom, imageHeight * view.zoom);
                }
                ctx.restore();
                break;
            }
            case "roi": {
                ctx.save();
                ctx.strokeStyle = "#c86bfa";
                ctx.lineWidth = 1.5;
                ctx.beginPath();
                op.polygon.forEach(([col, row], i) => {
                    const sx = (col + 0.5) * view.zoom + view.panX;
                    const sy = (row + 0.5) * view.zoom + view.panY;
                    if (i === 0) {
                        ctx.moveTo(sx, sy);
                    }
                    else {
                        ctx.lineTo(sx, sy);
                    }
                });
                ctx.closePath();
                ctx.stroke();
                ctx.restore();
                break;
            }
            case "points": {
                ctx.save();
                const color = TARGET_COLORS[op.target];
                op.points.forEach((p, index) => {
                    const { sx, sy } = imageToScreen(view, p.x, p.y);
                    const size = Math.max(view.zoom, 6);
                    const offset = (size - view.zoom) / 2;
                    ctx.lineWidth = index === op.selected ? 3 : 1.5;
                    ctx.strokeStyle = index === op.selected ? "#ffffff" : color;
                    if (op.pointKind === "endpoint") {
                        ctx.strokeRect(sx - offset, sy - offset, size, size);
                    }
                    else {
                        ctx.beginPath();
                        ctx.arc(sx + view.zoom / 2, sy + view.zoom / 2, size / 2, 0, Math.PI * 2);
                        ctx.stroke();
                    }
                    ctx.fillStyle = color;
                    ctx.fillRect(sx, sy, view.zoom, view.zoom);
                });
                ctx.restore();
                break;
            }
            case "fovea": {
                const { sx, sy } = imageToScreen(view, op.p.x, op.p.y);
                const cx = sx + view.zoom / 2;
                const cy = sy + view.zoom / 2;
                ctx.save();
                ctx.strokeStyle = "#4cd964";
                ctx.lineWidth = 2;
                ctx.beginPath();
                ctx.moveTo(cx - 8, cy);
                ctx.lineTo(cx + 8, cy);
                ctx.moveTo(cx, cy - 8);
                ctx.lineTo(cx, cy + 8);
                ctx.stroke();
                ctx.strokeRect(sx, sy, view.zoom, view.zoom);
                ctx.restore();
                break;
            }
            case "crosshair": {
                const { sx, sy } = imageToScreen(view, op.p.x, op.p.y);
                ctx.save();
                ctx.strokeStyle = "rgba(255, 255, 255, 0.4)";
                ctx.lineWidth = 1;
                ctx.beginPath();
                ctx.moveTo(sx + view.zoom / 2, 0);
                ctx.lineTo(sx + view.zoom / 2, ctx.canvas.height);
                ctx.moveTo(0, sy + view.zoom / 2);
                ctx.lineTo(ctx.canvas.width, sy + view.zoom / 2);
                ctx.stroke();
                // snapped highlight of the pixel square under the cursor
                ctx.strokeStyle = "rgba(255, 255, 255, 0.9)";
                ctx.strokeRect(sx, sy, view.zoom, view.zoom);
                ctx.restore();
                break;
            }
        }
    }
}
