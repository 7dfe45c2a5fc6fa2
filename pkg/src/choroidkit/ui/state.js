/**
 * Client-side annotation and workflow state.
 *
 * Points live in integer image coordinates exactly as clicked; trace,
 * vessel, and measurement results are stored exactly as the server
 * returned them. Nothing here recomputes an algorithmic result.
 */
import { fnv1a } from "./hash.js";
function asIntegerPoint(p) {
    return { x: Math.floor(p.x), y: Math.floor(p.y) };
}
function squaredDistance(a, b) {
    return (a.x - b.x) ** 2 + (a.y - b.y) ** 2;
}
export class AnnotationState {
    width;
    height;
    endpoints = { upper: [], lower: [] };
    guides = { upper: [], lower: [] };
    fovea = null;
    selection = null;
    constructor(width, height) {
        this.width = width;
        this.height = height;
    }
    clamp(p) {
        const q = asIntegerPoint(p);
        return {
            x: Math.max(0, Math.min(this.width - 1, q.x)),
            y: Math.max(0, Math.min(this.height - 1, q.y)),
        };
    }
    /** Add an endpoint; a third click replaces the nearest existing one. */
    addEndpoint(target, p) {
        const point = this.clamp(p);
        const points = this.endpoints[target];
        if (points.length < 2) {
            points.push(point);
            this.selection = { target, kind: "endpoint", index: points.length - 1 };
            return;
        }
        const first = points[0];
        const second = points[1];
        const index = squaredDistance(point, first) <= squaredDistance(point, second) ? 0 : 1;
        points[index] = point;
        this.selection = { target, kind: "endpoint", index };
    }
    addGuide(target, p) {
        const points = this.guides[target];
        points.push(this.clamp(p));
        this.selection = { target, kind: "guide", index: points.length - 1 };
    }
    setFovea(p) {
        this.fovea = this.clamp(p);
        this.selection = null;
    }
    pointList(target, kind) {
        return kind === "endpoint" ? this.endpoints[target] : this.guides[target];
    }
    pointAt(selection) {
        return this.pointList(selection.target, selection.kind)[selection.index] ?? null;
    }
    /** Nearest point within ``radius`` image pixels of p, or null. */
    selectAt(p, radius) {
        let best = null;
        let bestDistance = radius * radius;
        for (const target of ["upper", "lower"]) {
            for (const kind of ["endpoint", "guide"]) {
                this.pointList(target, kind).forEach((point, index) => {
                    const d = squaredDistance(point, p);
                    if (d <= bestDistance) {
                        bestDistance = d;
                        best = { target, kind, index };
                    }
                });
            }
        }
        this.selection = best;
        return best;
    }
    movePoint(selection, p) {
        const points = this.pointList(selection.target, selection.kind);
        if (points[selection.index] !== undefined) {
            points[selection.index] = this.clamp(p);
        }
    }
    nudgePoint(selection, dx, dy) {
        const point = this.pointAt(selection);
        if (point !== null) {
            this.movePoint(selection, { x: point.x + dx, y: point.y + dy });
        }
    }
    deletePoint(selection) {
        const points = this.pointList(selection.target, selection.kind);
        if (points[selection.index] !== undefined) {
            points.splice(selection.index, 1);
        }
        if (this.selection !== null
            && this.selection.target === selection.target
            && this.selection.kind === selection.kind
            && this.selection.index === selection.index) {
            this.selection = null;
        }
    }
    /** Endpoint/guide pairs for a trace request, exactly as clicked. */
    traceInputs(target) {
        return {
            endpoints: this.endpoints[target].map((p) => [p.x, p.y]),
            guides: this.guides[target].map((p) => [p.x, p.y]),
        };
    }
    canTrace(target) {
        const points = this.endpoints[target];
        return points.length === 2 && points[0].x !== points[1].x;
    }
}
export class WorkflowState {
    session = null;
    traces = {};
    vessels = null;
    report = null;
    lastError = null;
    crossing = false;
    // one in-flight trace per session; the run buttons stay disabled meanwhile
    pendingTrace = false;
    pendingVessels = false;
    pendingMeasure = false;
    canLaunchTrace() {
        return this.session !== null && !this.pendingTrace;
    }
    beginTrace() {
        if (!this.canLaunchTrace()) {
            return false;
        }
        this.pendingTrace = true;
        return true;
    }
    /**
     * Store a finished trace and report whether its bytes differ from the
     * previous run of the same boundary. A new trace invalidates vessel and
     * measurement results, which were derived from the old boundary.
     */
    finishTrace(target, payload, text) {
        this.pendingTrace = false;
        const hash = fnv1a(text);
        const changed = this.traces[target]?.hash !== hash;
        this.traces[target] = { payload, text, hash };
        if (changed) {
            this.vessels = null;
            this.report = null;
        }
        this.crossing = false;
        this.lastError = null;
        return { changed };
    }
    abortTrace(error) {
        this.pendingTrace = false;
        this.lastError = error;
    }
    recordError(error) {
        this.lastError = error;
        try {
            const body = JSON.parse(error.bodyText);
            this.crossing = body.error === "crossing traces";
        }
        catch {
            this.crossing = false;
        }
    }
    clearError() {
        this.lastError = null;
    }
}
