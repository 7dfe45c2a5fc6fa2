/**
 * Client-side annotation and workflow state.
 *
 * Points live in integer image coordinates exactly as clicked; trace,
 * vessel, and measurement results are stored exactly as the server
 * returned them. Nothing here recomputes an algorithmic result.
 */

import type { RoiReport, SessionInfo, Target, TracePayload, VesselsSummary } from "./api.js";
import { fnv1a } from "./hash.js";

export interface Pt {
  x: number;
  y: number;
}

export type PointKind = "endpoint" | "guide";

export interface Selection {
  target: Target;
  kind: PointKind;
  index: number;
}

export interface TraceRecord {
  payload: TracePayload;
  text: string;
  hash: string;
}

export interface ServerError {
  status: number;
  bodyText: string;
  operation: string;
}

function asIntegerPoint(p: Pt): Pt {
  return { x: Math.floor(p.x), y: Math.floor(p.y) };
}

function squaredDistance(a: Pt, b: Pt): number {
  return (a.x - b.x) ** 2 + (a.y - b.y) ** 2;
}

export class AnnotationState {
  endpoints: Record<Target, Pt[]> = { upper: [], lower: [] };
  guides: Record<Target, Pt[]> = { upper: [], lower: [] };
  fovea: Pt | null = null;
  selection: Selection | null = null;

  constructor(
    public readonly width: number,
    public readonly height: number,
  ) {}

  private clamp(p: Pt): Pt {
    const q = asIntegerPoint(p);
    return {
      x: Math.max(0, Math.min(this.width - 1, q.x)),
      y: Math.max(0, Math.min(this.height - 1, q.y)),
    };
  }

  /** Add an endpoint; a third click replaces the nearest existing one. */
  addEndpoint(target: Target, p: Pt): void {
    const point = this.clamp(p);
    const points = this.endpoints[target];
    if (points.length < 2) {
      points.push(point);
      this.selection = { target, kind: "endpoint", index: points.length - 1 };
      return;
    }
    const first = points[0]!;
    const second = points[1]!;
    const index = squaredDistance(point, first) <= squaredDistance(point, second) ? 0 : 1;
    points[index] = point;
    this.selection = { target, kind: "endpoint", index };
  }

  addGuide(target: Target, p: Pt): void {
    const points = this.guides[target];
    points.push(this.clamp(p));
    this.selection = { target, kind: "guide", index: points.length - 1 };
  }

  setFovea(p: Pt): void {
    this.fovea = this.clamp(p);
    this.selection = null;
  }

  private pointList(target: Target, kind: PointKind): Pt[] {
    return kind === "endpoint" ? this.endpoints[target] : this.guides[target];
  }

  pointAt(selection: Selection): Pt | null {
    return this.pointList(selection.target, selection.kind)[selection.index] ?? null;
  }

  /** Nearest point within ``radius`` image pixels of p, or null. */
  selectAt(p: Pt, radius: number): Selection | null {
    let best: Selection | null = null;
    let bestDistance = radius * radius;
    for (const target of ["upper", "lower"] as Target[]) {
      for (const kind of ["endpoint", "guide"] as PointKind[]) {
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

  movePoint(selection: Selection, p: Pt): void {
    const points = this.pointList(selection.target, selection.kind);
    if (points[selection.index] !== undefined) {
      points[selection.index] = this.clamp(p);
    }
  }

  nudgePoint(selection: Selection, dx: number, dy: number): void {
    const point = this.pointAt(selection);
    if (point !== null) {
      this.movePoint(selection, { x: point.x + dx, y: point.y + dy });
    }
  }

  deletePoint(selection: Selection): void {
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
  traceInputs(target: Target): { endpoints: [number, number][]; guides: [number, number][] } {
    return {
      endpoints: this.endpoints[target].map((p) => [p.x, p.y] as [number, number]),
      guides: this.guides[target].map((p) => [p.x, p.y] as [number, number]),
    };
  }

  canTrace(target: Target): boolean {
    const points = this.endpoints[target];
    return points.length === 2 && points[0]!.x !== points[1]!.x;
  }
}

export class WorkflowState {
  session: SessionInfo | null = null;
  traces: Partial<Record<Target, TraceRecord>> = {};
  vessels: { summary: VesselsSummary; text: string } | null = null;
  report: { payload: RoiReport; text: string } | null = null;
  lastError: ServerError | null = null;
  crossing = false;
  // one in-flight trace per session; the run buttons stay disabled meanwhile
  pendingTrace = false;
  pendingVessels = false;
  pendingMeasure = false;

  canLaunchTrace(): boolean {
    return this.session !== null && !this.pendingTrace;
  }

  beginTrace(): boolean {
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
  finishTrace(target: Target, payload: TracePayload, text: string): { changed: boolean } {
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

  abortTrace(error: ServerError | null): void {
    this.pendingTrace = false;
    this.lastError = error;
  }

  recordError(error: ServerError): void {
    this.lastError = error;
    try {
      const body = JSON.parse(error.bodyText) as { error?: string };
      this.crossing = body.error === "crossing traces";
    } catch {
      this.crossing = false;
    }
  }

  clearError(): void {
    this.lastError = null;
  }
}
