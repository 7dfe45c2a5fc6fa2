/**
 * The draw plan is pure data, so these tests pin down what gets rendered:
 * overlays carry the server's row arrays verbatim, the vessel mask vanishes
 * at opacity zero, and the crossing highlight marks exactly the columns
 * where the returned traces overlap in the wrong order.
 */

import { describe, expect, it } from "vitest";

import type { TracePayload } from "../src/api.js";
import { crossingColumns, renderPlan, type DrawOp, type PlanInputs } from "../src/draw.js";
import { AnnotationState } from "../src/state.js";
import { responses } from "./fixtures.js";

const upper = JSON.parse(responses.trace_upper!.body) as TracePayload;
const lower = JSON.parse(responses.trace_lower!.body) as TracePayload;
const lowerCrossing = JSON.parse(responses.trace_lower_crossing!.body) as TracePayload;

function inputs(overrides: Partial<PlanInputs> = {}): PlanInputs {
  return {
    mode: "raw",
    traces: {},
    showBand: true,
    maskOpacity: 0.6,
    hasMask: false,
    annotations: null,
    roiPolygon: null,
    crossing: false,
    cursor: null,
    ...overrides,
  };
}

function ops(plan: DrawOp[], kind: DrawOp["kind"]): DrawOp[] {
  return plan.filter((op) => op.kind === kind);
}

describe("overlay passthrough", () => {
  it("draws the trace rows the server returned, unmodified", () => {
    const plan = renderPlan(inputs({ traces: { upper, lower } }));
    const traceOps = ops(plan, "trace") as Extract<DrawOp, { kind: "trace" }>[];
    expect(traceOps).toHaveLength(2);
    expect(traceOps[0]!.c0).toBe(upper.trace.c0);
    expect(traceOps[0]!.rows).toBe(upper.trace.rows);
    expect(traceOps[1]!.rows).toBe(lower.trace.rows);
  });

  it("draws the credible band from the server's band arrays", () => {
    const plan = renderPlan(inputs({ traces: { upper } }));
    const bandOps = ops(plan, "band") as Extract<DrawOp, { kind: "band" }>[];
    expect(bandOps).toHaveLength(1);
    expect(bandOps[0]!.lower).toBe(upper.trace.band_lower);
    expect(bandOps[0]!.upper).toBe(upper.trace.band_upper);
    // the band is ordered around the trace pointwise
    upper.trace.rows.forEach((row, i) => {
      expect(upper.trace.band_lower[i]!).toBeLessThanOrEqual(row);
      expect(upper.trace.band_upper[i]!).toBeGreaterThanOrEqual(row);
    });
  });

  it("omits the band when toggled off but keeps the trace", () => {
    const plan = renderPlan(inputs({ traces: { upper }, showBand: false }));
    expect(ops(plan, "band")).toHaveLength(0);
    expect(ops(plan, "trace")).toHaveLength(1);
  });
});

describe("vessel mask opacity", () => {
  it("skips the mask layer entirely at opacity zero", () => {
    const plan = renderPlan(inputs({ hasMask: true, maskOpacity: 0 }));
    expect(ops(plan, "mask")).toHaveLength(0);
  });

  it("draws the mask above the image at positive opacity", () => {
    const plan = renderPlan(inputs({ hasMask: true, maskOpacity: 0.35 }));
    const maskOps = ops(plan, "mask") as Extract<DrawOp, { kind: "mask" }>[];
    expect(maskOps).toHaveLength(1);
    expect(maskOps[0]!.opacity).toBe(0.35);
    expect(plan[0]!.kind).toBe("image");
    expect(plan.indexOf(maskOps[0]!)).toBeGreaterThan(0);
  });

  it("never draws a mask before one exists", () => {
    const plan = renderPlan(inputs({ hasMask: false, maskOpacity: 1 }));
    expect(ops(plan, "mask")).toHaveLength(0);
  });
});

describe("crossing highlight", () => {
  it("marks the columns where the lower trace rises above the upper", () => {
    const columns = crossingColumns(upper, lowerCrossing);
    expect(columns.length).toBeGreaterThan(0);
    for (const column of columns) {
      const upperRow = upper.trace.rows[column - upper.trace.c0]!;
      const lowerRow = lowerCrossing.trace.rows[column - lowerCrossing.trace.c0]!;
      expect(Math.round(lowerRow)).toBeLessThan(Math.round(upperRow));
    }
  });

  it("finds no crossing for a well-ordered pair", () => {
    expect(crossingColumns(upper, lower)).toHaveLength(0);
  });

  it("adds the highlight op only when the error flag is set", () => {
    const calm = renderPlan(inputs({ traces: { upper, lower: lowerCrossing } }));
    expect(ops(calm, "crossing")).toHaveLength(0);
    const flagged = renderPlan(inputs({ traces: { upper, lower: lowerCrossing }, crossing: true }));
    const crossingOps = ops(flagged, "crossing") as Extract<DrawOp, { kind: "crossing" }>[];
    expect(crossingOps).toHaveLength(1);
    expect(crossingOps[0]!.columns).toStrictEqual(crossingColumns(upper, lowerCrossing));
  });

  it("stays silent when flagged traces do not actually overlap wrongly", () => {
    const plan = renderPlan(inputs({ traces: { upper, lower }, crossing: true }));
    expect(ops(plan, "crossing")).toHaveLength(0);
  });
});

describe("measurement and annotation layers", () => {
  it("draws the ROI polygon returned by the measurement endpoint", () => {
    const report = JSON.parse(responses.measure!.body);
    const polygon = report.roi_polygon as [number, number][];
    expect(polygon.length).toBeGreaterThanOrEqual(3);
    const plan = renderPlan(inputs({ roiPolygon: polygon }));
    const roiOps = ops(plan, "roi") as Extract<DrawOp, { kind: "roi" }>[];
    expect(roiOps).toHaveLength(1);
    expect(roiOps[0]!.polygon).toBe(polygon);
  });

  it("renders endpoints, guides, fovea, and the cursor crosshair", () => {
    const annotations = new AnnotationState(128, 96);
    annotations.addEndpoint("upper", { x: 0, y: 30 });
    annotations.addEndpoint("upper", { x: 127, y: 32 });
    annotations.addGuide("lower", { x: 64, y: 60 });
    annotations.setFovea({ x: 64, y: 32 });
    const plan = renderPlan(inputs({ annotations, cursor: { x: 5, y: 6 } }));
    const pointOps = ops(plan, "points") as Extract<DrawOp, { kind: "points" }>[];
    expect(pointOps).toHaveLength(2);
    expect(pointOps[0]!.pointKind).toBe("endpoint");
    expect(pointOps[0]!.points).toHaveLength(2);
    expect(pointOps[1]!.target).toBe("lower");
    expect(ops(plan, "fovea")).toHaveLength(1);
    expect(plan[plan.length - 1]!.kind).toBe("crosshair");
  });
});
