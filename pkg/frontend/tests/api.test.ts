/**
 * Contract tests for the API client against recorded server responses:
 * coordinates are transmitted exactly as clicked, identical re-runs hash
 * equal, and error bodies surface verbatim.
 */

import { describe, expect, it } from "vitest";

import {
  ApiClient,
  ApiFailure,
  type RoiReport,
  type TraceRequest,
} from "../src/api.js";
import { fnv1a } from "../src/hash.js";
import { bodyJson, playbackFetch, requests, responses } from "./fixtures.js";

const SID = "abc123";

describe("request transmission", () => {
  it("sends endpoint coordinates exactly as given", async () => {
    const playback = playbackFetch(responses.trace_upper!);
    const client = new ApiClient("", playback.fetchFn);
    const request: TraceRequest = {
      target: "upper",
      endpoints: [
        [10, 100],
        [750, 105],
      ],
      guides: [[380, 102]],
      seed: 42,
    };
    await client.trace(SID, request);

    const call = playback.calls[0]!;
    expect(call.url).toBe(`/api/session/${SID}/trace`);
    const sent = bodyJson(call);
    expect(sent.endpoints).toStrictEqual([
      [10, 100],
      [750, 105],
    ]);
    expect(sent.guides).toStrictEqual([[380, 102]]);
    expect(sent.seed).toBe(42);
    // integers survive serialization with no client-side transformation
    expect(call.init!.body).toContain('"endpoints":[[10,100],[750,105]]');
    for (const pair of sent.endpoints as [number, number][]) {
      expect(Number.isInteger(pair[0])).toBe(true);
      expect(Number.isInteger(pair[1])).toBe(true);
    }
  });

  it("replays the recorded trace request unchanged", async () => {
    const playback = playbackFetch(responses.trace_upper!);
    const client = new ApiClient("", playback.fetchFn);
    await client.trace(SID, requests.trace_upper as unknown as TraceRequest);
    expect(bodyJson(playback.calls[0]!)).toStrictEqual(requests.trace_upper);
  });

  it("posts the session form fields it was given", async () => {
    const playback = playbackFetch(responses.session!);
    const client = new ApiClient("", playback.fetchFn);
    await client.createSession(new Blob([new Uint8Array([1, 2, 3])]), 3.87, 11.49, "right");

    const form = playback.calls[0]!.init?.body as FormData;
    expect(form).toBeInstanceOf(FormData);
    expect(form.get("axial_scale")).toBe("3.87");
    expect(form.get("lateral_scale")).toBe("11.49");
    expect(form.get("eye")).toBe("right");
  });
});

describe("re-run identity", () => {
  it("hashes identical re-runs equal", async () => {
    const playback = playbackFetch(responses.trace_upper!, responses.trace_upper_rerun!);
    const client = new ApiClient("", playback.fetchFn);
    const first = await client.trace(SID, requests.trace_upper as unknown as TraceRequest);
    const second = await client.trace(SID, requests.trace_upper as unknown as TraceRequest);
    expect(second.text).toBe(first.text);
    expect(fnv1a(second.text)).toBe(fnv1a(first.text));
  });

  it("hashes a different seed differently", async () => {
    const playback = playbackFetch(responses.trace_upper!, responses.trace_upper_seed7!);
    const client = new ApiClient("", playback.fetchFn);
    const first = await client.trace(SID, requests.trace_upper as unknown as TraceRequest);
    const second = await client.trace(SID, {
      ...(requests.trace_upper as unknown as TraceRequest),
      seed: 7,
    });
    expect(fnv1a(second.text)).not.toBe(fnv1a(first.text));
  });
});

describe("error surfacing", () => {
  const cases: [string, string, number][] = [
    ["err_unknown_session", "unknown session", 404],
    ["err_bad_coordinates", "invalid coordinates", 422],
    ["err_vessels_before_traces", "both traces are required", 409],
    ["err_crossing", "crossing traces", 500],
  ];

  for (const [name, needle, status] of cases) {
    it(`surfaces the recorded ${status} body verbatim (${name})`, async () => {
      const recordedEntry = responses[name]!;
      const playback = playbackFetch(recordedEntry);
      const client = new ApiClient("", playback.fetchFn);
      const failure = await client
        .vessels(SID)
        .then(() => null)
        .catch((error: unknown) => error);

      expect(failure).toBeInstanceOf(ApiFailure);
      const apiFailure = failure as ApiFailure;
      expect(apiFailure.status).toBe(status);
      // the exact bytes the server sent, for verbatim display
      expect(apiFailure.bodyText).toBe(recordedEntry.body);
      expect(apiFailure.body?.error).toContain(needle);
    });
  }

  it("keeps the structured operation field of algorithm failures", async () => {
    const playback = playbackFetch(responses.err_crossing!);
    const client = new ApiClient("", playback.fetchFn);
    const failure = (await client.vessels(SID).catch((error: unknown) => error)) as ApiFailure;
    expect(failure.body).toStrictEqual({ error: "crossing traces", operation: "region" });
  });
});

describe("payload passthrough", () => {
  it("returns measurement numbers exactly as the server sent them", async () => {
    const playback = playbackFetch(responses.measure!);
    const client = new ApiClient("", playback.fetchFn);
    const { payload, text } = await client.measure(SID, {
      fovea: requests.measure!.fovea as [number, number],
      roi_microns: requests.measure!.roi_microns as number,
    });
    const reference = JSON.parse(responses.measure!.body) as RoiReport;
    expect(payload.sfct_microns).toBe(reference.sfct_microns);
    expect(payload.avg_thickness_microns).toBe(reference.avg_thickness_microns);
    expect(payload.area_mm2).toBe(reference.area_mm2);
    expect(payload.cvi).toBe(reference.cvi);
    expect(text).toBe(responses.measure!.body);
  });

  it("returns the vessel summary with its mask URL", async () => {
    const playback = playbackFetch(responses.vessels!);
    const client = new ApiClient("", playback.fetchFn);
    const { payload } = await client.vessels(SID, { method: "mmcq" });
    expect(payload.mask).toMatch(/\/vessels\/mask$/);
    expect(payload.vessel_pixels).toBeGreaterThan(0);
    expect(payload.region_pixels).toBeGreaterThan(payload.vessel_pixels);
  });
});
