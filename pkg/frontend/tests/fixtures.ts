/**
 * Access to the recorded server responses plus a playback fetch.
 *
 * The fixture file is written by the recording script at the repository
 * root (scripts/record_ui_fixtures.py), which drives the real HTTP
 * service; the tests replay those exact bytes through the client code.
 */

import type { FetchLike } from "../src/api.js";
import recorded from "./fixtures/recorded.json";

export interface RecordedResponse {
  status: number;
  body: string;
}

export const responses = recorded.responses as unknown as Record<string, RecordedResponse>;
export const requests = recorded.requests as unknown as Record<
  string,
  Record<string, unknown>
>;
export const image = recorded.image;

export interface CapturedCall {
  url: string;
  init: RequestInit | undefined;
}

export interface Playback {
  fetchFn: FetchLike;
  calls: CapturedCall[];
}

/** Fetch stand-in that answers with the given recorded responses in order. */
export function playbackFetch(...entries: RecordedResponse[]): Playback {
  const calls: CapturedCall[] = [];
  let index = 0;
  const fetchFn = (async (url: RequestInfo | URL, init?: RequestInit) => {
    calls.push({ url: String(url), init });
    const entry = entries[Math.min(index, entries.length - 1)];
    index += 1;
    if (entry === undefined) {
      throw new Error("playback fetch called with no recorded entries");
    }
    return new Response(entry.body, {
      status: entry.status,
      headers: { "Content-Type": "application/json" },
    });
  }) as FetchLike;
  return { fetchFn, calls };
}

export function bodyJson(call: CapturedCall): Record<string, unknown> {
  if (typeof call.init?.body !== "string") {
    throw new Error("captured call carried no JSON body");
  }
  return JSON.parse(call.init.body);
}
