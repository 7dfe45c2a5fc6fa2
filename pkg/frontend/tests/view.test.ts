/**
 * Exactness of the screen/image mapping: at every integer zoom level a
 * click anywhere inside the drawn square of image pixel p maps back to p.
 */

import { describe, expect, it } from "vitest";

import {
  ZOOM_LEVELS,
  createViewport,
  fitViewport,
  imageToScreen,
  panBy,
  screenToImage,
  zoomAt,
  type Viewport,
} from "../src/view.js";

/** Small deterministic generator so failures reproduce. */
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

describe("coordinate mapping", () => {
  it("round-trips every pixel at every integer zoom", () => {
    const rand = lcg(20_240_815);
    for (const zoom of ZOOM_LEVELS) {
      for (let trial = 0; trial < 25; trial++) {
        const view: Viewport = {
          zoom,
          panX: Math.floor(rand() * 2001) - 1000,
          panY: Math.floor(rand() * 2001) - 1000,
        };
        const ix = Math.floor(rand() * 768);
        const iy = Math.floor(rand() * 768);
        const { sx, sy } = imageToScreen(view, ix, iy);
        // every canvas point inside the pixel's zoom-by-zoom square maps back
        const dx = Math.floor(rand() * zoom);
        const dy = Math.floor(rand() * zoom);
        expect(screenToImage(view, sx + dx, sy + dy)).toStrictEqual({ ix, iy });
        expect(screenToImage(view, sx, sy)).toStrictEqual({ ix, iy });
        expect(screenToImage(view, sx + zoom - 1, sy + zoom - 1)).toStrictEqual({ ix, iy });
      }
    }
  });

  it("maps the adjacent square to the adjacent pixel", () => {
    for (const zoom of ZOOM_LEVELS) {
      const view: Viewport = { zoom, panX: -37, panY: 12 };
      const { sx, sy } = imageToScreen(view, 10, 20);
      expect(screenToImage(view, sx + zoom, sy)).toStrictEqual({ ix: 11, iy: 20 });
      expect(screenToImage(view, sx - 1, sy)).toStrictEqual({ ix: 9, iy: 20 });
    }
  });
});

describe("zoom and pan", () => {
  it("only produces configured integer zoom levels and integer pans", () => {
    let view = createViewport();
    const rand = lcg(7);
    for (let step = 0; step < 200; step++) {
      const direction = rand() < 0.5 ? -1 : 1;
      view = zoomAt(view, direction, rand() * 1200, rand() * 800);
      expect(ZOOM_LEVELS).toContain(view.zoom);
      expect(Number.isInteger(view.panX)).toBe(true);
      expect(Number.isInteger(view.panY)).toBe(true);
    }
  });

  it("keeps the pixel under the cursor fixed while zooming in", () => {
    const view: Viewport = { zoom: 2, panX: 40, panY: 40 };
    const { sx, sy } = imageToScreen(view, 100, 50);
    const cursorX = sx + 1;
    const cursorY = sy + 1;
    const zoomed = zoomAt(view, 1, cursorX, cursorY);
    expect(zoomed.zoom).toBeGreaterThan(view.zoom);
    expect(screenToImage(zoomed, cursorX, cursorY)).toStrictEqual({ ix: 100, iy: 50 });
  });

  it("clamps zoom at the ends of the level list", () => {
    const minView: Viewport = { zoom: ZOOM_LEVELS[0], panX: 0, panY: 0 };
    expect(zoomAt(minView, -1, 0, 0)).toBe(minView);
    const maxView: Viewport = { zoom: ZOOM_LEVELS[ZOOM_LEVELS.length - 1]!, panX: 0, panY: 0 };
    expect(zoomAt(maxView, 1, 0, 0)).toBe(maxView);
  });

  it("pans by whole pixels", () => {
    const view = panBy({ zoom: 3, panX: 5, panY: 5 }, 10.4, -3.6);
    expect(view.panX).toBe(15);
    expect(view.panY).toBe(1);
  });
});

describe("fit", () => {
  it("centers the image at the largest integer zoom that fits", () => {
    const view = fitViewport(128, 96, 1000, 700);
    expect(view.zoom).toBe(6);
    expect(view.panX).toBe(Math.round((1000 - 128 * 6) / 2));
    expect(view.panY).toBe(Math.round((700 - 96 * 6) / 2));
  });

  it("never goes below one even when the canvas is smaller than the image", () => {
    expect(fitViewport(2000, 2000, 400, 300).zoom).toBe(1);
  });
});
