/**
 * Viewport mapping between canvas pixels and image pixels.
 *
 * Zoom levels are integers and the pan offset is kept in whole canvas
 * pixels, so the mapping is exact: every canvas point inside the drawn
 * square of image pixel p maps back to p, and a click on pixel p always
 * transmits p.
 */

export const ZOOM_LEVELS = [1, 2, 3, 4, 6, 8, 12, 16] as const;

export interface Viewport {
  zoom: number;
  panX: number;
  panY: number;
}

export function createViewport(): Viewport {
  return { zoom: 1, panX: 0, panY: 0 };
}

/** Top-left canvas corner of image pixel (ix, iy). */
export function imageToScreen(view: Viewport, ix: number, iy: number): { sx: number; sy: number } {
  return { sx: ix * view.zoom + view.panX, sy: iy * view.zoom + view.panY };
}

/** Image pixel containing canvas point (sx, sy). */
export function screenToImage(view: Viewport, sx: number, sy: number): { ix: number; iy: number } {
  return {
    ix: Math.floor((sx - view.panX) / view.zoom),
    iy: Math.floor((sy - view.panY) / view.zoom),
  };
}

export function inBounds(ix: number, iy: number, width: number, height: number): boolean {
  return ix >= 0 && iy >= 0 && ix < width && iy < height;
}

/** Step the zoom level up or down, keeping the point under the cursor fixed. */
export function zoomAt(view: Viewport, step: number, sx: number, sy: number): Viewport {
  const index = ZOOM_LEVELS.indexOf(view.zoom as (typeof ZOOM_LEVELS)[number]);
  const clamped = Math.max(0, Math.min(ZOOM_LEVELS.length - 1, index + step));
  const zoom = ZOOM_LEVELS[clamped] ?? 1;
  if (zoom === view.zoom) {
    return view;
  }
  const fx = (sx - view.panX) / view.zoom;
  const fy = (sy - view.panY) / view.zoom;
  return { zoom, panX: Math.round(sx - fx * zoom), panY: Math.round(sy - fy * zoom) };
}

export function panBy(view: Viewport, dx: number, dy: number): Viewport {
  return { ...view, panX: view.panX + Math.round(dx), panY: view.panY + Math.round(dy) };
}

/** Center the image in the canvas at the largest integer zoom that fits (minimum 1). */
export function fitViewport(
  imageWidth: number,
  imageHeight: number,
  canvasWidth: number,
  canvasHeight: number,
): Viewport {
  let zoom = 1;
  for (const level of ZOOM_LEVELS) {
    if (imageWidth * level <= canvasWidth && imageHeight * level <= canvasHeight) {
      zoom = level;
    }
  }
  return {
    zoom,
    panX: Math.round((canvasWidth - imageWidth * zoom) / 2),
    panY: Math.round((canvasHeight - imageHeight * zoom) / 2),
  };
}
