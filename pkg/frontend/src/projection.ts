import type { Axis, DetectionView } from "./types.js";

/** Six assignable overlay colors; tracks cycle through them by id. */
export const TRACK_COLORS = [
  "#e6194b",
  "#3cb44b",
  "#ffe119",
  "#4363d8",
  "#f58231",
  "#911eb4",
] as const;

export const UNTRACKED_COLOR = "#9e9e9e";

export function colorForTrack(trackId: number | null): string {
  if (trackId === null) return UNTRACKED_COLOR;
  const i = ((trackId % TRACK_COLORS.length) + TRACK_COLORS.length) % TRACK_COLORS.length;
  return TRACK_COLORS[i];
}

/** Volume-grid axes kept by each projection, matching the server:
 * projecting along x keeps (y, z), along y keeps (x, z), along z keeps (x, y). */
export function axisColumns(axis: Axis): [number, number] {
  switch (axis) {
    case "x":
      return [1, 2];
    case "y":
      return [0, 2];
    case "z":
      return [0, 1];
  }
}

export function polygonArea(poly: [number, number][]): number {
  let twice = 0;
  for (let i = 0; i < poly.length; i++) {
    const [x1, y1] = poly[i];
    const [x2, y2] = poly[(i + 1) % poly.length];
    twice += x1 * y2 - x2 * y1;
  }
  return Math.abs(twice) / 2;
}

export function pointInPolygon(pt: [number, number], poly: [number, number][]): boolean {
  if (poly.length < 3) return false;
  const [px, py] = pt;
  let inside = false;
  for (let i = 0, j = poly.length - 1; i < poly.length; j = i++) {
    const [xi, yi] = poly[i];
    const [xj, yj] = poly[j];
    const crosses = yi > py !== yj > py && px < ((xj - xi) * (py - yi)) / (yj - yi) + xi;
    if (crosses) inside = !inside;
  }
  return inside;
}

/**
 * 2-D hit test over projected hull outlines: of the outlines containing the
 * point, the topmost wins, which for stacked projections is the one with the
 * smallest area (ties to the lowest detection id, for determinism).
 */
export function hitTest(dets: DetectionView[], pt: [number, number]): DetectionView | null {
  let best: DetectionView | null = null;
  let bestArea = Infinity;
  for (const det of dets) {
    if (!pointInPolygon(pt, det.outline_um)) continue;
    const area = polygonArea(det.outline_um);
    if (area < bestArea || (area === bestArea && best !== null && det.id < best.id)) {
      best = det;
      bestArea = area;
    }
  }
  return best;
}

/** Wheel-to-frame step: scrolling down advances one frame, up goes back one. */
export function wheelStep(deltaY: number): number {
  return Math.sign(deltaY);
}

export interface OverlayOptions {
  spacing: [number, number, number];
  axis: Axis;
  /** Canvas pixels per image pixel (image pixels are voxels). */
  scale: number;
  selectedDetection: number | null;
  selectedTrack: number | null;
}

/** µm in the projection plane → canvas pixels. */
export function toCanvas(
  ptUm: [number, number],
  opts: Pick<OverlayOptions, "spacing" | "axis" | "scale">,
): [number, number] {
  const [c0, c1] = axisColumns(opts.axis);
  return [
    (ptUm[0] / opts.spacing[c0]) * opts.scale,
    (ptUm[1] / opts.spacing[c1]) * opts.scale,
  ];
}

/** Canvas pixels → µm in the projection plane (inverse of toCanvas). */
export function fromCanvas(
  ptPx: [number, number],
  opts: Pick<OverlayOptions, "spacing" | "axis" | "scale">,
): [number, number] {
  const [c0, c1] = axisColumns(opts.axis);
  return [
    (ptPx[0] / opts.scale) * opts.spacing[c0],
    (ptPx[1] / opts.scale) * opts.spacing[c1],
  ];
}

/** Draws detection outlines colored by track; the selection is emphasized. */
export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  dets: DetectionView[],
  opts: OverlayOptions,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const det of dets) {
    const outline = det.outline_um.map((p) => toCanvas(p, opts));
    if (outline.length === 0) continue;
    const selected =
      det.id === opts.selectedDetection || (det.track_id !== null && det.track_id === opts.selectedTrack);
    ctx.beginPath();
    ctx.moveTo(outline[0][0], outline[0][1]);
    for (const [x, y] of outline.slice(1)) ctx.lineTo(x, y);
    ctx.closePath();
    ctx.strokeStyle = colorForTrack(det.track_id);
    ctx.lineWidth = selected ? 3 : 1.5;
    ctx.globalAlpha = selected ? 1 : 0.8;
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}
