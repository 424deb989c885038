import type { TreePayload } from "./types.js";

export interface TreeLayoutOptions {
  width: number;
  height: number;
  tCount: number;
  /** Fraction of one column width the largest vessel distance maps to. */
  perturbFraction?: number;
  margin?: number;
}

export interface TrackPoint {
  frame: number;
  x: number;
  y: number;
}

export interface TrackPolyline {
  trackId: number;
  points: TrackPoint[];
}

export interface BranchSegment {
  parentId: number;
  childId: number;
  frame: number;
  x1: number;
  x2: number;
  y: number;
}

export interface CleavageGlyph {
  parent: number;
  daughterA: number;
  daughterB: number;
  frame: number;
  x: number;
  y: number;
}

export interface TreeLayout {
  tracks: TrackPolyline[];
  branches: BranchSegment[];
  glyphs: CleavageGlyph[];
  frameToY(t: number): number;
  yToFrame(y: number): number;
  /** x of a track's line at a frame, clamped to the track's lifespan. */
  xAt(trackId: number, frame: number): number | null;
}

/**
 * Lays out one lineage tree: each track is a (mostly) vertical line spanning
 * its lifetime, horizontally perturbed by its distance-to-vessel series so
 * vessel proximity is readable directly off the tree. Time runs downward;
 * daughters connect to their parent with a horizontal branch at the division
 * frame, and two-daughter divisions carry a cleavage glyph.
 */
export function layoutTree(tree: TreePayload, opts: TreeLayoutOptions): TreeLayout {
  const margin = opts.margin ?? 24;
  const perturbFraction = opts.perturbFraction ?? 0.4;
  const innerH = Math.max(1, opts.height - 2 * margin);
  const tStep = innerH / Math.max(1, opts.tCount - 1);

  const frameToY = (t: number) => margin + t * tStep;
  const yToFrame = (y: number) => {
    const t = Math.round((y - margin) / tStep);
    return Math.min(Math.max(0, opts.tCount - 1), Math.max(0, t));
  };

  const byId = new Map(tree.tracks.map((tr) => [tr.id, tr]));

  // Column order: depth-first from the root, children by ascending id, so
  // subtrees stay contiguous left to right.
  const children = new Map<number, number[]>();
  for (const tr of tree.tracks) {
    if (tr.parent !== null && byId.has(tr.parent)) {
      const list = children.get(tr.parent) ?? [];
      list.push(tr.id);
      children.set(tr.parent, list);
    }
  }
  for (const list of children.values()) list.sort((a, b) => a - b);
  const order: number[] = [];
  const visit = (id: number) => {
    order.push(id);
    for (const c of children.get(id) ?? []) visit(c);
  };
  if (byId.has(tree.root)) visit(tree.root);
  for (const tr of tree.tracks) if (!order.includes(tr.id)) visit(tr.id);

  const colWidth = (opts.width - 2 * margin) / Math.max(1, order.length);
  const baseX = new Map<number, number>();
  order.forEach((id, i) => baseX.set(id, margin + (i + 0.5) * colWidth));

  let maxDist = 0;
  for (const tr of tree.tracks) {
    for (const [, d] of tr.vessel_series) maxDist = Math.max(maxDist, d);
  }
  const perturbScale = maxDist > 0 ? (perturbFraction * colWidth) / maxDist : 0;

  const polylines: TrackPolyline[] = [];
  const polyById = new Map<number, TrackPolyline>();
  for (const id of order) {
    const tr = byId.get(id)!;
    const series = [...tr.vessel_series].sort((a, b) => a[0] - b[0]);
    const valueAt = (frame: number): number => {
      if (series.length === 0) return 0;
      let v = series[0][1];
      for (const [f, d] of series) {
        if (f > frame) break;
        v = d;
      }
      return v;
    };
    const points: TrackPoint[] = [];
    for (let f = tr.birth_frame; f <= tr.end_frame; f++) {
      points.push({
        frame: f,
        x: baseX.get(id)! + valueAt(f) * perturbScale,
        y: frameToY(f),
      });
    }
    if (points.length === 0) {
      points.push({ frame: tr.birth_frame, x: baseX.get(id)!, y: frameToY(tr.birth_frame) });
    }
    const poly = { trackId: id, points };
    polylines.push(poly);
    polyById.set(id, poly);
  }

  const xAt = (trackId: number, frame: number): number | null => {
    const poly = polyById.get(trackId);
    if (!poly) return null;
    const pts = poly.points;
    const clamped = Math.min(Math.max(frame, pts[0].frame), pts[pts.length - 1].frame);
    const found = pts.find((p) => p.frame === clamped);
    return found ? found.x : pts[0].x;
  };

  const branches: BranchSegment[] = [];
  for (const tr of tree.tracks) {
    if (tr.parent === null || !byId.has(tr.parent)) continue;
    const y = frameToY(tr.birth_frame);
    const x1 = xAt(tr.parent, tr.birth_frame);
    const x2 = xAt(tr.id, tr.birth_frame);
    if (x1 !== null && x2 !== null) {
      branches.push({ parentId: tr.parent, childId: tr.id, frame: tr.birth_frame, x1, x2, y });
    }
  }

  const glyphs: CleavageGlyph[] = [];
  for (const plane of tree.cleavage_planes) {
    const a = byId.get(plane.daughter_a);
    const b = byId.get(plane.daughter_b);
    if (!a || !b) continue;
    const frame = Math.min(a.birth_frame, b.birth_frame);
    const xa = xAt(a.id, frame);
    const xb = xAt(b.id, frame);
    if (xa === null || xb === null) continue;
    glyphs.push({
      parent: plane.parent,
      daughterA: a.id,
      daughterB: b.id,
      frame,
      x: (xa + xb) / 2,
      y: frameToY(frame),
    });
  }

  return { tracks: polylines, branches, glyphs, frameToY, yToFrame, xAt };
}

const SVG_NS = "http://www.w3.org/2000/svg";

export interface TreeRenderOptions {
  selectedTrack: number | null;
  cursorFrame: number;
  colorFor(trackId: number): string;
  onPickFrame(t: number): void;
  onPickTrack(trackId: number): void;
}

/** Draws the layout into an SVG element and wires navigation clicks:
 * clicking anywhere at height y jumps to that frame; clicking a track line
 * also selects the track. */
export function renderTree(svg: SVGSVGElement, layout: TreeLayout, opts: TreeRenderOptions): void {
  while (svg.firstChild) svg.removeChild(svg.firstChild);

  const el = <K extends keyof SVGElementTagNameMap>(
    tag: K,
    attrs: Record<string, string>,
  ): SVGElementTagNameMap[K] => {
    const node = document.createElementNS(SVG_NS, tag);
    for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
    return node;
  };

  for (const b of layout.branches) {
    svg.appendChild(
      el("line", {
        x1: String(b.x1),
        y1: String(b.y),
        x2: String(b.x2),
        y2: String(b.y),
        class: "branch",
      }),
    );
  }

  for (const poly of layout.tracks) {
    const pts = poly.points.map((p) => `${p.x},${p.y}`).join(" ");
    const line = el("polyline", {
      points: pts,
      class:
        poly.trackId === opts.selectedTrack ? "track-line selected" : "track-line",
      stroke: opts.colorFor(poly.trackId),
      fill: "none",
    });
    line.addEventListener("click", (e) => {
      e.stopPropagation();
      opts.onPickTrack(poly.trackId);
      opts.onPickFrame(layout.yToFrame((e as MouseEvent).offsetY));
    });
    svg.appendChild(line);
  }

  for (const g of layout.glyphs) {
    const glyph = el("path", {
      d: `M ${g.x - 5} ${g.y + 5} L ${g.x + 5} ${g.y - 5} M ${g.x - 5} ${g.y - 5} L ${g.x + 2} ${g.y + 2}`,
      class: "cleavage-glyph",
    });
    glyph.appendChild(
      Object.assign(document.createElementNS(SVG_NS, "title"), {
        textContent: `cleavage plane: tracks ${g.daughterA} & ${g.daughterB} from ${g.parent}`,
      }),
    );
    svg.appendChild(glyph);
  }

  const cursorY = layout.frameToY(opts.cursorFrame);
  svg.appendChild(
    el("line", {
      x1: "0",
      y1: String(cursorY),
      x2: svg.getAttribute("width") ?? "100%",
      y2: String(cursorY),
      class: "time-cursor",
    }),
  );

  svg.onclick = (e) => opts.onPickFrame(layout.yToFrame(e.offsetY));
}
