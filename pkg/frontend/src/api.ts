import type {
  Axis,
  EditOutcome,
  EditRecord,
  EditRequestBody,
  EditsList,
  Experiment,
  FrameDetections,
  LineageOverview,
  TreePayload,
} from "./types.js";

export interface ProjectionOptions {
  channel?: number;
  axis?: Axis;
  floor?: number;
  ceiling?: number | null;
  gamma?: number;
}

/**
 * Builds the projection URL for one frame, clamping the transfer parameters
 * so the server always receives a valid (floor < ceiling, gamma > 0) request.
 * A ceiling at or below the floor means "show nothing above the floor": it is
 * clamped to floor + 1, which renders everything at/below the floor black.
 */
export function projectionUrl(base: string, t: number, opts: ProjectionOptions = {}): string {
  const params = new URLSearchParams();
  if (opts.channel !== undefined) params.set("channel", String(opts.channel));
  if (opts.axis !== undefined) params.set("axis", opts.axis);
  const floor = opts.floor ?? 0;
  if (opts.floor !== undefined) params.set("floor", String(floor));
  if (opts.ceiling !== undefined && opts.ceiling !== null) {
    params.set("ceiling", String(opts.ceiling > floor ? opts.ceiling : floor + 1));
  }
  if (opts.gamma !== undefined) params.set("gamma", String(opts.gamma > 0 ? opts.gamma : 1));
  const query = params.toString();
  return `${base}/api/frames/${t}/projection${query ? `?${query}` : ""}`;
}

/** Thin typed client over the session HTTP API; all reads are plain GETs and
 * the only mutation is POST /api/edits. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const r = await fetch(this.base + path);
    if (!r.ok) throw new Error(`GET ${path} failed: ${r.status}`);
    return (await r.json()) as T;
  }

  getExperiment(): Promise<Experiment> {
    return this.getJson("/api/experiment");
  }

  getFrameDetections(t: number, axis: Axis = "z"): Promise<FrameDetections> {
    return this.getJson(`/api/frames/${t}/detections?axis=${axis}`);
  }

  getLineageOverview(): Promise<LineageOverview> {
    return this.getJson("/api/lineage/presented");
  }

  getLineageTree(root: number): Promise<TreePayload> {
    return this.getJson(`/api/lineage/${root}`);
  }

  getEdits(): Promise<EditsList> {
    return this.getJson("/api/edits");
  }

  projectionUrl(t: number, opts: ProjectionOptions = {}): string {
    return projectionUrl(this.base, t, opts);
  }

  async postEdit(body: EditRequestBody): Promise<EditOutcome> {
    let r: Response;
    try {
      r = await fetch(this.base + "/api/edits", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      return { status: "error", message: `edit request failed: ${String(err)}` };
    }
    if (r.ok) {
      const data = (await r.json()) as { revision: number; record: EditRecord };
      return { status: "ok", revision: data.revision, record: data.record };
    }
    if (r.status === 409) {
      const data = (await r.json()) as { detail: { expected: number; got: number } };
      return { status: "stale", expected: data.detail.expected, got: data.detail.got };
    }
    if (r.status === 422) {
      const data = await r.json().catch(() => ({ detail: "invalid edit" }));
      const detail = (data as { detail: unknown }).detail;
      return {
        status: "invalid",
        message: typeof detail === "string" ? detail : JSON.stringify(detail),
      };
    }
    return { status: "error", message: `POST /api/edits failed: ${r.status}` };
  }
}
