import type { EditOutcome, EditRecord, EditRequestBody, EditsList } from "./types.js";

/** One human-readable line describing an applied edit, including how far a
 * split auto-propagated. */
export function propagationReport(record: EditRecord): string {
  switch (record.kind) {
    case "split": {
      const n = record.propagation.length;
      const head = `Split detection ${record.detection_id} at frame ${record.frame} into ${record.pieces.length} pieces.`;
      if (n === 0) return `${head} No later frames needed correction.`;
      const frames = record.propagation.map((p) => p.frame).join(", ");
      return `${head} ${n} frame${n === 1 ? "" : "s"} auto-corrected (frames ${frames}).`;
    }
    case "delete":
      return `Deleted detection ${record.detection_id} at frame ${record.frame}.`;
    case "set_track":
      return `Assigned detection ${record.detection_id} at frame ${record.frame} to track ${record.track_id}.`;
    default:
      return `Applied ${record.kind} at frame ${record.frame}.`;
  }
}

export interface EditFlowResult {
  outcome: EditOutcome;
  message: string;
  /** Present after a stale-revision conflict: the revision to retry with. */
  retryRevision?: number;
}

interface EditApi {
  postEdit(body: EditRequestBody): Promise<EditOutcome>;
  getEdits(): Promise<EditsList>;
}

/**
 * Submits edits with the currently held revision. A 409 conflict never
 * retries silently: the session is refetched, and the caller is told which
 * revision to review and resubmit at.
 */
export class EditController {
  constructor(private readonly api: EditApi) {}

  async submit(body: EditRequestBody): Promise<EditFlowResult> {
    const outcome = await this.api.postEdit(body);
    switch (outcome.status) {
      case "ok":
        return { outcome, message: propagationReport(outcome.record) };
      case "stale": {
        const fresh = await this.api.getEdits();
        return {
          outcome,
          retryRevision: fresh.revision,
          message:
            `Another edit landed first (you held revision ${outcome.got}, ` +
            `server is at ${outcome.expected}). State refreshed — review and ` +
            `retry at revision ${fresh.revision}.`,
        };
      }
      case "invalid":
        return { outcome, message: `Edit rejected: ${outcome.message}` };
      case "error":
        return { outcome, message: outcome.message };
    }
  }
}
