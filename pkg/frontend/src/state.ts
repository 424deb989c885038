import type { Axis, DetectionView, Experiment } from "./types.js";

/** Per-channel display settings; purely view-side and never sent as an edit. */
export interface TransferView {
  floor: number;
  /** null = let the server pick the frame's own maximum. */
  ceiling: number | null;
  gamma: number;
  visible: boolean;
}

export interface ViewState {
  frame: number;
  tCount: number;
  axis: Axis;
  selectedDetection: number | null;
  selectedTrack: number | null;
  selectedTree: number | null;
  transfer: Record<number, TransferView>;
  /** Last revision observed from the server; sent with every edit. */
  revision: number;
}

export function initialViewState(exp: Experiment): ViewState {
  const transfer: Record<number, TransferView> = {};
  for (const ch of exp.channels) {
    transfer[ch.index] = { floor: 0, ceiling: null, gamma: 1, visible: true };
  }
  return {
    frame: 0,
    tCount: exp.t_count,
    axis: "z",
    selectedDetection: null,
    selectedTrack: null,
    selectedTree: null,
    transfer,
    revision: exp.revision,
  };
}

export function clampFrame(state: ViewState, t: number): number {
  const last = Math.max(0, state.tCount - 1);
  return Math.min(last, Math.max(0, Math.round(t)));
}

export function setFrame(state: ViewState, t: number): ViewState {
  return { ...state, frame: clampFrame(state, t) };
}

export function stepFrame(state: ViewState, delta: number): ViewState {
  return setFrame(state, state.frame + delta);
}

/** Selecting a detection selects its track and tree too; null clears all. */
export function selectDetection(state: ViewState, det: DetectionView | null): ViewState {
  if (det === null) {
    return { ...state, selectedDetection: null, selectedTrack: null, selectedTree: null };
  }
  return {
    ...state,
    selectedDetection: det.id,
    selectedTrack: det.track_id,
    selectedTree: det.tree_id,
  };
}

export function selectTrack(state: ViewState, trackId: number | null, treeId: number | null): ViewState {
  return { ...state, selectedDetection: null, selectedTrack: trackId, selectedTree: treeId };
}

export function setTransfer(
  state: ViewState,
  channel: number,
  patch: Partial<TransferView>,
): ViewState {
  const current = state.transfer[channel] ?? { floor: 0, ceiling: null, gamma: 1, visible: true };
  return {
    ...state,
    transfer: { ...state.transfer, [channel]: { ...current, ...patch } },
  };
}

export function setRevision(state: ViewState, revision: number): ViewState {
  return { ...state, revision };
}
