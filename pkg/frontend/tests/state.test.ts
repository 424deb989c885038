import { describe, expect, it } from "vitest";

import {
  clampFrame,
  initialViewState,
  selectDetection,
  selectTrack,
  setFrame,
  setRevision,
  setTransfer,
  stepFrame,
} from "../src/state.js";
import type { DetectionView, Experiment } from "../src/types.js";

const EXP: Experiment = {
  dims: [40, 32, 12],
  spacing_um: [0.8, 0.8, 1.0],
  frame_interval_min: 30,
  t_count: 5,
  channels: [
    { index: 0, name: "cells", role: "cell" },
    { index: 1, name: "vessels", role: "vessel" },
  ],
  revision: 7,
  track_count: 3,
  tree_count: 3,
};

const DET: DetectionView = {
  id: 11,
  track_id: 2,
  tree_id: 0,
  centroid_um: [1, 2, 3],
  volume_um3: 25,
  voxel_count: 31,
  outline_um: [],
};

describe("initialViewState", () => {
  it("starts at frame 0 with the server revision and per-channel defaults", () => {
    const s = initialViewState(EXP);
    expect(s.frame).toBe(0);
    expect(s.revision).toBe(7);
    expect(s.axis).toBe("z");
    expect(Object.keys(s.transfer)).toEqual(["0", "1"]);
    expect(s.transfer[0]).toEqual({ floor: 0, ceiling: null, gamma: 1, visible: true });
  });
});

describe("frame navigation", () => {
  it("clamps to the experiment range", () => {
    const s = initialViewState(EXP);
    expect(clampFrame(s, -3)).toBe(0);
    expect(clampFrame(s, 99)).toBe(4);
    expect(clampFrame(s, 2.4)).toBe(2);
  });

  it("stepFrame saturates at both ends", () => {
    let s = initialViewState(EXP);
    s = stepFrame(s, -1);
    expect(s.frame).toBe(0);
    s = setFrame(s, 4);
    s = stepFrame(s, 1);
    expect(s.frame).toBe(4);
    s = stepFrame(s, -1);
    expect(s.frame).toBe(3);
  });

  it("handles a single-frame experiment", () => {
    const s = initialViewState({ ...EXP, t_count: 1 });
    expect(clampFrame(s, 5)).toBe(0);
  });
});

describe("selection linkage", () => {
  it("selecting a detection selects its track and tree", () => {
    const s = selectDetection(initialViewState(EXP), DET);
    expect(s.selectedDetection).toBe(11);
    expect(s.selectedTrack).toBe(2);
    expect(s.selectedTree).toBe(0);
  });

  it("clearing the selection clears all three ids", () => {
    const s = selectDetection(selectDetection(initialViewState(EXP), DET), null);
    expect(s.selectedDetection).toBeNull();
    expect(s.selectedTrack).toBeNull();
    expect(s.selectedTree).toBeNull();
  });

  it("selecting a track directly drops any detection selection", () => {
    const s = selectTrack(selectDetection(initialViewState(EXP), DET), 4, 1);
    expect(s.selectedDetection).toBeNull();
    expect(s.selectedTrack).toBe(4);
    expect(s.selectedTree).toBe(1);
  });
});

describe("transfer settings", () => {
  it("patches one channel without touching the rest of the state", () => {
    const before = selectDetection(initialViewState(EXP), DET);
    const after = setTransfer(before, 1, { floor: 40, visible: false });
    expect(after.transfer[1]).toEqual({ floor: 40, ceiling: null, gamma: 1, visible: false });
    expect(after.transfer[0]).toEqual(before.transfer[0]);
    // pure view state: revision, frame, and selection are untouched,
    // so slider changes can never produce an edit
    expect(after.revision).toBe(before.revision);
    expect(after.frame).toBe(before.frame);
    expect(after.selectedDetection).toBe(before.selectedDetection);
  });

  it("does not mutate the previous state object", () => {
    const before = initialViewState(EXP);
    setTransfer(before, 0, { gamma: 2 });
    expect(before.transfer[0].gamma).toBe(1);
  });
});

describe("revision tracking", () => {
  it("setRevision replaces only the revision", () => {
    const s = setRevision(initialViewState(EXP), 12);
    expect(s.revision).toBe(12);
    expect(s.frame).toBe(0);
  });
});
