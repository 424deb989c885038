/** Server payload shapes, mirrored field-for-field from the session HTTP API. */

export type Axis = "x" | "y" | "z";

export interface ChannelInfo {
  index: number;
  name: string;
  role: string;
}

export interface Experiment {
  dims: [number, number, number];
  spacing_um: [number, number, number];
  frame_interval_min: number;
  t_count: number;
  channels: ChannelInfo[];
  revision: number;
  track_count: number;
  tree_count: number;
}

export interface DetectionView {
  id: number;
  track_id: number | null;
  tree_id: number | null;
  centroid_um: number[];
  volume_um3: number;
  voxel_count: number;
  /** Ordered 2-D hull outline in micrometers, in the projection plane. */
  outline_um: [number, number][];
}

export interface FrameDetections {
  frame: number;
  axis: Axis;
  revision: number;
  detections: DetectionView[];
}

export interface TrackNode {
  id: number;
  parent: number | null;
  status: string;
  birth_frame: number;
  end_frame: number;
  detections: { frame: number; detection_id: number }[];
  /** [frame, distance µm] samples of the track's distance to the vessel. */
  vessel_series: [number, number][];
}

export interface CleavagePlaneInfo {
  parent: number;
  daughter_a: number;
  daughter_b: number;
  anchor_um: number[];
  normal: number[];
}

export interface TreePayload {
  root: number;
  members: number[];
  tracks: TrackNode[];
  cleavage_planes: CleavagePlaneInfo[];
  revision?: number;
}

export interface LineageOverview {
  revision: number;
  trees: { root: number; size: number }[];
  presented: TreePayload | null;
}

export interface Propagation {
  frame: number;
  detection_id: number;
  pieces: number[];
}

export interface EditRecord {
  revision: number;
  kind: string;
  frame: number;
  detection_id: number;
  n: number | null;
  track_id: number | null;
  pieces: number[];
  propagation: Propagation[];
}

export interface EditsList {
  revision: number;
  edits: EditRecord[];
}

export type EditKind = "split" | "delete" | "set_track";

export interface EditRequestBody {
  revision: number;
  kind: EditKind;
  detection_id: number;
  n?: number;
  track_id?: number;
}

/** Outcome of POST /api/edits, mapped from the HTTP status. */
export type EditOutcome =
  | { status: "ok"; revision: number; record: EditRecord }
  | { status: "stale"; expected: number; got: number }
  | { status: "invalid"; message: string }
  | { status: "error"; message: string };
