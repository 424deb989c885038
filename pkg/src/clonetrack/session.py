"""Interactive correction sessions over a processed experiment.

A session holds the full analysis state — per-frame detections, tracks,
lineage, vessel distances — plus an append-only edit log and a revision
counter for optimistic concurrency. Edits (split a detection, delete one,
or pin a detection to a track) re-run tracking from the edited frame
forward, leaving every earlier frame untouched, and splits propagate
downstream: while a track created by the split cannot find a match and
the original track's old assignment chain continues, the chain's next
detection is auto-split the same way. Results export to a directory of
canonically serialized JSON files and projection images whose bytes are
a pure function of the raw inputs, the configuration, and the edit log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .denoise import CellDenoiseParams, denoise_cell_channel, mrf_denoise
from .errors import EditError, ManifestError, ParameterError, StaleRevisionError
from .imaging import (
    ExperimentManifest,
    TransferFunction,
    VoxelSpacing,
    apply_transfer,
    load_frame,
    load_manifest,
    max_intensity_projection,
    physical_coordinates,
)
from .lineage import (
    LineageConfig,
    LineageForest,
    build_lineages,
    cleavage_plane,
    vessel_distance_series,
)
from .segment import (
    Detection,
    DistanceMap,
    SegmentationConfig,
    compute_hull,
    decode_voxel_runs,
    encode_voxel_runs,
    segment_cell_channel,
    segment_vessel_channel,
)
from .track import (
    CostEdge,
    CostGraph,
    DistanceCache,
    Track,
    TrackingConfig,
    run_transitions,
    track_sequence,
)

_KMEANS_MAX_ITERS = 100


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the end-to-end pipeline, in one serializable bundle."""

    cell_sigma_um: float = 10.0
    median_radius: int = 1
    min_volume_um3: float = 19.0
    closing_radius: int = 1
    mrf_max_iters: int = 1000
    window: int = 4
    weights: tuple[float, ...] = (1.0, 3.0, 1.0, 1.0, 1.0)
    occlusion_patience: int | None = None
    spatial_gate_um: float = 50.0
    sample_min_over_voxels: bool = False
    session_seed: int = 0

    def __post_init__(self):
        if self.session_seed < 0:
            raise ParameterError(f"session seed must be >= 0, got {self.session_seed}")
        # Child configs validate their own fields eagerly.
        self.cell_denoise_params()
        self.segmentation_config()
        self.lineage_config()

    def cell_denoise_params(self) -> CellDenoiseParams:
        return CellDenoiseParams(
            gaussian_sigma_um=self.cell_sigma_um, median_radius=self.median_radius
        )

    def segmentation_config(self) -> SegmentationConfig:
        return SegmentationConfig(
            min_volume_um3=self.min_volume_um3, closing_radius=self.closing_radius
        )

    def tracking_config(self) -> TrackingConfig:
        return TrackingConfig(
            window=self.window,
            weights=self.weights,
            occlusion_patience=self.occlusion_patience,
        )

    def lineage_config(self) -> LineageConfig:
        return LineageConfig(
            tracking=self.tracking_config(),
            spatial_gate_um=self.spatial_gate_um,
            sample_min_over_voxels=self.sample_min_over_voxels,
        )

    def to_dict(self) -> dict:
        return {
            "cell_sigma_um": float(self.cell_sigma_um),
            "median_radius": int(self.median_radius),
            "min_volume_um3": float(self.min_volume_um3),
            "closing_radius": int(self.closing_radius),
            "mrf_max_iters": int(self.mrf_max_iters),
            "window": int(self.window),
            "weights": [float(w) for w in self.weights],
            "occlusion_patience": (
                None if self.occlusion_patience is None else int(self.occlusion_patience)
            ),
            "spatial_gate_um": float(self.spatial_gate_um),
            "sample_min_over_voxels": bool(self.sample_min_over_voxels),
            "session_seed": int(self.session_seed),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return cls(
            cell_sigma_um=float(data["cell_sigma_um"]),
            median_radius=int(data["median_radius"]),
            min_volume_um3=float(data["min_volume_um3"]),
            closing_radius=int(data["closing_radius"]),
            mrf_max_iters=int(data["mrf_max_iters"]),
            window=int(data["window"]),
            weights=tuple(float(w) for w in data["weights"]),
            occlusion_patience=data["occlusion_patience"],
            spatial_gate_um=float(data["spatial_gate_um"]),
            sample_min_over_voxels=bool(data["sample_min_over_voxels"]),
            session_seed=int(data["session_seed"]),
        )


@dataclass(frozen=True)
class EditRequest:
    """One client-issued correction, tagged with the revision it was built against."""

    revision: int
    kind: str  # "split" | "delete" | "set_track"
    detection_id: int
    n: int | None = None
    track_id: int | None = None


@dataclass(frozen=True)
class Propagation:
    """One downstream detection auto-split while a user split was propagated."""

    frame: int
    detection_id: int
    pieces: tuple[int, ...]


@dataclass
class EditRecord:
    """Logged outcome of one applied edit; the log fully reproduces the session."""

    revision: int
    kind: str
    frame: int
    detection_id: int
    n: int | None = None
    track_id: int | None = None
    pieces: list[int] = field(default_factory=list)
    propagation: list[Propagation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "revision": int(self.revision),
            "kind": self.kind,
            "frame": int(self.frame),
            "detection_id": int(self.detection_id),
            "n": None if self.n is None else int(self.n),
            "track_id": None if self.track_id is None else int(self.track_id),
            "pieces": [int(p) for p in self.pieces],
            "propagation": [
                {
                    "frame": int(p.frame),
                    "detection_id": int(p.detection_id),
                    "pieces": [int(x) for x in p.pieces],
                }
                for p in self.propagation
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EditRecord":
        return cls(
            revision=int(data["revision"]),
            kind=str(data["kind"]),
            frame=int(data["frame"]),
            detection_id=int(data["detection_id"]),
            n=None if data.get("n") is None else int(data["n"]),
            track_id=None if data.get("track_id") is None else int(data["track_id"]),
            pieces=[int(p) for p in data.get("pieces", [])],
            propagation=[
                Propagation(
                    frame=int(p["frame"]),
                    detection_id=int(p["detection_id"]),
                    pieces=tuple(int(x) for x in p["pieces"]),
                )
                for p in data.get("propagation", [])
            ],
        )


@dataclass
class SessionState:
    """Complete mutable state of one correction session."""

    manifest: ExperimentManifest
    manifest_path: Path
    config: PipelineConfig
    detections_by_frame: list[list[Detection]]
    tracks: list[Track]
    cost_graph: CostGraph
    forest: LineageForest
    vessel_series: dict[int, list[tuple[int, float]]]
    cleavage_planes: list[dict]
    edit_log: list[EditRecord] = field(default_factory=list)
    revision: int = 0
    pins: dict[tuple[int, int], int] = field(default_factory=dict)
    next_detection_id: int = 0
    next_track_id: int = 0
    distance_maps: dict[int, DistanceMap] | None = None
    cache: DistanceCache = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.cache is None:
            self.cache = DistanceCache(self.manifest.spacing)

    def find_detection(self, detection_id: int) -> tuple[int, int, Detection] | None:
        """Locate a detection by id; returns (frame, index in frame list, detection)."""
        for frame, dets in enumerate(self.detections_by_frame):
            for idx, det in enumerate(dets):
                if det.id == detection_id:
                    return frame, idx, det
        return None

    def track_of(self, detection: Detection) -> Track | None:
        for tr in self.tracks:
            for det in tr.detections:
                if det.id == detection.id:
                    return tr
        return None

    def track_by_id(self, track_id: int) -> Track | None:
        for tr in self.tracks:
            if tr.id == track_id:
                return tr
        return None


def process_experiment(
    manifest: ExperimentManifest | str | Path,
    config: PipelineConfig | None = None,
) -> SessionState:
    """Run the full pipeline on an experiment and open a session at revision 0.

    Per frame: denoise and segment the cell channel into detections, and —
    when a vessel channel is declared — denoise and segment it into a
    distance map. Then associate detections into tracks, build lineages,
    and sample vessel distances along every track.
    """
    if isinstance(manifest, (str, Path)):
        manifest_path = Path(manifest).resolve()
        manifest = load_manifest(manifest_path)
    else:
        manifest_path = (manifest.base_dir / "manifest.json").resolve()
    config = config or PipelineConfig()

    cell = manifest.channel_by_role("cell")
    if cell is None:
        raise ManifestError("experiment has no channel with role 'cell'")
    vessel = manifest.channel_by_role("vessel")

    denoise_params = config.cell_denoise_params()
    seg_config = config.segmentation_config()
    detections_by_frame: list[list[Detection]] = []
    maps: dict[int, DistanceMap] = {}
    det_counter = 0
    for t in range(manifest.t_count):
        grid = load_frame(manifest, t, cell.index)
        den = denoise_cell_channel(grid, denoise_params)
        dets = segment_cell_channel(den, seg_config, frame=t, id_start=det_counter)
        det_counter += len(dets)
        detections_by_frame.append(dets)
        if vessel is not None:
            vgrid = load_frame(manifest, t, vessel.index)
            vden = mrf_denoise(vgrid, max_iters=config.mrf_max_iters)
            _, dmap = segment_vessel_channel(vden, seg_config)
            maps[t] = dmap

    tracks, graph = track_sequence(detections_by_frame, manifest.spacing, config.tracking_config())
    state = SessionState(
        manifest=manifest,
        manifest_path=manifest_path,
        config=config,
        detections_by_frame=detections_by_frame,
        tracks=tracks,
        cost_graph=graph,
        forest=LineageForest(nodes=[], parent={}, trees={}, presented_tree=None),
        vessel_series={},
        cleavage_planes=[],
        next_detection_id=det_counter,
        next_track_id=(max((tr.id for tr in tracks), default=-1) + 1),
        distance_maps=maps,
    )
    _rebuild_lineage(state)
    return state


def ensure_distance_maps(state: SessionState) -> dict[int, DistanceMap]:
    """Vessel distance maps per frame, recomputed from raw images if absent."""
    if state.distance_maps is None:
        vessel = state.manifest.channel_by_role("vessel")
        maps: dict[int, DistanceMap] = {}
        if vessel is not None:
            seg_config = state.config.segmentation_config()
            for t in range(state.manifest.t_count):
                vgrid = load_frame(state.manifest, t, vessel.index)
                vden = mrf_denoise(vgrid, max_iters=state.config.mrf_max_iters)
                _, dmap = segment_vessel_channel(vden, seg_config)
                maps[t] = dmap
        state.distance_maps = maps
    return state.distance_maps


def _rebuild_lineage(state: SessionState) -> None:
    """Recompute the forest, vessel series, and cleavage planes from tracks."""
    lin_config = state.config.lineage_config()
    state.forest = build_lineages(
        state.tracks, state.cost_graph, state.manifest.spacing, lin_config
    )
    maps = ensure_distance_maps(state)
    state.vessel_series = {}
    if maps:
        for tr in sorted(state.tracks, key=lambda t: t.id):
            series = vessel_distance_series(tr, maps, lin_config)
            state.vessel_series[tr.id] = [(int(f), float(v)) for f, v in series.samples]

    planes: list[dict] = []
    track_by_id = {tr.id: tr for tr in state.tracks}
    for parent_id in state.forest.nodes:
        children = state.forest.children(parent_id)
        if not children:
            continue
        by_birth: dict[int, list[int]] = {}
        for child in children:
            by_birth.setdefault(track_by_id[child].birth_frame, []).append(child)
        for birth in sorted(by_birth):
            pair = by_birth[birth]
            if len(pair) != 2:
                continue  # a division yields two daughters; other counts have no plane
            a, b = sorted(pair)
            plane = cleavage_plane(track_by_id[parent_id], track_by_id[a], track_by_id[b])
            planes.append(
                {
                    "parent": int(parent_id),
                    "daughter_a": int(a),
                    "daughter_b": int(b),
                    "anchor_um": [float(x) for x in plane.anchor_um],
                    "normal": [float(x) for x in plane.normal],
                }
            )
    state.cleavage_planes = planes


def _kmeans_pp_init(points: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Spread n initial centers over the points, each drawn with probability
    proportional to its squared distance from the centers chosen so far."""
    centers = np.empty((n, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(points.shape[0]))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for k in range(1, n):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(points.shape[0], p=d2 / total))
        else:
            idx = int(rng.integers(points.shape[0]))
        centers[k] = points[idx]
        d2 = np.minimum(d2, ((points - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd_assign(points: np.ndarray, centers: np.ndarray, n: int) -> np.ndarray:
    """Lloyd iterations to a fixed point or the iteration cap, ties to the
    lowest cluster index; an emptied cluster is reseeded with the point
    currently farthest from its own center."""
    assign: np.ndarray | None = None
    for _ in range(_KMEANS_MAX_ITERS):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for k in range(n):
            if not np.any(new_assign == k):
                own = d2[np.arange(points.shape[0]), new_assign]
                new_assign[int(own.argmax())] = k
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        centers = np.stack([points[assign == k].mean(axis=0) for k in range(n)])
    return assign


def split_detection(
    detection: Detection,
    n: int,
    spacing: VoxelSpacing,
    seed: int = 0,
    id_start: int = 0,
) -> list[Detection]:
    """Partition one detection into n spatially coherent pieces.

    Voxels are clustered by k-means over their physical coordinates; the
    random stream is seeded by (seed, detection id, n) so the same request
    always yields the same pieces. Pieces are ordered largest first (ties
    by lowest voxel index) and get consecutive ids starting at id_start.
    """
    if n < 2:
        raise ParameterError(f"split needs n >= 2, got {n}")
    if n > detection.voxel_count:
        raise ParameterError(
            f"cannot split {detection.voxel_count} voxels into {n} pieces"
        )
    points = physical_coordinates(detection.voxels, spacing)
    rng = np.random.default_rng([seed, detection.id, n])
    centers = _kmeans_pp_init(points, n, rng)
    assign = _lloyd_assign(points, centers, n)

    clusters = [detection.voxels[assign == k] for k in range(n)]
    clusters.sort(key=lambda v: (-v.shape[0], min(map(tuple, v))))
    voxel_volume = spacing.voxel_volume_um3
    pieces = []
    for offset, vox in enumerate(clusters):
        vox = np.ascontiguousarray(vox)
        pieces.append(
            Detection(
                id=id_start + offset,
                frame=detection.frame,
                voxels=vox,
                centroid_um=physical_coordinates(vox, spacing).mean(axis=0),
                volume_um3=vox.shape[0] * voxel_volume,
                hull=compute_hull(vox, spacing),
            )
        )
    return pieces


def _retrack_from(state: SessionState, start: int) -> None:
    """Re-run tracking from frame ``start`` onward, freezing earlier frames.

    Tracks are trimmed to their detections before ``start`` (those born at
    or after it are dropped; their ids are never reused), transition edges
    at and beyond the boundary are discarded, and the transition engine
    resumes with the session's pinned assignments in force.
    """
    config = state.config.tracking_config()
    if start == 0:
        state.tracks = []
        state.cost_graph.transitions.clear()
        for det in state.detections_by_frame[0]:
            state.tracks.append(Track(id=state.next_track_id, detections=[det]))
            state.next_track_id += 1
        first = 1
    else:
        kept = []
        for tr in state.tracks:
            tr.detections = [d for d in tr.detections if d.frame < start]
            if tr.detections:
                tr.status = "active"
                kept.append(tr)
        state.tracks = kept
        for key in [k for k in state.cost_graph.transitions if k >= start - 1]:
            del state.cost_graph.transitions[key]
        first = start

    state.next_track_id = run_transitions(
        state.tracks,
        state.detections_by_frame,
        state.manifest.spacing,
        config,
        graph=state.cost_graph,
        cache=state.cache,
        start_frame=first,
        next_id=state.next_track_id,
        pins=state.pins,
    )


def _splice_split(state: SessionState, frame: int, index: int, detection: Detection, n: int) -> list[Detection]:
    """Replace one detection in its frame list with its k-means pieces."""
    pieces = split_detection(
        detection,
        n,
        state.manifest.spacing,
        seed=state.config.session_seed,
        id_start=state.next_detection_id,
    )
    state.next_detection_id += n
    state.detections_by_frame[frame][index : index + 1] = pieces
    return pieces


def _apply_split(state: SessionState, frame: int, index: int, detection: Detection, request: EditRequest) -> EditRecord:
    if request.n is None:
        raise EditError("split edit needs the number of pieces n")
    old_track = state.track_of(detection)
    chain: dict[int, Detection] = {}
    if old_track is not None:
        chain = {d.frame: d for d in old_track.detections if d.frame > frame}

    pieces = _splice_split(state, frame, index, detection, request.n)
    _retrack_from(state, frame)

    watched_ids: list[int] = []
    for piece in pieces:
        tr = state.track_of(piece)
        if tr is not None and tr.id not in watched_ids:
            watched_ids.append(tr.id)

    propagation: list[Propagation] = []
    for s in sorted(chain):
        by_id = {tr.id: tr for tr in state.tracks}
        watched = [by_id[w] for w in watched_ids if w in by_id]
        missing = [
            w for w in watched if w.status == "active" and w.detection_at(s) is None
        ]
        if not missing:
            continue
        target = chain[s]
        position = next(
            (i for i, d in enumerate(state.detections_by_frame[s]) if d.id == target.id),
            None,
        )
        if position is None:  # chain detection no longer present; stop here
            break
        auto = _splice_split(state, s, position, target, request.n)
        _retrack_from(state, s)
        propagation.append(
            Propagation(frame=s, detection_id=target.id, pieces=tuple(p.id for p in auto))
        )

    return EditRecord(
        revision=0,
        kind="split",
        frame=frame,
        detection_id=detection.id,
        n=request.n,
        pieces=[p.id for p in pieces],
        propagation=propagation,
    )


def _apply_delete(state: SessionState, frame: int, index: int, detection: Detection) -> EditRecord:
    state.detections_by_frame[frame].pop(index)
    _retrack_from(state, frame)
    return EditRecord(revision=0, kind="delete", frame=frame, detection_id=detection.id)


def _apply_set_track(state: SessionState, frame: int, detection: Detection, request: EditRequest) -> EditRecord:
    if request.track_id is None:
        raise EditError("set_track edit needs a track id")
    if frame == 0:
        raise EditError("first-frame detections seed their own tracks and cannot be pinned")
    target = state.track_by_id(request.track_id)
    if target is None:
        raise EditError(f"no track with id {request.track_id}")
    if not any(d.frame < frame for d in target.detections):
        raise EditError(
            f"track {request.track_id} has no detections before frame {frame} to extend from"
        )
    state.pins[(frame, detection.id)] = request.track_id
    _retrack_from(state, frame)
    return EditRecord(
        revision=0,
        kind="set_track",
        frame=frame,
        detection_id=detection.id,
        track_id=request.track_id,
    )


def apply_edit_and_propagate(state: SessionState, request: EditRequest) -> EditRecord:
    """Validate and apply one edit, propagate its consequences, and log it.

    Raises StaleRevisionError when the request was built against an old
    revision, and EditError when its target does not exist. On success the
    revision increments and the returned record carries the new value.
    """
    if request.revision != state.revision:
        raise StaleRevisionError(state.revision, request.revision)
    found = state.find_detection(request.detection_id)
    if found is None:
        raise EditError(f"no detection with id {request.detection_id}")
    frame, index, detection = found

    if request.kind == "split":
        record = _apply_split(state, frame, index, detection, request)
    elif request.kind == "delete":
        record = _apply_delete(state, frame, index, detection)
    elif request.kind == "set_track":
        record = _apply_set_track(state, frame, detection, request)
    else:
        raise EditError(f"unknown edit kind {request.kind!r}")

    _rebuild_lineage(state)
    state.revision += 1
    record.revision = state.revision
    state.edit_log.append(record)
    return record


def replay_session(
    manifest: ExperimentManifest | str | Path,
    config: PipelineConfig,
    edits: list[EditRecord] | list[dict],
) -> SessionState:
    """Rebuild a session from raw inputs by re-applying a logged edit sequence."""
    state = process_experiment(manifest, config)
    for entry in edits:
        record = entry if isinstance(entry, EditRecord) else EditRecord.from_dict(entry)
        apply_edit_and_propagate(
            state,
            EditRequest(
                revision=state.revision,
                kind=record.kind,
                detection_id=record.detection_id,
                n=record.n,
                track_id=record.track_id,
            ),
        )
    return state


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_json(path: Path, obj) -> None:
    path.write_text(_canonical_json(obj))


def _detection_to_dict(det: Detection) -> dict:
    hull = None
    if det.hull is not None:
        hull = {
            "vertices_um": [[float(x) for x in row] for row in det.hull.vertices_um],
            "facets": [[int(x) for x in row] for row in det.hull.facets],
            "flat": bool(det.hull.flat),
        }
    return {
        "id": int(det.id),
        "frame": int(det.frame),
        "runs": [[int(x) for x in run] for run in encode_voxel_runs(det.voxels)],
        "centroid_um": [float(x) for x in det.centroid_um],
        "volume_um3": float(det.volume_um3),
        "hull": hull,
    }


def _detection_from_dict(data: dict, spacing: VoxelSpacing) -> Detection:
    voxels = decode_voxel_runs(data["runs"])
    return Detection(
        id=int(data["id"]),
        frame=int(data["frame"]),
        voxels=voxels,
        centroid_um=np.array(data["centroid_um"], dtype=np.float64),
        volume_um3=float(data["volume_um3"]),
        hull=compute_hull(voxels, spacing),
    )


def export_results(state: SessionState, out_dir: str | Path, projections: bool = True) -> Path:
    """Write the session to a results directory with reproducible bytes.

    JSON files are serialized canonically (sorted keys, fixed indentation)
    and projections are rendered with a transfer function derived only from
    the data, so two exports of equal states are byte-identical. Projection
    images depend only on the raw frames; pass ``projections=False`` to skip
    re-rendering them when persisting after an edit.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    _write_json(
        out / "detections.json",
        {
            "frames": [
                [_detection_to_dict(d) for d in dets] for dets in state.detections_by_frame
            ]
        },
    )
    _write_json(
        out / "tracks.json",
        {
            "tracks": [
                {
                    "id": int(tr.id),
                    "status": tr.status,
                    "detections": [
                        {"frame": int(d.frame), "detection_id": int(d.id)}
                        for d in tr.detections
                    ],
                }
                for tr in state.tracks
            ]
        },
    )
    _write_json(
        out / "cost_graph.json",
        {
            "transitions": {
                str(t): [
                    {
                        "track_id": int(e.track_id),
                        "detection_id": int(e.detection_id),
                        "cost": float(e.cost),
                        "matching": bool(e.matching),
                    }
                    for e in state.cost_graph.transitions[t]
                ]
                for t in sorted(state.cost_graph.transitions)
            }
        },
    )
    _write_json(
        out / "lineage.json",
        {
            "nodes": [int(n) for n in state.forest.nodes],
            "parent": {
                str(n): (None if p is None else int(p))
                for n, p in sorted(state.forest.parent.items())
            },
            "trees": [
                {"root": int(root), "members": [int(m) for m in state.forest.trees[root]]}
                for root in sorted(state.forest.trees)
            ],
            "presented_tree": (
                None if state.forest.presented_tree is None else int(state.forest.presented_tree)
            ),
            "vessel_series": {
                str(tid): [[int(f), float(v)] for f, v in samples]
                for tid, samples in sorted(state.vessel_series.items())
            },
            "cleavage_planes": state.cleavage_planes,
        },
    )
    (out / "edits.jsonl").write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in state.edit_log)
    )
    _write_json(
        out / "session.json",
        {
            "revision": int(state.revision),
            "pins": [
                [int(f), int(d), int(tid)] for (f, d), tid in sorted(state.pins.items())
            ],
            "next_detection_id": int(state.next_detection_id),
            "next_track_id": int(state.next_track_id),
            "config": state.config.to_dict(),
            "manifest_path": str(state.manifest_path),
        },
    )

    if not projections:
        return out
    proj_dir = out / "projections"
    proj_dir.mkdir(exist_ok=True)
    for ch in state.manifest.channels:
        ceiling = 1.0
        for t in range(state.manifest.t_count):
            grid = load_frame(state.manifest, t, ch.index)
            ceiling = max(ceiling, float(grid.values.max()))
        tf = TransferFunction(floor=0.0, ceiling=ceiling, gamma=1.0)
        for t in range(state.manifest.t_count):
            grid = load_frame(state.manifest, t, ch.index)
            proj = apply_transfer(max_intensity_projection(grid, "z"), tf)
            # Image rows are y, columns are x.
            Image.fromarray(proj.T).save(proj_dir / f"t{t:03d}_c{ch.index}.png")
    return out


def import_results(results_dir: str | Path) -> SessionState:
    """Reconstruct a live session from an exported results directory.

    Detection hulls are recomputed from the stored voxel runs; vessel
    distance maps are rebuilt lazily from the raw images on first need.
    """
    results = Path(results_dir)
    session_info = json.loads((results / "session.json").read_text())
    config = PipelineConfig.from_dict(session_info["config"])
    manifest_path = Path(session_info["manifest_path"])
    manifest = load_manifest(manifest_path)

    det_data = json.loads((results / "detections.json").read_text())
    detections_by_frame = [
        [_detection_from_dict(d, manifest.spacing) for d in dets]
        for dets in det_data["frames"]
    ]
    by_id = {d.id: d for dets in detections_by_frame for d in dets}

    track_data = json.loads((results / "tracks.json").read_text())
    tracks = [
        Track(
            id=int(t["id"]),
            detections=[by_id[int(d["detection_id"])] for d in t["detections"]],
            status=str(t["status"]),
        )
        for t in track_data["tracks"]
    ]

    graph_data = json.loads((results / "cost_graph.json").read_text())
    graph = CostGraph(
        transitions={
            int(t): [
                CostEdge(
                    track_id=int(e["track_id"]),
                    detection_id=int(e["detection_id"]),
                    cost=float(e["cost"]),
                    matching=bool(e["matching"]),
                )
                for e in edges
            ]
            for t, edges in graph_data["transitions"].items()
        }
    )

    lin = json.loads((results / "lineage.json").read_text())
    forest = LineageForest(
        nodes=[int(n) for n in lin["nodes"]],
        parent={int(n): (None if p is None else int(p)) for n, p in lin["parent"].items()},
        trees={int(t["root"]): [int(m) for m in t["members"]] for t in lin["trees"]},
        presented_tree=(
            None if lin["presented_tree"] is None else int(lin["presented_tree"])
        ),
    )
    vessel_series = {
        int(tid): [(int(f), float(v)) for f, v in samples]
        for tid, samples in lin["vessel_series"].items()
    }

    edit_log = [
        EditRecord.from_dict(json.loads(line))
        for line in (results / "edits.jsonl").read_text().splitlines()
        if line.strip()
    ]

    return SessionState(
        manifest=manifest,
        manifest_path=manifest_path,
        config=config,
        detections_by_frame=detections_by_frame,
        tracks=tracks,
        cost_graph=graph,
        forest=forest,
        vessel_series=vessel_series,
        cleavage_planes=list(lin["cleavage_planes"]),
        edit_log=edit_log,
        revision=int(session_info["revision"]),
        pins={(int(f), int(d)): int(tid) for f, d, tid in session_info["pins"]},
        next_detection_id=int(session_info["next_detection_id"]),
        next_track_id=int(session_info["next_track_id"]),
        distance_maps=None,
    )
