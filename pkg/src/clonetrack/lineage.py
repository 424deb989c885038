"""Parent-daughter lineage over completed tracks.

Tracks born after the first frame are assigned the candidate parent whose
extension by the newborn's initial detections is cheapest under the same
cost the tracker uses. Families assemble into a forest; the largest tree
is the one presented by default. Per-track vessel-distance series and
mitotic cleavage planes are derived here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDistanceMapError, ParameterError
from .imaging import VoxelSpacing
from .segment import Detection, DistanceMap
from .track import CostGraph, Track, TrackingConfig, d_cc, path_cost


@dataclass(frozen=True)
class LineageConfig:
    """Parent-search gates and distance-sampling mode."""

    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    spatial_gate_um: float = 50.0
    sample_min_over_voxels: bool = False

    def __post_init__(self):
        if self.spatial_gate_um <= 0:
            raise ParameterError(f"spatial gate must be positive, got {self.spatial_gate_um}")


@dataclass
class LineageForest:
    """Parent pointers plus the grouping of tracks into family trees."""

    nodes: list[int]
    parent: dict[int, int | None]
    trees: dict[int, list[int]]  # root track id -> sorted member ids
    presented_tree: int | None

    def children(self, track_id: int) -> list[int]:
        return sorted(n for n, p in self.parent.items() if p == track_id)

    def root_of(self, track_id: int) -> int:
        cur = track_id
        while self.parent[cur] is not None:
            cur = self.parent[cur]
        return cur


@dataclass
class CleavagePlane:
    anchor_um: np.ndarray
    normal: np.ndarray


@dataclass
class VesselDistanceSeries:
    track_id: int
    samples: list[tuple[int, float]]  # (frame, distance um)


def _initial_extension(track: Track, window: int) -> list[Detection]:
    """The newborn's opening run of consecutive-frame detections, capped at window."""
    run = []
    for i, det in enumerate(track.detections[:window]):
        if det.frame != track.birth_frame + i:
            break
        run.append(det)
    return run


def _tail_before(track: Track, frame: int) -> list[Detection]:
    return [d for d in track.detections if d.frame < frame][-2:]


def parent_candidates(
    newborn: Track,
    tracks: list[Track],
    spacing: VoxelSpacing,
    config: LineageConfig,
) -> list[Track]:
    """Tracks eligible to be the newborn's parent.

    A candidate must have been born strictly earlier, have a detection in
    the lookahead window of frames before the birth, and have its last
    pre-birth detection within the spatial gate of the newborn's first.
    """
    birth = newborn.birth_frame
    window = config.tracking.window
    first = newborn.detections[0]
    out = []
    for tr in tracks:
        if tr.id == newborn.id or tr.birth_frame >= birth:
            continue
        tail = _tail_before(tr, birth)
        if not tail:
            continue
        if birth - tail[-1].frame > window:
            continue
        if d_cc(tail[-1], first, spacing) > config.spatial_gate_um:
            continue
        out.append(tr)
    return out


def assign_parent(
    newborn: Track,
    candidates: list[Track],
    cost_graph: CostGraph,
    spacing: VoxelSpacing,
    config: LineageConfig,
) -> int | None:
    """Cheapest candidate to extend into the newborn's opening detections.

    Returns the winning candidate's track id, ties to the lowest id, or
    None when no candidate exists (the newborn roots its own tree). The
    cost graph is accepted for interface parity but costs are recomputed
    directly, which keeps the choice independent of tracking internals.
    """
    del cost_graph
    if not candidates:
        return None
    extension = _initial_extension(newborn, config.tracking.window)
    best_id = None
    best_cost = None
    for cand in sorted(candidates, key=lambda tr: tr.id):
        tail = _tail_before(cand, newborn.birth_frame)
        cost = path_cost(tail, extension, spacing, config.tracking)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_id = cand.id
    return best_id


def build_lineages(
    tracks: list[Track],
    cost_graph: CostGraph,
    spacing: VoxelSpacing,
    config: LineageConfig | None = None,
) -> LineageForest:
    """Assign parents to every post-first-frame track and group families.

    The presented tree is the family with the most member tracks; ties go
    to the lowest root track id.
    """
    config = config or LineageConfig()
    parent: dict[int, int | None] = {}
    for tr in sorted(tracks, key=lambda t: t.id):
        if tr.birth_frame == 0 or not tr.detections:
            parent[tr.id] = None
            continue
        candidates = parent_candidates(tr, tracks, spacing, config)
        parent[tr.id] = assign_parent(tr, candidates, cost_graph, spacing, config)

    nodes = sorted(parent)
    trees: dict[int, list[int]] = {}
    for node in nodes:
        cur = node
        seen = {cur}
        while parent[cur] is not None:
            cur = parent[cur]
            if cur in seen:  # parents are strictly older, so this cannot happen
                raise AssertionError(f"lineage cycle through track {cur}")
            seen.add(cur)
        trees.setdefault(cur, []).append(node)

    presented = None
    if trees:
        presented = min(trees, key=lambda root: (-len(trees[root]), root))
    return LineageForest(nodes=nodes, parent=parent, trees=trees, presented_tree=presented)


def vessel_distance_series(
    track: Track,
    maps: dict[int, DistanceMap],
    config: LineageConfig | None = None,
) -> VesselDistanceSeries:
    """Distance to the nearest vessel, per frame the track is detected in.

    Samples the distance map at the detection's centroid voxel by default,
    or the minimum over all its voxels when configured. Frames without a
    map are skipped; a flagged-empty map is an error.
    """
    config = config or LineageConfig()
    samples = []
    for det in track.detections:
        dist_map = maps.get(det.frame)
        if dist_map is None:
            continue
        if dist_map.empty:
            raise EmptyDistanceMapError(
                f"vessel map for frame {det.frame} has no foreground"
            )
        if config.sample_min_over_voxels:
            value = min(dist_map.values[tuple(v)] for v in det.voxels)
        else:
            value = dist_map.at_point_um(det.centroid_um)
        samples.append((det.frame, float(value)))
    return VesselDistanceSeries(track_id=track.id, samples=samples)


def cleavage_plane(parent: Track, daughter_a: Track, daughter_b: Track) -> CleavagePlane:
    """Division plane between two daughters at their shared first frame.

    Anchored at the midpoint of the daughter centroids, with the unit
    normal pointing from daughter a to daughter b.
    """
    del parent
    if daughter_a.birth_frame != daughter_b.birth_frame:
        raise ParameterError(
            f"daughters born at different frames: {daughter_a.birth_frame} vs {daughter_b.birth_frame}"
        )
    ca = np.asarray(daughter_a.detections[0].centroid_um, dtype=np.float64)
    cb = np.asarray(daughter_b.detections[0].centroid_um, dtype=np.float64)
    diff = cb - ca
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise ParameterError("daughter centroids coincide; cleavage plane undefined")
    return CleavagePlane(anchor_um=(ca + cb) / 2.0, normal=diff / norm)
