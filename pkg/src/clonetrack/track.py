"""Multi-frame cell tracking by minimum-cost path extension.

Each active track is scored against every next-frame detection by the
cheapest consecutive-frame chain of detections starting there, looking up
to a fixed window of future frames. Costs combine the minimum physical
gap between components and their size mismatch, weighted per step, with a
multiplier that penalizes short lookahead. Mutually minimal cost edges
extend tracks; leftover detections start new tracks; unmatched tracks
stay candidates for a bounded number of frames to ride out occlusion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .imaging import VoxelSpacing
from .segment import Detection

_CHUNK = 512  # voxel rows per block when a component-distance matrix is large


@dataclass(frozen=True)
class TrackingConfig:
    """Lookahead window, per-step weights, and occlusion patience.

    ``weights`` has window + 1 entries: the first covers the track's own
    trailing step (second-to-last to last known detection), the second the
    link from the last known detection to the first extension step, and the
    rest the steps between extension detections.
    """

    window: int = 4
    weights: tuple[float, ...] = (1.0, 3.0, 1.0, 1.0, 1.0)
    occlusion_patience: int | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ParameterError(f"window must be >= 1, got {self.window}")
        if len(self.weights) != self.window + 1:
            raise ParameterError(
                f"need {self.window + 1} weights for window {self.window}, got {len(self.weights)}"
            )
        if any(w < 0 for w in self.weights):
            raise ParameterError("weights must be non-negative")
        if self.occlusion_patience is None:
            object.__setattr__(self, "occlusion_patience", self.window - 1)
        elif self.occlusion_patience < 0:
            raise ParameterError("occlusion patience must be >= 0")


@dataclass(eq=False)
class Track:
    """A time-ordered chain of detections, at most one per frame."""

    id: int
    detections: list[Detection]
    status: str = "active"  # active | ended

    @property
    def birth_frame(self) -> int:
        return self.detections[0].frame

    @property
    def last_extended_frame(self) -> int:
        return self.detections[-1].frame

    def detection_at(self, frame: int) -> Detection | None:
        for det in self.detections:
            if det.frame == frame:
                return det
        return None


@dataclass(frozen=True)
class CostEdge:
    track_id: int
    detection_id: int
    cost: float
    matching: bool


@dataclass
class CostGraph:
    """All candidate costs per transition; key t holds edges into frame t + 1."""

    transitions: dict[int, list[CostEdge]] = field(default_factory=dict)

    def edges_into(self, frame: int) -> list[CostEdge]:
        return self.transitions.get(frame - 1, [])


def d_cc(alpha: Detection, beta: Detection, spacing: VoxelSpacing) -> float:
    """Minimum Euclidean distance between the two components' voxel centers, in um."""
    if alpha.voxel_count == 0 or beta.voxel_count == 0:
        raise ParameterError("component distance needs non-empty detections")
    scale = spacing.as_array()
    pa = alpha.voxels.astype(np.float64) * scale
    pb = beta.voxels.astype(np.float64) * scale
    best = np.inf
    for start in range(0, pa.shape[0], _CHUNK):
        block = pa[start : start + _CHUNK]
        diff = block[:, None, :] - pb[None, :, :]
        best = min(best, float((diff * diff).sum(axis=2).min()))
    return float(np.sqrt(best))


def d_size(alpha: Detection, beta: Detection) -> float:
    """Relative size mismatch (max - min) / max of the two voxel counts."""
    a, b = alpha.voxel_count, beta.voxel_count
    if a <= 0 or b <= 0:
        raise ParameterError("size distance needs positive voxel counts")
    lo, hi = (a, b) if a <= b else (b, a)
    return (hi - lo) / hi


def _pair_distance(alpha: Detection, beta: Detection, spacing: VoxelSpacing) -> float:
    return d_cc(alpha, beta, spacing) + d_size(alpha, beta)


def path_cost(
    tail: list[Detection],
    extension: list[Detection],
    spacing: VoxelSpacing,
    config: TrackingConfig,
) -> float:
    """Cost of extending a track along a consecutive-frame detection chain.

    The track contributes its last one or two detections as history; the
    per-step weighted distances are summed and scaled by
    (window - len(extension) + 1), so shorter lookahead costs more per step.
    Terms accumulate from the most future pair backward; fixing the order
    makes costs bit-reproducible across evaluation strategies.
    """
    if not tail:
        raise ParameterError("track tail must hold at least one detection")
    if not 1 <= len(extension) <= config.window:
        raise ParameterError(
            f"extension length must be in [1, {config.window}], got {len(extension)}"
        )
    tail = tail[-2:]
    chain = list(tail) + list(extension)
    # chain[q] is rho_{i} with i = q - (len(tail) - 1); pairs end at the
    # last extension detection and reach back to i = -1 when history exists.
    i_min = -1 if len(tail) == 2 else 0
    total = 0.0
    for i in range(len(extension) - 1, i_min - 1, -1):
        q = i + len(tail) - 1
        total = config.weights[i + 1] * _pair_distance(chain[q], chain[q + 1], spacing) + total
    return (config.window - len(extension) + 1) * total


class DistanceCache:
    """Memoized symmetric pair distances keyed by (frame, detection id).

    Detection ids are never reused within an experiment, so entries stay
    valid across repeated tracking passes over edited frame lists.
    """

    def __init__(self, spacing: VoxelSpacing):
        self.spacing = spacing
        self._store: dict[tuple, float] = {}

    def get(self, a: Detection, b: Detection) -> float:
        ka, kb = (a.frame, a.id), (b.frame, b.id)
        key = (ka, kb) if ka <= kb else (kb, ka)
        value = self._store.get(key)
        if value is None:
            value = _pair_distance(a, b, self.spacing)
            self._store[key] = value
        return value

    def matrix(self, rows: list[Detection], cols: list[Detection]) -> np.ndarray:
        out = np.empty((len(rows), len(cols)))
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                out[i, j] = self.get(a, b)
        return out


def _chain_minima(
    frames_ahead: list[list[Detection]],
    cache: DistanceCache,
    config: TrackingConfig,
) -> list[np.ndarray]:
    """Cheapest chain-interior cost per start detection, for each chain length.

    frames_ahead[0] holds the candidate start detections; entry m - 1 of the
    result gives, for every start, the minimum over all length-m chains of
    the weighted sum of distances between consecutive chain detections
    (the track-history terms are added by the caller). Lengths stop at the
    window or the first empty frame.
    """
    n_start = len(frames_ahead[0])
    max_len = 0
    for f in frames_ahead[: config.window]:
        if not f:
            break
        max_len += 1
    minima = []
    for m in range(1, max_len + 1):
        g = np.zeros(len(frames_ahead[m - 1]))
        for p in range(m - 1, 0, -1):
            step = config.weights[p + 1] * cache.matrix(frames_ahead[p - 1], frames_ahead[p])
            g = (step + g[None, :]).min(axis=1)
        assert g.shape == (n_start,)
        minima.append(g)
    return minima


def run_transitions(
    tracks: list[Track],
    detections_by_frame: list[list[Detection]],
    spacing: VoxelSpacing,
    config: TrackingConfig,
    graph: CostGraph,
    cache: DistanceCache,
    start_frame: int,
    next_id: int,
    pins: dict[tuple[int, int], int] | None = None,
) -> int:
    """Advance tracking over transitions into ``start_frame`` and beyond.

    Mutates ``tracks`` and ``graph`` in place; frames before ``start_frame``
    are never touched, which lets callers resume after editing a frame's
    detections while keeping every earlier assignment frozen. ``pins`` maps
    (frame, detection id) to a track id whose matching edge is forced; a pin
    is skipped if its track is missing or already extends to that frame.
    Returns the next unused track id.
    """
    n_frames = len(detections_by_frame)
    for s in range(start_frame, n_frames):
        arrivals = detections_by_frame[s]

        pinned_pairs: list[tuple[Track, int]] = []
        pinned_cols: set[int] = set()
        pinned_track_ids: set[int] = set()
        if pins:
            track_by_id = {tr.id: tr for tr in tracks}
            for col, det in enumerate(arrivals):
                tid = pins.get((s, det.id))
                if tid is None or tid in pinned_track_ids:
                    continue
                tr = track_by_id.get(tid)
                if tr is None or not tr.detections or tr.last_extended_frame >= s:
                    continue
                pinned_pairs.append((tr, col))
                pinned_cols.add(col)
                pinned_track_ids.add(tid)

        candidates = [
            tr
            for tr in tracks
            if tr.status == "active"
            and s - tr.last_extended_frame <= config.occlusion_patience + 1
            and tr.id not in pinned_track_ids
        ]
        candidates.sort(key=lambda tr: tr.id)

        matched_dets: set[int] = set(pinned_cols)
        edges: list[CostEdge] = []
        accepted: dict[tuple[int, int], bool] = {}
        if arrivals and candidates:
            chain_minima = _chain_minima(detections_by_frame[s:], cache, config)
            costs = np.empty((len(candidates), len(arrivals)))
            for row, tr in enumerate(candidates):
                last = tr.detections[-1]
                head = config.weights[1] * np.array([cache.get(last, det) for det in arrivals])
                history = (
                    config.weights[0] * cache.get(tr.detections[-2], last)
                    if len(tr.detections) >= 2
                    else None
                )
                best = np.full(len(arrivals), np.inf)
                for m, interior in enumerate(chain_minima, start=1):
                    v = head + interior
                    if history is not None:
                        v = history + v
                    np.minimum(best, (config.window - m + 1) * v, out=best)
                costs[row] = best

            free_cols = [c for c in range(len(arrivals)) if c not in pinned_cols]
            if free_cols:
                sub = costs[:, free_cols]
                row_min = sub.min(axis=1, keepdims=True)
                col_min = sub.min(axis=0, keepdims=True)
                mutual = (sub == row_min) & (sub == col_min)
                matched_rows: set[int] = set()
                for row, sub_col in np.argwhere(mutual):
                    col = free_cols[sub_col]
                    if row not in matched_rows and col not in matched_dets:
                        matched_rows.add(int(row))
                        matched_dets.add(int(col))
                        accepted[(int(row), int(col))] = True
            edges = [
                CostEdge(
                    track_id=candidates[row].id,
                    detection_id=arrivals[col].id,
                    cost=float(costs[row, col]),
                    matching=accepted.get((row, col), False),
                )
                for row in range(len(candidates))
                for col in range(len(arrivals))
            ]
        for tr, col in pinned_pairs:
            edges.append(
                CostEdge(
                    track_id=tr.id,
                    detection_id=arrivals[col].id,
                    cost=path_cost(tr.detections, [arrivals[col]], spacing, config),
                    matching=True,
                )
            )
        graph.transitions[s - 1] = edges

        for tr, col in pinned_pairs:
            tr.detections.append(arrivals[col])
            tr.status = "active"
        for row, col in sorted(accepted):
            candidates[row].detections.append(arrivals[col])

        for col, det in enumerate(arrivals):
            if col not in matched_dets:
                tracks.append(Track(id=next_id, detections=[det]))
                next_id += 1

        for tr in tracks:
            if tr.status == "active" and s - tr.last_extended_frame >= config.occlusion_patience + 1:
                tr.status = "ended"

    return next_id


def track_sequence(
    detections_by_frame: list[list[Detection]],
    spacing: VoxelSpacing,
    config: TrackingConfig | None = None,
    id_start: int = 0,
) -> tuple[list[Track], CostGraph]:
    """Associate per-frame detections into tracks across the whole sequence.

    Frame 0 seeds one track per detection. At each transition, every
    candidate track is scored against every next-frame detection; edges
    minimal in both their row and column (ties to the smallest track id,
    then detection index) extend tracks, leftover detections are born as
    new tracks, and tracks unmatched longer than the occlusion patience
    end. Track ids count up from ``id_start`` and are never reused.
    """
    config = config or TrackingConfig()
    cache = DistanceCache(spacing)
    graph = CostGraph()
    tracks: list[Track] = []
    next_id = id_start
    if not detections_by_frame:
        raise ParameterError("tracking needs at least one frame")

    for det in detections_by_frame[0]:
        tracks.append(Track(id=next_id, detections=[det]))
        next_id += 1

    next_id = run_transitions(
        tracks,
        detections_by_frame,
        spacing,
        config,
        graph=graph,
        cache=cache,
        start_frame=1,
        next_id=next_id,
    )
    return tracks, graph
