"""Montage reconstruction from overlapping stage-positioned tiles.

Each tile pair with a stage-predicted overlap is registered by searching a
window of integer offsets for the one maximizing normalized covariance of
the overlap region. The resulting overlap graph is reduced to its maximum
spanning tree, offsets are accumulated outward from an anchored root tile,
and all channels are composited with a single delta per tile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DisconnectedMontageError,
    ManifestError,
    ParameterError,
    RegistrationError,
)
from .imaging import VoxelGrid, VoxelSpacing, load_tiff_volume

# Candidate offsets whose approximate score falls within this margin of the
# approximate maximum are re-scored exactly before the winner is picked.
SHORTLIST_MARGIN = 1e-5


@dataclass
class Tile:
    """One microscope tile: stage-reported voxel position plus per-channel grids."""

    id: int
    stage_position: np.ndarray  # (3,) int voxels relative to montage origin
    grids: dict[int, VoxelGrid]

    def __post_init__(self):
        self.stage_position = np.asarray(self.stage_position, dtype=np.int64)
        if self.stage_position.shape != (3,):
            raise ParameterError(f"stage position must be a 3-vector, got {self.stage_position!r}")
        if not self.grids:
            raise ParameterError(f"tile {self.id} has no channels")
        dims = {g.dims for g in self.grids.values()}
        spacings = {g.spacing for g in self.grids.values()}
        if len(dims) != 1 or len(spacings) != 1:
            raise ParameterError(f"tile {self.id} channels disagree on dims or spacing")

    @property
    def dims(self) -> np.ndarray:
        return np.array(next(iter(self.grids.values())).dims, dtype=np.int64)


@dataclass(frozen=True)
class OverlapEdge:
    """Best offset for one tile pair, as a delta from stage-predicted alignment."""

    tile_a: int
    tile_b: int
    best_offset: tuple[int, int, int]
    score: float


@dataclass
class MontageSolution:
    root: int
    tree_edges: list[OverlapEdge]
    final_positions: dict[int, np.ndarray]


def normcov(patch_a: np.ndarray, patch_b: np.ndarray) -> float:
    """Normalized covariance (correlation coefficient) of two equal-shape blocks.

    Mean-centered product sum divided by N * sigma_a * sigma_b, clamped to
    [-1, 1]; either patch having zero variance scores 0.
    """
    a = np.asarray(patch_a, dtype=np.float64)
    b = np.asarray(patch_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"patch shapes differ: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ParameterError("patches need at least 2 voxels")
    da = a - a.mean()
    db = b - b.mean()
    sa = a.std()
    sb = b.std()
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float(np.clip((da * db).sum() / (a.size * sa * sb), -1.0, 1.0))


def _overlap_box(pos_a, dims_a, pos_b, dims_b):
    """Half-open intersection [lo, hi) of two placed boxes, or None."""
    lo = np.maximum(pos_a, pos_b)
    hi = np.minimum(pos_a + dims_a, pos_b + dims_b)
    if np.any(hi <= lo):
        return None
    return lo, hi


def _overlap_patches(a: Tile, b: Tile, channel: int, offset: np.ndarray):
    """Extract the overlap of a and b when b is displaced by offset."""
    box = _overlap_box(a.stage_position, a.dims, b.stage_position + offset, b.dims)
    if box is None:
        return None
    lo, hi = box
    sl_a = tuple(slice(int(l), int(h)) for l, h in zip(lo - a.stage_position, hi - a.stage_position))
    lo_b = lo - b.stage_position - offset
    hi_b = hi - b.stage_position - offset
    sl_b = tuple(slice(int(l), int(h)) for l, h in zip(lo_b, hi_b))
    return a.grids[channel].values[sl_a], b.grids[channel].values[sl_b]


def _box_sum(integral: np.ndarray, lo, hi) -> float:
    """Sum over the half-open box [lo, hi) using a zero-bordered integral image."""
    x0, y0, z0 = int(lo[0]), int(lo[1]), int(lo[2])
    x1, y1, z1 = int(hi[0]), int(hi[1]), int(hi[2])
    return (
        integral[x1, y1, z1]
        - integral[x0, y1, z1]
        - integral[x1, y0, z1]
        - integral[x1, y1, z0]
        + integral[x0, y0, z1]
        + integral[x0, y1, z0]
        + integral[x1, y0, z0]
        - integral[x0, y0, z0]
    )


def _integral_image(values: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(s + 1 for s in values.shape))
    out[1:, 1:, 1:] = values.astype(np.float64).cumsum(0).cumsum(1).cumsum(2)
    return out


def _approximate_scores(a: Tile, b: Tile, channel: int, window: int):
    """Score every offset in [-window, window]^3 via FFT correlation.

    Both tiles are cropped to the region reachable by any searched offset
    (the stage-predicted overlap dilated by the window), so the transforms
    stay small even when tiles are large and overlaps thin. Returns
    (offsets, scores) for offsets whose overlap has at least 2 voxels.
    """
    r = b.stage_position - a.stage_position
    d_a, d_b = a.dims, b.dims
    crop_a_lo = np.maximum(0, r - window)
    crop_a_hi = np.minimum(d_a, r + d_b + window)
    crop_b_lo = np.maximum(0, -r - window)
    crop_b_hi = np.minimum(d_b, d_a - r + window)
    if np.any(crop_a_hi <= crop_a_lo) or np.any(crop_b_hi <= crop_b_lo):
        return [], []

    sl_a = tuple(slice(int(l), int(h)) for l, h in zip(crop_a_lo, crop_a_hi))
    sl_b = tuple(slice(int(l), int(h)) for l, h in zip(crop_b_lo, crop_b_hi))
    va = a.grids[channel].values[sl_a].astype(np.float64)
    vb = b.grids[channel].values[sl_b].astype(np.float64)
    # Centering keeps the integral images well conditioned on bright data.
    va -= va.mean()
    vb -= vb.mean()

    int_a = _integral_image(va)
    int_aa = _integral_image(va * va)
    int_b = _integral_image(vb)
    int_bb = _integral_image(vb * vb)
    cross = fftconvolve(va, vb[::-1, ::-1, ::-1], mode="full")
    lag_base = np.array(vb.shape, dtype=np.int64) - 1  # cross index of lag 0

    offsets, scores = [], []
    rng = range(-window, window + 1)
    for dx in rng:
        for dy in rng:
            for dz in rng:
                u = np.array((dx, dy, dz), dtype=np.int64)
                s = r + u
                lo = np.maximum(0, s)
                hi = np.minimum(d_a, s + d_b)
                if np.any(hi <= lo):
                    continue
                n = int(np.prod(hi - lo))
                if n < 2:
                    continue
                lo_a = lo - crop_a_lo
                hi_a = hi - crop_a_lo
                lo_b = lo - s - crop_b_lo
                hi_b = hi - s - crop_b_lo
                s_a = _box_sum(int_a, lo_a, hi_a)
                s_aa = _box_sum(int_aa, lo_a, hi_a)
                s_b = _box_sum(int_b, lo_b, hi_b)
                s_bb = _box_sum(int_bb, lo_b, hi_b)
                lag = s - crop_a_lo + crop_b_lo
                s_ab = float(cross[tuple(lag + lag_base)])
                var_a = s_aa - s_a * s_a / n
                var_b = s_bb - s_b * s_b / n
                if var_a <= 0.0 or var_b <= 0.0:
                    score = 0.0
                else:
                    score = (s_ab - s_a * s_b / n) / np.sqrt(var_a * var_b)
                offsets.append((dx, dy, dz))
                scores.append(score)
    return offsets, scores


def register_pair(a: Tile, b: Tile, channel: int, window: int) -> OverlapEdge:
    """Find the offset of b (relative to its stage position) best aligning it to a.

    Searches every integer offset in [-window, window]^3, scoring normalized
    covariance of the resulting overlap. Ties break to the smallest offset
    magnitude, then lexicographically. A fast approximate pass shortlists
    candidates; the winner is decided on exactly re-scored values, so the
    result matches an exhaustive direct search.
    """
    if window < 0:
        raise ParameterError(f"window must be >= 0, got {window}")
    if channel not in a.grids or channel not in b.grids:
        raise ParameterError(f"channel {channel} missing from tile {a.id} or {b.id}")
    offsets, scores = _approximate_scores(a, b, channel, window)
    if not offsets:
        raise RegistrationError(
            f"tiles {a.id} and {b.id} share no overlap at any offset within window {window}"
        )
    best_approx = max(scores)
    shortlist = [u for u, s in zip(offsets, scores) if s >= best_approx - SHORTLIST_MARGIN]

    best_key = None
    best_offset = None
    best_score = 0.0
    for u in shortlist:
        patches = _overlap_patches(a, b, channel, np.array(u, dtype=np.int64))
        if patches is None or patches[0].size < 2:
            continue
        score = normcov(patches[0], patches[1])
        key = (-score, u[0] * u[0] + u[1] * u[1] + u[2] * u[2], u)
        if best_key is None or key < best_key:
            best_key = key
            best_offset = u
            best_score = score
    if best_offset is None:
        raise RegistrationError(
            f"tiles {a.id} and {b.id} share no overlap at any offset within window {window}"
        )
    return OverlapEdge(tile_a=a.id, tile_b=b.id, best_offset=best_offset, score=best_score)


class _UnionFind:
    def __init__(self, ids):
        self.parent = {i: i for i in ids}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


def maximum_spanning_tree(tile_ids: list[int], edges: list[OverlapEdge]) -> list[OverlapEdge]:
    """Greedy maximum-weight spanning forest; ties by ascending (tile_a, tile_b)."""
    uf = _UnionFind(tile_ids)
    kept = []
    for edge in sorted(edges, key=lambda e: (-e.score, e.tile_a, e.tile_b)):
        if uf.union(edge.tile_a, edge.tile_b):
            kept.append(edge)
    return kept


def accumulate_positions(
    stage_positions: dict[int, np.ndarray],
    root: int,
    tree_edges: list[OverlapEdge],
) -> dict[int, np.ndarray]:
    """Walk the tree from the root, summing stage-relative offsets plus deltas.

    The root keeps its stage position; a child's final position is the
    parent's final position plus their stage-relative displacement plus the
    edge's registered delta (negated when the edge is traversed backwards).
    """
    adjacency: dict[int, list[tuple[int, np.ndarray]]] = {i: [] for i in stage_positions}
    for edge in tree_edges:
        u = np.array(edge.best_offset, dtype=np.int64)
        rel = stage_positions[edge.tile_b] - stage_positions[edge.tile_a]
        adjacency[edge.tile_a].append((edge.tile_b, rel + u))
        adjacency[edge.tile_b].append((edge.tile_a, -(rel + u)))

    final = {root: stage_positions[root].copy()}
    frontier = [root]
    while frontier:
        cur = frontier.pop()
        for nbr, step in adjacency[cur]:
            if nbr not in final:
                final[nbr] = final[cur] + step
                frontier.append(nbr)
    return final


def _predicted_overlap_volumes(tiles: list[Tile]) -> dict[tuple[int, int], int]:
    volumes = {}
    for i, a in enumerate(tiles):
        for b in tiles[i + 1 :]:
            box = _overlap_box(a.stage_position, a.dims, b.stage_position, b.dims)
            if box is not None:
                volumes[(a.id, b.id)] = int(np.prod(box[1] - box[0]))
    return volumes


def solve_montage(tiles: list[Tile], channel: int, window: int) -> MontageSolution:
    """Register all overlapping pairs and anchor the montage.

    The root is the tile with the greatest total stage-predicted overlap
    volume (ties to the lowest id); it keeps its stage position, and every
    other tile's position accumulates registered deltas along its unique
    max-spanning-tree path from the root.
    """
    if not tiles:
        raise ParameterError("montage needs at least one tile")
    ids = [t.id for t in tiles]
    if len(set(ids)) != len(ids):
        raise ParameterError("tile ids must be unique")
    by_id = {t.id: t for t in tiles}

    volumes = _predicted_overlap_volumes(tiles)
    totals = {i: 0 for i in ids}
    for (a_id, b_id), vol in volumes.items():
        totals[a_id] += vol
        totals[b_id] += vol
    root = min(ids, key=lambda i: (-totals[i], i))

    uf = _UnionFind(ids)
    for a_id, b_id in volumes:
        uf.union(a_id, b_id)
    unreachable = [i for i in ids if uf.find(i) != uf.find(root)]
    if unreachable:
        raise DisconnectedMontageError(unreachable)

    edges = [
        register_pair(by_id[a_id], by_id[b_id], channel, window)
        for (a_id, b_id) in sorted(volumes)
    ]
    tree = maximum_spanning_tree(ids, edges)
    stage = {t.id: t.stage_position for t in tiles}
    final = accumulate_positions(stage, root, tree)
    return MontageSolution(root=root, tree_edges=tree, final_positions=final)


def composite(tiles: list[Tile], solution: MontageSolution) -> dict[int, VoxelGrid]:
    """Fuse all tiles into one grid per channel at their solved positions.

    Output dims are the bounding box of the placed tiles (translated to the
    origin); overlaps keep the per-voxel maximum; gaps stay 0. Every channel
    of a tile is placed with the same delta.
    """
    if set(solution.final_positions) != {t.id for t in tiles}:
        raise ParameterError("solution does not cover the given tiles")
    channels = sorted(tiles[0].grids)
    for t in tiles:
        if sorted(t.grids) != channels:
            raise ParameterError(f"tile {t.id} channel set differs")
    spacing = next(iter(tiles[0].grids.values())).spacing

    positions = {t.id: solution.final_positions[t.id] for t in tiles}
    lo = np.min([positions[t.id] for t in tiles], axis=0)
    hi = np.max([positions[t.id] + t.dims for t in tiles], axis=0)
    out_dims = tuple(int(v) for v in hi - lo)

    fused = {}
    for ch in channels:
        out = np.zeros(out_dims)
        for t in sorted(tiles, key=lambda t: t.id):
            start = positions[t.id] - lo
            sl = tuple(slice(int(s), int(s + d)) for s, d in zip(start, t.dims))
            np.maximum(out[sl], t.grids[ch].values, out=out[sl])
        fused[ch] = VoxelGrid(values=out, spacing=spacing)
    return fused


def load_tile_manifest(path: Path) -> tuple[list[Tile], VoxelSpacing]:
    """Read a tile-set description and its TIFF volumes from disk.

    Expected layout: {"spacing_um": [dx, dy, dz], "tiles": [{"id": ...,
    "stage_position_vox": [x, y, z], "channels": [{"index": ..., "path": ...}]}]}.
    Paths resolve relative to the manifest file.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read tile manifest {path}: {exc}") from exc
    if not isinstance(data, dict) or "tiles" not in data or "spacing_um" not in data:
        raise ManifestError("tile manifest must contain 'tiles' and 'spacing_um'")
    spacing_raw = data["spacing_um"]
    if not isinstance(spacing_raw, list) or len(spacing_raw) != 3:
        raise ManifestError(f"spacing_um must be a 3-list, got {spacing_raw!r}")
    spacing = VoxelSpacing(*[float(v) for v in spacing_raw])

    tiles = []
    for entry in data["tiles"]:
        for key in ("id", "stage_position_vox", "channels"):
            if key not in entry:
                raise ManifestError(f"tile entry missing '{key}': {entry!r}")
        grids = {}
        for ch in entry["channels"]:
            if "index" not in ch or "path" not in ch:
                raise ManifestError(f"channel entry missing 'index' or 'path': {ch!r}")
            tiff_path = (path.parent / ch["path"]).resolve()
            if not tiff_path.is_file():
                raise ManifestError(f"tile image not found: {tiff_path}")
            grids[int(ch["index"])] = VoxelGrid(values=load_tiff_volume(tiff_path), spacing=spacing)
        tiles.append(Tile(id=int(entry["id"]), stage_position=entry["stage_position_vox"], grids=grids))
    if not tiles:
        raise ManifestError("tile manifest lists no tiles")
    return tiles, spacing
