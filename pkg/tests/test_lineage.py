"""Lineage forests, parent assignment, vessel distances, cleavage planes."""

import numpy as np
import pytest

from clonetrack.errors import EmptyDistanceMapError, ParameterError
from clonetrack.imaging import VoxelSpacing
from clonetrack.lineage import (
    LineageConfig,
    assign_parent,
    build_lineages,
    cleavage_plane,
    parent_candidates,
    vessel_distance_series,
)
from clonetrack.segment import DistanceMap, distance_map
from clonetrack.track import CostGraph, Track, TrackingConfig, path_cost, track_sequence

from test_track import point


def make_track(track_id, positions, birth=0, det_id=0):
    """Track of single-voxel detections at consecutive frames from birth."""
    dets = [point(birth + i, det_id, *pos) for i, pos in enumerate(positions)]
    return Track(id=track_id, detections=dets)


UNIT = VoxelSpacing(1.0, 1.0, 1.0)


class TestCandidates:
    def test_older_nearby_track_is_candidate(self):
        parent = make_track(0, [(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        newborn = make_track(1, [(3, 1, 0), (4, 1, 0)], birth=3)
        cands = parent_candidates(newborn, [parent, newborn], UNIT, LineageConfig())
        assert [c.id for c in cands] == [0]

    def test_far_track_gated_out(self):
        parent = make_track(0, [(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        newborn = make_track(1, [(200, 0, 0)], birth=3)
        cands = parent_candidates(newborn, [parent, newborn], UNIT, LineageConfig())
        assert cands == []

    def test_stale_track_outside_window_gated_out(self):
        old = make_track(0, [(0, 0, 0), (1, 0, 0)])  # last detection frame 1
        newborn = make_track(1, [(2, 0, 0)], birth=6)  # gap of 5 > window 4
        cands = parent_candidates(newborn, [old, newborn], UNIT, LineageConfig())
        assert cands == []

    def test_same_birth_frame_not_candidate(self):
        a = make_track(0, [(0, 0, 0)], birth=2)
        b = make_track(1, [(1, 0, 0)], birth=2)
        assert parent_candidates(b, [a, b], UNIT, LineageConfig()) == []

    def test_track_spanning_birth_uses_prebirth_tail(self):
        # Candidate keeps existing after the newborn appears (undersegmentation
        # recovery case): still eligible via its detections before the birth.
        spanning = make_track(0, [(0, 0, 0)] * 6)
        newborn = make_track(1, [(2, 0, 0), (2, 0, 0)], birth=3)
        cands = parent_candidates(newborn, [spanning, newborn], UNIT, LineageConfig())
        assert [c.id for c in cands] == [0]

    def test_invalid_gate_rejected(self):
        with pytest.raises(ParameterError):
            LineageConfig(spatial_gate_um=0.0)


class TestAssignParent:
    def test_single_candidate_wins(self):
        parent = make_track(0, [(0, 0, 0), (1, 0, 0)])
        newborn = make_track(1, [(2, 1, 0)], birth=2)
        chosen = assign_parent(newborn, [parent], CostGraph(), UNIT, LineageConfig())
        assert chosen == 0

    def test_cheaper_candidate_wins(self):
        near = make_track(0, [(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        far = make_track(1, [(10, 0, 0), (10, 0, 0), (10, 0, 0)])
        newborn = make_track(2, [(3, 0, 0), (4, 0, 0)], birth=3)
        chosen = assign_parent(newborn, [near, far], CostGraph(), UNIT, LineageConfig())
        assert chosen == 0

    def test_no_candidates_roots_the_track(self):
        newborn = make_track(5, [(0, 0, 0)], birth=4)
        assert assign_parent(newborn, [], CostGraph(), UNIT, LineageConfig()) is None

    def test_cost_tie_takes_lowest_id(self):
        left = make_track(3, [(0, 2, 0), (1, 2, 0)])
        right = make_track(7, [(0, -2, 0), (1, -2, 0)])  # mirror image: equal costs
        newborn = make_track(9, [(2, 0, 0), (3, 0, 0)], birth=2)
        chosen = assign_parent(newborn, [right, left], CostGraph(), UNIT, LineageConfig())
        assert chosen == 3

    def test_matches_brute_force_argmin(self):
        rng = np.random.default_rng(31)
        cfg = LineageConfig()
        for _ in range(30):
            candidates = []
            for tid in range(4):
                start = rng.integers(0, 6, 3)
                steps = rng.integers(-1, 2, (3, 3))
                positions = [tuple(start + steps[:k].sum(axis=0)) for k in range(1, 4)]
                candidates.append(make_track(tid, [tuple(map(int, p)) for p in positions]))
            birth = 3
            newborn = make_track(
                9, [tuple(int(v) for v in rng.integers(0, 8, 3)) for _ in range(2)], birth=birth
            )
            chosen = assign_parent(newborn, candidates, CostGraph(), UNIT, cfg)

            ext = newborn.detections[: cfg.tracking.window]
            best = min(
                (
                    (
                        path_cost(
                            [d for d in c.detections if d.frame < birth][-2:],
                            ext,
                            UNIT,
                            cfg.tracking,
                        ),
                        c.id,
                    )
                    for c in candidates
                ),
            )
            assert chosen == best[1]


class TestBuildLineages:
    def test_all_first_frame_tracks_are_roots(self):
        frames = [[point(t, 0, 0, 0), point(t, 1, 20, 0)] for t in range(4)]
        tracks, graph = track_sequence(frames, UNIT)
        forest = build_lineages(tracks, graph, UNIT)
        assert all(forest.parent[n] is None for n in forest.nodes)
        assert sorted(forest.trees) == [0, 1]

    def test_division_builds_three_node_tree(self):
        # A mother track that stops at frame 2 and two daughters born at
        # frame 3 flanking her last position: both should parent to her.
        mother = make_track(0, [(5, 5, 0)] * 3)
        da = make_track(1, [(4, 5, 0)] * 3, birth=3)
        db = make_track(2, [(6, 5, 0)] * 3, birth=3)
        forest = build_lineages([mother, da, db], CostGraph(), UNIT)
        assert forest.parent == {0: None, 1: 0, 2: 0}
        assert forest.presented_tree == 0
        assert forest.trees[0] == [0, 1, 2]
        assert forest.children(0) == [1, 2]

    def test_division_through_tracker_extends_mother_births_one(self):
        # Fed through tracking, a division extends the mother track into one
        # daughter and births the other, which is then parented to her.
        frames = [[point(t, 0, 5, 5)] for t in range(3)]
        frames += [[point(t, 0, 4, 5), point(t, 1, 6, 5)] for t in range(3, 6)]
        tracks, graph = track_sequence(frames, UNIT)
        forest = build_lineages(tracks, graph, UNIT)
        assert len(tracks) == 2
        assert forest.parent == {0: None, 1: 0}
        assert forest.presented_tree == 0
        assert forest.trees[0] == [0, 1]

    def test_presented_tree_is_largest(self):
        # Family A: one cell splitting twice (3 tracks); family B: lone cell.
        frames = []
        for t in range(2):
            frames.append([point(t, 0, 10, 10), point(t, 1, 60, 60)])
        for t in range(2, 4):
            frames.append(
                [point(t, 0, 8, 10), point(t, 1, 12, 10), point(t, 2, 60, 60)]
            )
        for t in range(4, 6):
            frames.append(
                [
                    point(t, 0, 8, 8),
                    point(t, 1, 8, 12),
                    point(t, 2, 12, 10),
                    point(t, 3, 60, 60),
                ]
            )
        tracks, graph = track_sequence(frames, UNIT)
        forest = build_lineages(tracks, graph, UNIT)
        lone_roots = [
            forest.root_of(tr.id)
            for tr in tracks
            if tr.detections[0].voxels[0][0] == 60
        ]
        big_root = forest.presented_tree
        assert big_root not in lone_roots
        assert len(forest.trees[big_root]) > max(len(forest.trees[r]) for r in lone_roots)

    def test_tree_size_tie_presents_lowest_root(self):
        frames = [[point(t, 0, 0, 0), point(t, 1, 50, 50)] for t in range(3)]
        tracks, graph = track_sequence(frames, UNIT)
        forest = build_lineages(tracks, graph, UNIT)
        assert forest.presented_tree == 0  # two singleton trees tie

    def test_parent_precedes_child(self):
        rng = np.random.default_rng(32)
        frames = []
        for t in range(6):
            n = int(rng.integers(1, 4))
            frames.append(
                [point(t, j, int(rng.integers(0, 10)), int(rng.integers(0, 10))) for j in range(n)]
            )
        tracks, graph = track_sequence(frames, UNIT)
        forest = build_lineages(tracks, graph, UNIT)
        by_id = {tr.id: tr for tr in tracks}
        for child, parent in forest.parent.items():
            if parent is not None:
                assert by_id[parent].birth_frame < by_id[child].birth_frame


class TestVesselDistance:
    def _map_with_vessel_at_origin(self):
        mask = np.zeros((8, 8, 8), dtype=bool)
        mask[0, 0, 0] = True
        return distance_map(mask, UNIT)

    def test_centroid_on_vessel_is_zero(self):
        dm = self._map_with_vessel_at_origin()
        track = make_track(0, [(0, 0, 0)])
        series = vessel_distance_series(track, {0: dm})
        assert series.samples == [(0, 0.0)]

    def test_three_four_five_distance(self):
        dm = self._map_with_vessel_at_origin()
        track = make_track(0, [(3, 4, 0)])
        series = vessel_distance_series(track, {0: dm})
        assert series.samples == [(0, 5.0)]

    def test_stationary_cell_constant_series(self):
        dm = self._map_with_vessel_at_origin()
        maps = {t: dm for t in range(5)}
        track = make_track(0, [(3, 4, 0)] * 5)
        series = vessel_distance_series(track, maps)
        assert series.samples == [(t, 5.0) for t in range(5)]

    def test_frames_without_map_skipped(self):
        dm = self._map_with_vessel_at_origin()
        track = make_track(0, [(1, 0, 0)] * 4)
        series = vessel_distance_series(track, {0: dm, 2: dm})
        assert [t for t, _ in series.samples] == [0, 2]

    def test_empty_map_raises(self):
        empty = DistanceMap(values=np.full((4, 4, 4), np.inf), spacing=UNIT, empty=True)
        track = make_track(0, [(1, 1, 1)])
        with pytest.raises(EmptyDistanceMapError):
            vessel_distance_series(track, {0: empty})

    def test_min_over_voxels_mode(self):
        dm = self._map_with_vessel_at_origin()
        track = Track(id=0, detections=[point(0, 0, 2, 0, 0, n_voxels=3)])
        cfg_min = LineageConfig(sample_min_over_voxels=True)
        assert vessel_distance_series(track, {0: dm}, cfg_min).samples == [(0, 2.0)]
        # Centroid of the 3-voxel bar sits at z=1: distance sqrt(4+1).
        assert vessel_distance_series(track, {0: dm}).samples[0][1] == pytest.approx(
            np.sqrt(5.0)
        )


class TestCleavagePlane:
    def test_axis_aligned(self):
        a = make_track(1, [(0, 0, 0)], birth=3)
        b = make_track(2, [(2, 0, 0)], birth=3)
        plane = cleavage_plane(make_track(0, [(1, 0, 0)]), a, b)
        np.testing.assert_allclose(plane.anchor_um, (1, 0, 0))
        np.testing.assert_allclose(plane.normal, (1, 0, 0))

    def test_diagonal_normalized(self):
        a = make_track(1, [(0, 0, 0)], birth=2)
        b = make_track(2, [(1, 1, 0)], birth=2)
        plane = cleavage_plane(make_track(0, [(0, 0, 0)]), a, b)
        np.testing.assert_allclose(plane.normal, (1 / np.sqrt(2), 1 / np.sqrt(2), 0))
        assert np.linalg.norm(plane.normal) == pytest.approx(1.0)

    def test_swap_flips_normal_keeps_anchor(self):
        a = make_track(1, [(0, 2, 5)], birth=1)
        b = make_track(2, [(4, 0, 1)], birth=1)
        p = cleavage_plane(make_track(0, [(2, 1, 3)]), a, b)
        q = cleavage_plane(make_track(0, [(2, 1, 3)]), b, a)
        np.testing.assert_allclose(p.anchor_um, q.anchor_um)
        np.testing.assert_allclose(p.normal, -q.normal)

    def test_anchor_equidistant(self):
        a = make_track(1, [(0, 0, 0)], birth=1)
        b = make_track(2, [(3, 5, 1)], birth=1)
        plane = cleavage_plane(make_track(0, [(0, 0, 0)]), a, b)
        da = np.linalg.norm(plane.anchor_um - a.detections[0].centroid_um)
        db = np.linalg.norm(plane.anchor_um - b.detections[0].centroid_um)
        assert da == pytest.approx(db)

    def test_coincident_centroids_rejected(self):
        a = make_track(1, [(2, 2, 2)], birth=1)
        b = make_track(2, [(2, 2, 2)], birth=1)
        with pytest.raises(ParameterError):
            cleavage_plane(make_track(0, [(0, 0, 0)]), a, b)

    def test_mismatched_birth_frames_rejected(self):
        a = make_track(1, [(0, 0, 0)], birth=1)
        b = make_track(2, [(2, 0, 0)], birth=2)
        with pytest.raises(ParameterError):
            cleavage_plane(make_track(0, [(0, 0, 0)]), a, b)
