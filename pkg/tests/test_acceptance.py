"""Acceptance suite: the package's headline guarantees, checked end to end.

Each criterion is one test function, so a plain ``pytest -v`` run shows one
pass/fail line per criterion. Every test states its tolerance and, where one
applies, asserts its wall-clock budget; on success it also prints a labeled
``ACCEPTANCE PASS`` line (visible with ``-s``).
"""

import time

import numpy as np
from click.testing import CliRunner

from clonetrack.cli import main
from clonetrack.denoise import _neighbor_sign_sum, mrf_denoise_state
from clonetrack.imaging import VoxelGrid, VoxelSpacing
from clonetrack.lineage import LineageConfig, assign_parent, build_lineages
from clonetrack.montage import Tile, composite, solve_montage
from clonetrack.segment import (
    SegmentationConfig,
    detections_from_mask,
    distance_map,
    otsu_threshold,
)
from clonetrack.session import (
    EditRequest,
    apply_edit_and_propagate,
    export_results,
    process_experiment,
    replay_session,
)
from clonetrack.synth import drifting_cells_experiment, undersegmentation_experiment
from clonetrack.track import CostGraph, TrackingConfig, path_cost, track_sequence

from test_lineage import make_track
from test_segment import edt_oracle, otsu_oracle
from test_track import enumerate_min_cost, point, random_instance

UNIT = VoxelSpacing(1.0, 1.0, 1.0)
ANISO = VoxelSpacing(0.8, 0.8, 1.0)


def report(criterion, detail):
    print(f"ACCEPTANCE PASS — {criterion}: {detail}")


def read_tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_transition_costs_match_exhaustive_enumeration():
    """200 random instances (≤6 frames, ≤5 detections/frame): every recorded
    edge cost equals brute-force enumeration of all feasible extensions of
    length ≤ window 4 under weights (1, 3, 1, 1, 1). Exact equality; < 60 s."""
    cfg = TrackingConfig()
    assert cfg.window == 4
    assert tuple(cfg.weights) == (1.0, 3.0, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    checked = 0
    for trial in range(200):
        frames = random_instance(rng)
        tracks, graph = track_sequence(frames, ANISO, cfg)
        by_id = {tr.id: tr for tr in tracks}
        for t, edges in graph.transitions.items():
            s = t + 1
            det_index = {d.id: i for i, d in enumerate(frames[s])}
            for edge in edges:
                tail = [d for d in by_id[edge.track_id].detections if d.frame < s][-2:]
                expected = enumerate_min_cost(
                    tail, frames[s:], det_index[edge.detection_id], ANISO, cfg
                )
                assert edge.cost == expected, (
                    f"trial {trial} t={t} track={edge.track_id} det={edge.detection_id}"
                )
                checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"took {elapsed:.1f} s"
    report(
        "transition-cost oracle",
        f"{checked} edge costs across 200 instances match enumeration exactly "
        f"({elapsed:.1f} s < 60 s)",
    )


def _smooth_motion_scene(rng, n_cells=10, n_frames=20, lane_gap=20):
    """Point cells on parallel lanes with near-constant drift and ±1 jitter.

    Per-frame displacement is at most sqrt(5² + 2²) ≈ 5.4, below half the
    minimum inter-cell distance (lanes stay ≥ 18 apart), so the true
    association is unambiguous.
    """
    x0 = rng.integers(0, 5, n_cells)
    vx = rng.integers(-3, 4, n_cells)
    frames, truth = [], {}
    for t in range(n_frames):
        dets = []
        for j, cell in enumerate(rng.permutation(n_cells)):
            x = int(x0[cell] + vx[cell] * t + rng.integers(-1, 2))
            y = int(lane_gap * cell + rng.integers(-1, 2))
            dets.append(point(t, j, x, y, 0))
            truth[(t, j)] = int(cell)
        frames.append(dets)
    return frames, truth


def test_tracking_recovers_smooth_motion_exactly():
    """10 sequences of 10 smoothly moving point cells over 20 frames, step
    below half the minimum inter-cell gap: 100% of frame-to-frame
    associations recovered. < 30 s."""
    t0 = time.perf_counter()
    for seed in range(10):
        rng = np.random.default_rng(200 + seed)
        frames, truth = _smooth_motion_scene(rng)
        tracks, _ = track_sequence(frames, UNIT)
        assert len(tracks) == 10, f"seed {seed}: {len(tracks)} tracks"
        recovered_cells = set()
        for tr in tracks:
            cells = {truth[(d.frame, d.id)] for d in tr.detections}
            assert len(cells) == 1, f"seed {seed}: track {tr.id} mixes cells {cells}"
            assert [d.frame for d in tr.detections] == list(range(20)), (
                f"seed {seed}: track {tr.id} not full length"
            )
            recovered_cells |= cells
        assert recovered_cells == set(range(10))
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"took {elapsed:.1f} s"
    report(
        "tracking recovery",
        f"10/10 sequences, all 200 per-sequence associations correct "
        f"({elapsed:.1f} s < 30 s)",
    )


def test_parent_assignment_matches_brute_force_argmin():
    """Parent choice equals the brute-force cost argmin in 100/100 randomized
    division cases; a constructed two-division scene yields a 3-level tree;
    the presented tree is always the one with the most member tracks."""
    cfg = LineageConfig()
    rng = np.random.default_rng(303)
    for case in range(100):
        n_cand = int(rng.integers(1, 6))
        candidates = []
        for tid in range(n_cand):
            start = rng.integers(0, 6, 3)
            steps = rng.integers(-1, 2, (3, 3))
            positions = [
                tuple(int(v) for v in start + steps[:k].sum(axis=0)) for k in range(1, 4)
            ]
            candidates.append(make_track(tid, positions))
        birth = 3
        newborn = make_track(
            9, [tuple(int(v) for v in rng.integers(0, 8, 3)) for _ in range(2)], birth=birth
        )
        chosen = assign_parent(newborn, candidates, CostGraph(), UNIT, cfg)
        ext = newborn.detections[: cfg.tracking.window]
        best = min(
            (
                path_cost(
                    [d for d in c.detections if d.frame < birth][-2:], ext, UNIT, cfg.tracking
                ),
                c.id,
            )
            for c in candidates
        )
        assert chosen == best[1], f"case {case}: {chosen} != {best[1]}"

    # Two successive divisions: A splits at frame 2 (A continues, B born),
    # then B splits at frame 4 (B continues, C born). D sits alone far away.
    # Every track's own next step stays shorter than any cross-track gap.
    a, d = (10, 10), (10, 80)
    b_path = {2: (13, 10), 3: (15, 10), 4: (17, 10), 5: (17, 10)}
    c_path = {4: (19, 12), 5: (19, 14)}
    frames = []
    for t in range(6):
        positions = [a, d]
        if t in b_path:
            positions.append(b_path[t])
        if t in c_path:
            positions.append(c_path[t])
        frames.append([point(t, j, x, y, 0) for j, (x, y) in enumerate(positions)])
    tracks, graph = track_sequence(frames, UNIT)
    assert len(tracks) == 4
    first_voxel = {tr.id: tuple(map(int, tr.detections[0].voxels[0][:2])) for tr in tracks}
    tid_a = next(i for i, v in first_voxel.items() if v == a)
    tid_d = next(i for i, v in first_voxel.items() if v == d)
    tid_b = next(tr.id for tr in tracks if tr.birth_frame == 2)
    tid_c = next(tr.id for tr in tracks if tr.birth_frame == 4)

    forest = build_lineages(tracks, graph, UNIT, cfg)
    assert forest.parent[tid_a] is None
    assert forest.parent[tid_d] is None
    assert forest.parent[tid_b] == tid_a
    assert forest.parent[tid_c] == tid_b
    assert sorted(forest.trees[tid_a]) == sorted([tid_a, tid_b, tid_c])
    assert forest.trees[tid_d] == [tid_d]
    assert forest.presented_tree == tid_a
    assert len(forest.trees[forest.presented_tree]) == max(
        len(members) for members in forest.trees.values()
    )
    report(
        "lineage argmin",
        "100/100 randomized parent choices match brute force; 3-level tree "
        "built; presented tree has the most nodes",
    )


def _random_2x2_montage(rng, overlap=16, tile=64):
    """A 2x2 tile grid cropped from one master volume, with per-tile integer
    stage errors in [-4, 4] so any pair is misaligned by at most 8 per axis."""
    pitch = tile - overlap
    master = rng.integers(0, 256, size=(tile + pitch, tile + pitch, tile)).astype(float)
    tiles, true_pos = [], {}
    tid = 0
    for gx in range(2):
        for gy in range(2):
            pos = np.array([gx * pitch, gy * pitch, 0], dtype=np.int64)
            vals = master[
                pos[0] : pos[0] + tile, pos[1] : pos[1] + tile, : tile
            ].copy()
            jitter = rng.integers(-4, 5, size=3)
            tiles.append(
                Tile(
                    id=tid,
                    stage_position=pos + jitter,
                    grids={0: VoxelGrid(values=vals, spacing=UNIT)},
                )
            )
            true_pos[tid] = pos
            tid += 1
    return master, tiles, true_pos


def test_montage_registration_recovers_injected_shifts():
    """20 synthetic 2x2 montages of 64³ tiles with 16-voxel overlaps and
    injected integer shifts of at most 8 per axis per pair: every shift is
    recovered exactly and the composite equals the master volume on all
    covered voxels. < 2 min."""
    t0 = time.perf_counter()
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        master, tiles, true_pos = _random_2x2_montage(rng)
        stage = {t.id: t.stage_position for t in tiles}
        sol = solve_montage(tiles, channel=0, window=8)
        root = sol.root
        for tid in true_pos:
            np.testing.assert_array_equal(
                sol.final_positions[tid] - sol.final_positions[root],
                true_pos[tid] - true_pos[root],
                err_msg=f"seed {seed} tile {tid}",
            )
        for e in sol.tree_edges:
            true_delta = (true_pos[e.tile_b] - true_pos[e.tile_a]) - (
                stage[e.tile_b] - stage[e.tile_a]
            )
            assert tuple(true_delta) == e.best_offset, f"seed {seed} edge {e}"
        fused = composite(tiles, sol)[0].values
        assert fused.shape == master.shape
        np.testing.assert_array_equal(fused, master, err_msg=f"seed {seed}")
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"took {elapsed:.1f} s"
    report(
        "montage registration",
        f"20/20 montages: all pairwise shifts exact, composites equal the "
        f"master volume ({elapsed:.1f} s < 120 s)",
    )


def _otsu_int_oracle(counts):
    """Exhaustive between-class-variance argmax in exact integer arithmetic.

    Scores a²/b are compared cross-multiplied with Python bigints, so the
    scan is exact; strict improvement keeps the lowest winning threshold.
    """
    counts = [int(c) for c in counts]
    csum, vsum = [], []
    c_acc = v_acc = 0
    for v, c in enumerate(counts):
        c_acc += c
        v_acc += v * c
        csum.append(c_acc)
        vsum.append(v_acc)
    total, grand = csum[-1], vsum[-1]
    best_t, best_num, best_den = None, -1, 1
    for t in range(len(counts) - 1):
        w0, w1 = csum[t], total - csum[t]
        if w0 == 0 or w1 == 0:
            continue
        a = vsum[t] * w1 - (grand - vsum[t]) * w0
        num, den = a * a, w0 * w1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def test_otsu_matches_exhaustive_variance_scan():
    """1000 random histograms (2–256 bins, random sparsity): the returned
    threshold equals exhaustive between-class-variance maximization, exactly."""
    rng = np.random.default_rng(505)
    for i in range(1000):
        n_bins = 256 if i % 10 == 0 else int(rng.integers(2, 257))
        counts = rng.integers(0, 60, n_bins)
        counts[rng.random(n_bins) < rng.uniform(0.0, 0.8)] = 0
        if np.count_nonzero(counts) < 2:
            counts[0] += 1
            counts[-1] += 7
        expected = _otsu_int_oracle(counts)
        if i < 50:  # validate the fast oracle against the rational-arithmetic one
            assert expected == otsu_oracle(counts)
        assert otsu_threshold(counts.astype(np.int64)) == expected, f"case {i}"
    report("otsu threshold", "1000/1000 histograms match the exhaustive scan exactly")


def test_distance_map_matches_brute_force():
    """100 random 16³ masks at anisotropic spacing (0.8, 0.8, 1.0) µm: the
    distance map equals the O(n²) brute-force oracle within 1e-9 µm."""
    rng = np.random.default_rng(606)
    worst = 0.0
    for i in range(100):
        density = rng.uniform(0.02, 0.5)
        mask = rng.random((16, 16, 16)) < density
        if not mask.any():
            mask[tuple(rng.integers(0, 16, 3))] = True
        dm = distance_map(mask, ANISO)
        err = float(np.max(np.abs(dm.values - edt_oracle(mask, ANISO))))
        assert err <= 1e-9, f"case {i}: max error {err}"
        worst = max(worst, err)
    report("distance map", f"100/100 masks within 1e-9 µm (worst {worst:.2e})")


def test_volume_filter_default_threshold_boundary():
    """At the default 19 µm³ minimum, a 10 µm³ component is discarded and a
    20 µm³ component is retained."""
    cfg = SegmentationConfig()
    assert cfg.min_volume_um3 == 19.0
    mask = np.zeros((40, 8, 8), dtype=bool)
    mask[1:11, 2, 2] = True  # 10 voxels = 10 µm³ at unit spacing
    mask[20:40, 2, 2] = True  # 20 voxels = 20 µm³
    dets = detections_from_mask(mask, UNIT, frame=0, min_volume_um3=cfg.min_volume_um3)
    assert len(dets) == 1
    kept = {tuple(v) for v in dets[0].voxels}
    assert kept == {(x, 2, 2) for x in range(20, 40)}
    report(
        "volume filter",
        "10 µm³ component discarded, 20 µm³ component retained at the 19 µm³ default",
    )


def test_mrf_denoise_contract():
    """20 random 32³ grids: the result stays within the estimated noise norm
    of the input; every iteration changes each voxel by exactly -step, 0, or
    +step; a constant grid returns unchanged in zero iterations."""
    for seed in range(20):
        values = np.random.default_rng(700 + seed).integers(0, 256, (32, 32, 32)).astype(float)
        state = mrf_denoise_state(VoxelGrid(values=values.copy(), spacing=UNIT))
        dist = float(np.linalg.norm(state.current.values - values))
        assert dist <= state.sigma_hat + 1e-9, f"seed {seed}: {dist} > {state.sigma_hat}"
        cur = values.copy()
        for _ in range(state.iteration):
            nxt = cur + state.delta * np.sign(_neighbor_sign_sum(cur))
            changes = set(np.round(np.unique(nxt - cur), 12))
            assert changes.issubset({-state.delta, 0.0, state.delta}), f"seed {seed}"
            cur = nxt
        np.testing.assert_array_equal(cur, state.current.values, err_msg=f"seed {seed}")

    flat = np.full((32, 32, 32), 7.0)
    state = mrf_denoise_state(VoxelGrid(values=flat.copy(), spacing=UNIT))
    assert state.iteration == 0
    np.testing.assert_array_equal(state.current.values, flat)
    report(
        "mrf denoise",
        "20/20 grids within the noise-norm bound with ±step-quantized "
        "iterations; constant grid unchanged in zero iterations",
    )


def test_split_propagation_and_replay(tmp_path):
    """On the 3-frame merged-cells scene, one user split auto-corrects exactly
    the 2 later frames and yields two full-length tracks; replaying the edit
    log reproduces the exported state byte-for-byte."""
    manifest = undersegmentation_experiment(tmp_path / "scene").manifest_path
    state = process_experiment(manifest)
    assert all(len(dets) == 1 for dets in state.detections_by_frame)
    target = state.detections_by_frame[0][0]
    record = apply_edit_and_propagate(
        state, EditRequest(revision=0, kind="split", detection_id=target.id, n=2)
    )
    assert [p.frame for p in record.propagation] == [1, 2]
    assert len(state.tracks) == 2
    for tr in state.tracks:
        assert [d.frame for d in tr.detections] == [0, 1, 2]

    export_results(state, tmp_path / "a")
    replayed = replay_session(manifest, state.config, state.edit_log)
    export_results(replayed, tmp_path / "b")
    a = read_tree_bytes(tmp_path / "a")
    b = read_tree_bytes(tmp_path / "b")
    assert a and a == b
    report(
        "edit propagation",
        f"split propagated to frames {[p.frame for p in record.propagation]}; "
        f"replay reproduced {len(a)} exported files byte-identically",
    )


def test_process_cli_byte_identical(tmp_path):
    """Running `process` twice on the same synthetic experiment produces
    byte-identical result files."""
    manifest = drifting_cells_experiment(tmp_path / "exp", n_cells=3, t_count=4, seed=7)
    runner = CliRunner()
    for sub in ("r1", "r2"):
        result = runner.invoke(
            main,
            ["process", "--manifest", str(manifest), "--out", str(tmp_path / sub)],
        )
        assert result.exit_code == 0, result.output
    r1 = read_tree_bytes(tmp_path / "r1")
    r2 = read_tree_bytes(tmp_path / "r2")
    assert r1 and r1 == r2
    report(
        "end-to-end determinism",
        f"two `process` runs produced {len(r1)} byte-identical result files",
    )
