"""Deterministic synthetic experiments for tests, demos, and benchmarks.

Draws bright digital spheres (cells) and an axis-aligned cylinder (vessel)
onto dark volumes, writes them as multi-page TIFF stacks, and emits a
manifest describing the channels and frames. Everything is a pure function
of the arguments, so repeated generation is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import VoxelGrid, VoxelSpacing, save_grid


@dataclass(frozen=True)
class SyntheticCell:
    """One cell's center per frame (voxel coordinates); absent frames omit it."""

    centers: dict[int, tuple[float, float, float]]
    radius: float = 3.0
    intensity: int = 200


@dataclass(frozen=True)
class SyntheticVessel:
    """A cylinder spanning the volume along x at fixed (y, z)."""

    y: float
    z: float
    radius: float = 2.5
    intensity: int = 160


def _draw_ball(values: np.ndarray, center: tuple[float, float, float], radius: float, intensity: int) -> None:
    cx, cy, cz = center
    nx, ny, nz = values.shape
    x0, x1 = max(0, int(np.floor(cx - radius))), min(nx - 1, int(np.ceil(cx + radius)))
    y0, y1 = max(0, int(np.floor(cy - radius))), min(ny - 1, int(np.ceil(cy + radius)))
    z0, z1 = max(0, int(np.floor(cz - radius))), min(nz - 1, int(np.ceil(cz + radius)))
    if x0 > x1 or y0 > y1 or z0 > z1:
        return
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    zs = np.arange(z0, z1 + 1)
    dist2 = (
        (xs[:, None, None] - cx) ** 2
        + (ys[None, :, None] - cy) ** 2
        + (zs[None, None, :] - cz) ** 2
    )
    region = values[x0 : x1 + 1, y0 : y1 + 1, z0 : z1 + 1]
    np.maximum(region, np.where(dist2 <= radius**2, intensity, 0), out=region, casting="unsafe")


def _draw_cylinder_x(values: np.ndarray, y: float, z: float, radius: float, intensity: int) -> None:
    _, ny, nz = values.shape
    ys = np.arange(ny)
    zs = np.arange(nz)
    inside = ((ys[:, None] - y) ** 2 + (zs[None, :] - z) ** 2) <= radius**2
    np.maximum(values, np.where(inside, intensity, 0)[None, :, :], out=values, casting="unsafe")


def synthesize_experiment(
    out_dir: str | Path,
    cells: list[SyntheticCell],
    t_count: int,
    dims: tuple[int, int, int] = (40, 32, 12),
    spacing: tuple[float, float, float] = (0.8, 0.8, 1.0),
    vessel: SyntheticVessel | None = SyntheticVessel(y=6.0, z=6.0),
    frame_interval_min: float = 30.0,
) -> Path:
    """Render an experiment to ``out_dir`` and return its manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vs = VoxelSpacing(*spacing)

    channels = [{"index": 0, "name": "cells", "role": "cell"}]
    if vessel is not None:
        channels.append({"index": 1, "name": "vessels", "role": "vessel"})

    frames = []
    for t in range(t_count):
        cell_values = np.zeros(dims, dtype=np.uint8)
        for cell in cells:
            center = cell.centers.get(t)
            if center is not None:
                _draw_ball(cell_values, center, cell.radius, cell.intensity)
        name = f"t{t:03d}_c0.tif"
        save_grid(VoxelGrid(values=cell_values, spacing=vs), out / name)
        frames.append({"t": t, "channel": 0, "path": name})

        if vessel is not None:
            vessel_values = np.zeros(dims, dtype=np.uint8)
            _draw_cylinder_x(vessel_values, vessel.y, vessel.z, vessel.radius, vessel.intensity)
            name = f"t{t:03d}_c1.tif"
            save_grid(VoxelGrid(values=vessel_values, spacing=vs), out / name)
            frames.append({"t": t, "channel": 1, "path": name})

    manifest = {
        "spacing_um": list(spacing),
        "dims": list(dims),
        "frame_interval_min": frame_interval_min,
        "channels": channels,
        "frames": frames,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def drifting_cells_experiment(
    out_dir: str | Path,
    n_cells: int = 3,
    t_count: int = 5,
    dims: tuple[int, int, int] = (48, 40, 12),
    seed: int = 0,
) -> Path:
    """Well-separated cells drifting on straight lines; an easy scene."""
    rng = np.random.default_rng(seed)
    cells = []
    for k in range(n_cells):
        # Lanes keep cells at least ~8 voxels apart so detections never merge.
        y = 8.0 + 10.0 * k
        x0 = float(6 + rng.integers(0, 5))
        vx = float(rng.integers(2, 5))
        centers = {
            t: (x0 + vx * t, y, 6.0)
            for t in range(t_count)
            if x0 + vx * t < dims[0] - 4
        }
        cells.append(SyntheticCell(centers=centers, radius=2.6))
    required_y = 8.0 + 10.0 * (n_cells - 1) + 6
    if required_y > dims[1]:
        raise ValueError(f"dims[1]={dims[1]} too small for {n_cells} lanes")
    return synthesize_experiment(
        out_dir, cells, t_count, dims=dims, vessel=SyntheticVessel(y=3.0, z=6.0, radius=2.0)
    )


@dataclass(frozen=True)
class UndersegmentationScene:
    """Geometry of the two-touching-cells scene, for assertions."""

    manifest_path: Path
    t_count: int = 3
    cell_a_center: tuple[float, float, float] = (12.0, 22.0, 6.0)
    cell_b_center: tuple[float, float, float] = (16.0, 22.0, 6.0)


def undersegmentation_experiment(out_dir: str | Path) -> UndersegmentationScene:
    """Two touching cells that segment as one blob in every frame.

    Cells A and B overlap through all three frames, so their spheres fuse
    into a single connected component per frame. Splitting the frame-0 blob
    in two and letting the correction propagate should auto-split the blobs
    at frames 1 and 2 and leave two tracks spanning the whole sequence.
    The unequal radii keep the k-means partition stable across frames.
    """
    scene = UndersegmentationScene(manifest_path=Path())
    a = SyntheticCell(
        centers={t: scene.cell_a_center for t in range(scene.t_count)}, radius=3.0
    )
    b = SyntheticCell(
        centers={t: scene.cell_b_center for t in range(scene.t_count)}, radius=2.5
    )
    manifest_path = synthesize_experiment(
        out_dir,
        [a, b],
        t_count=scene.t_count,
        dims=(40, 32, 12),
        vessel=SyntheticVessel(y=6.0, z=6.0),
    )
    return UndersegmentationScene(manifest_path=manifest_path)
