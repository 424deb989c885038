"""Per-frame cell and vessel segmentation.

Cells: Otsu binarization, morphological closing with a ball element,
26-connected components, a physical-volume filter, and a convex hull per
surviving component. Vessels: the same binarization and closing, then an
exact anisotropic Euclidean distance map instead of per-object splitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateHistogramError, EmptyDistanceMapError, ParameterError
from .imaging import VoxelGrid, VoxelSpacing, physical_coordinates

FULL_CONNECTIVITY = np.ones((3, 3, 3), dtype=bool)  # 26-connected


@dataclass(frozen=True)
class SegmentationConfig:
    """Cell segmentation knobs; connectivity is fixed at 26."""

    min_volume_um3: float = 19.0
    closing_radius: int = 1

    def __post_init__(self):
        if self.min_volume_um3 < 0:
            raise ParameterError(f"min volume must be >= 0, got {self.min_volume_um3}")
        if self.closing_radius < 0:
            raise ParameterError(f"closing radius must be >= 0, got {self.closing_radius}")


@dataclass(eq=False)
class HullMesh:
    """Convex hull of a detection's voxel centers, in physical coordinates.

    ``flat`` marks degenerate (collinear/coplanar) voxel sets whose hull has
    zero volume; such hulls keep their vertex list but carry no facets.
    """

    vertices_um: np.ndarray
    facets: np.ndarray
    flat: bool = False
    equations: np.ndarray | None = None

    def contains(self, points_um: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        if self.flat or self.equations is None:
            raise ValueError("containment test undefined for a flat hull")
        pts = np.atleast_2d(points_um)
        signed = pts @ self.equations[:, :3].T + self.equations[:, 3]
        return signed.max(axis=1) <= tol


@dataclass(eq=False)
class Detection:
    """One segmented cell in one frame."""

    id: int
    frame: int
    voxels: np.ndarray  # (n, 3) int indices
    centroid_um: np.ndarray
    volume_um3: float
    hull: HullMesh | None = None

    @property
    def voxel_count(self) -> int:
        return int(self.voxels.shape[0])

    def voxel_set(self) -> set[tuple[int, int, int]]:
        return {tuple(v) for v in self.voxels.tolist()}


@dataclass
class DistanceMap:
    """Per-voxel Euclidean distance in micrometers to the nearest vessel voxel."""

    values: np.ndarray
    spacing: VoxelSpacing
    empty: bool = False

    def at_voxel(self, i: int, j: int, k: int) -> float:
        if self.empty:
            raise EmptyDistanceMapError("distance map has no foreground")
        return float(self.values[i, j, k])

    def at_point_um(self, point_um: np.ndarray) -> float:
        """Nearest-index lookup of a physical point."""
        if self.empty:
            raise EmptyDistanceMapError("distance map has no foreground")
        idx = np.rint(np.asarray(point_um, dtype=float) / self.spacing.as_array()).astype(int)
        idx = np.clip(idx, 0, np.array(self.values.shape) - 1)
        return float(self.values[tuple(idx)])


def otsu_threshold(histogram: np.ndarray) -> int:
    """Threshold maximizing between-class variance of [0..t] vs [t+1..max].

    Exhaustive over all candidate thresholds; ties resolve to the lowest t.
    The comparison is exact (integer arithmetic decides near-ties), so the
    result is independent of float rounding. Foreground is values > t.
    """
    counts = np.asarray(histogram, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 2:
        raise DegenerateHistogramError(f"histogram must be 1-D with >= 2 bins, got shape {counts.shape}")
    if (counts > 0).sum() < 2:
        raise DegenerateHistogramError("histogram has fewer than 2 non-empty bins")

    bins = np.arange(counts.size, dtype=np.int64)
    w0 = np.cumsum(counts)
    s0 = np.cumsum(counts * bins)
    total_w = w0[-1]
    total_s = s0[-1]
    w1 = total_w - w0
    s1 = total_s - s0

    # Between-class variance numerator (s0*w1 - s1*w0)^2 over denominator w0*w1.
    with np.errstate(divide="ignore", invalid="ignore"):
        num = (s0 * w1 - s1 * w0).astype(np.float64) ** 2
        den = (w0 * w1).astype(np.float64)
        score = np.where(den > 0, num / den, 0.0)
    score = score[:-1]  # t = last bin leaves an empty upper class

    best = float(score.max())
    if best <= 0.0:
        candidates = np.arange(score.size)
    else:
        candidates = np.nonzero(score >= best * (1.0 - 1e-9))[0]

    # Exact comparison among float near-ties: f(t) = A^2/B as rationals.
    def exact_key(t: int) -> tuple[int, int]:
        a = int(s0[t]) * int(w1[t]) - int(s1[t]) * int(w0[t])
        b = int(w0[t]) * int(w1[t])
        return a * a, b

    best_t = None
    best_a2, best_b = -1, 1
    for t in candidates:
        a2, b = exact_key(int(t))
        if b == 0:
            continue
        # a2/b > best_a2/best_b  <=>  a2*best_b > best_a2*b
        if best_t is None or a2 * best_b > best_a2 * b:
            best_t = int(t)
            best_a2, best_b = a2, b
    if best_t is None:
        best_t = 0
    return best_t


def intensity_histogram(grid: VoxelGrid) -> np.ndarray:
    """256- or 65536-bin histogram of a (possibly float-valued) denoised grid.

    Values are rounded to the nearest integer and clipped at zero; the bin
    count follows the value range (8-bit unless the maximum exceeds 255).
    """
    quantized = np.rint(np.asarray(grid.values, dtype=np.float64))
    quantized = np.clip(quantized, 0, 65535).astype(np.int64)
    n_bins = 256 if quantized.max() <= 255 else 65536
    return np.bincount(quantized.ravel(), minlength=n_bins)


def ball_element(radius: int) -> np.ndarray:
    """Binary ball structuring element of the given voxel radius."""
    if radius == 0:
        return np.ones((1, 1, 1), dtype=bool)
    r = np.arange(-radius, radius + 1)
    x, y, z = np.meshgrid(r, r, r, indexing="ij")
    return (x * x + y * y + z * z) <= radius * radius


def morphological_closing(mask: np.ndarray, radius: int) -> np.ndarray:
    """Closing with a ball element on an implicit zero-padded infinite domain.

    Padding by the element radius before dilate/erode keeps the operation
    idempotent and free of image-border artifacts.
    """
    if radius == 0 or not mask.any():
        return mask.copy()
    ball = ball_element(radius)
    pad = radius + 1
    padded = np.pad(mask, pad, mode="constant", constant_values=False)
    dilated = ndimage.binary_dilation(padded, structure=ball)
    closed = ndimage.binary_erosion(dilated, structure=ball)
    sl = tuple(slice(pad, -pad) for _ in range(3))
    return closed[sl]


def binarize(grid: VoxelGrid) -> np.ndarray:
    """Otsu-threshold a denoised grid into a foreground mask.

    An all-zero grid yields an empty mask; any other single-valued grid has
    no separable classes and raises DegenerateHistogramError.
    """
    hist = intensity_histogram(grid)
    if (hist > 0).sum() < 2:
        if hist[0] == hist.sum():
            return np.zeros(grid.dims, dtype=bool)
        raise DegenerateHistogramError("frame is constant; no threshold separates it")
    t = otsu_threshold(hist)
    return np.rint(np.asarray(grid.values, dtype=np.float64)) > t


def _component_voxels(labels: np.ndarray, n_labels: int) -> list[np.ndarray]:
    """Per-label (n, 3) voxel index arrays, in label order."""
    coords = np.argwhere(labels > 0)
    if coords.size == 0:
        return [np.empty((0, 3), dtype=np.int64) for _ in range(n_labels)]
    lab = labels[tuple(coords.T)]
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0], lab))
    coords = coords[order]
    lab = lab[order]
    boundaries = np.searchsorted(lab, np.arange(1, n_labels + 2))
    return [coords[boundaries[i] : boundaries[i + 1]] for i in range(n_labels)]


def compute_hull(voxels: np.ndarray, spacing: VoxelSpacing) -> HullMesh:
    """Convex hull of voxel centers in physical coordinates.

    Degenerate point sets (fewer than 4 points, or collinear/coplanar) fall
    back to a flat hull carrying the points as vertices and no facets.
    """
    points = physical_coordinates(voxels, spacing)
    if points.shape[0] >= 4:
        try:
            hull = ConvexHull(points)
            return HullMesh(
                vertices_um=points[hull.vertices],
                facets=hull.simplices.copy(),
                flat=False,
                equations=hull.equations.copy(),
            )
        except QhullError:
            pass
    unique = np.unique(points, axis=0)
    return HullMesh(vertices_um=unique, facets=np.empty((0, 3), dtype=np.int64), flat=True)


def detections_from_mask(
    mask: np.ndarray,
    spacing: VoxelSpacing,
    frame: int,
    min_volume_um3: float,
    id_start: int = 0,
) -> list[Detection]:
    """Label a foreground mask and build volume-filtered detections.

    Survivors are ordered by voxel count descending (ties by lowest voxel
    index) and receive consecutive ids starting at ``id_start``.
    """
    labels, n_labels = ndimage.label(mask, structure=FULL_CONNECTIVITY)
    voxel_volume = spacing.voxel_volume_um3
    groups = []
    for vox in _component_voxels(labels, n_labels):
        volume = vox.shape[0] * voxel_volume
        if volume < min_volume_um3:
            continue
        groups.append(vox)
    groups.sort(key=lambda v: (-v.shape[0], tuple(v[0])))
    detections = []
    for offset, vox in enumerate(groups):
        centroid = physical_coordinates(vox, spacing).mean(axis=0)
        detections.append(
            Detection(
                id=id_start + offset,
                frame=frame,
                voxels=vox,
                centroid_um=centroid,
                volume_um3=vox.shape[0] * voxel_volume,
                hull=compute_hull(vox, spacing),
            )
        )
    return detections


def segment_cell_channel(
    grid: VoxelGrid,
    config: SegmentationConfig | None = None,
    frame: int = 0,
    id_start: int = 0,
) -> list[Detection]:
    """Segment a denoised cell-channel frame into detections."""
    config = config or SegmentationConfig()
    mask = binarize(grid)
    mask = morphological_closing(mask, config.closing_radius)
    return detections_from_mask(mask, grid.spacing, frame, config.min_volume_um3, id_start)


def distance_map(vessel_mask: np.ndarray, spacing: VoxelSpacing) -> DistanceMap:
    """Exact Euclidean distance transform in physical units.

    Zero on foreground; an empty mask is returned flagged with +inf values
    rather than raising, and consumers treat that as an error state.
    """
    mask = np.asarray(vessel_mask, dtype=bool)
    if mask.size == 0:
        raise ParameterError("mask has no voxels")
    if not mask.any():
        return DistanceMap(values=np.full(mask.shape, np.inf), spacing=spacing, empty=True)
    dist = ndimage.distance_transform_edt(~mask, sampling=(spacing.dx, spacing.dy, spacing.dz))
    return DistanceMap(values=dist, spacing=spacing, empty=False)


def segment_vessel_channel(
    grid: VoxelGrid,
    config: SegmentationConfig | None = None,
) -> tuple[np.ndarray, DistanceMap]:
    """Segment a denoised vessel-channel frame into a mask and distance map.

    Vessels are one structure: no volume filter, no per-object splitting.
    """
    config = config or SegmentationConfig()
    mask = binarize(grid)
    mask = morphological_closing(mask, config.closing_radius)
    return mask, distance_map(mask, grid.spacing)


def encode_voxel_runs(voxels: np.ndarray) -> list[list[int]]:
    """Run-length encode an (n, 3) voxel index array along z as [i, j, k0, length]."""
    if voxels.shape[0] == 0:
        return []
    v = voxels[np.lexsort((voxels[:, 2], voxels[:, 1], voxels[:, 0]))]
    runs = []
    run_start = v[0]
    run_len = 1
    for prev, cur in zip(v[:-1], v[1:]):
        if cur[0] == prev[0] and cur[1] == prev[1] and cur[2] == prev[2] + 1:
            run_len += 1
        else:
            runs.append([int(run_start[0]), int(run_start[1]), int(run_start[2]), run_len])
            run_start = cur
            run_len = 1
    runs.append([int(run_start[0]), int(run_start[1]), int(run_start[2]), run_len])
    return runs


def decode_voxel_runs(runs: list[list[int]]) -> np.ndarray:
    """Inverse of encode_voxel_runs."""
    if not runs:
        return np.empty((0, 3), dtype=np.int64)
    chunks = [
        np.stack(
            [np.full(length, i), np.full(length, j), np.arange(k0, k0 + length)],
            axis=1,
        )
        for i, j, k0, length in runs
    ]
    return np.concatenate(chunks).astype(np.int64)
