"""5-D data model: voxel grids, experiment manifests, projections, transfer functions.

A frame is one (t, channel) pair stored as a grayscale multi-page TIFF whose
page k is z-slice k. Grids are indexed ``values[i, j, k]`` for voxel (x, y, z);
the physical position of voxel (i, j, k) is (i*dx, j*dy, k*dz) micrometers,
measured at the voxel center. Every module uses that convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tifffile

from .errors import FrameRangeError, ManifestError, ParameterError

CHANNEL_ROLES = ("cell", "vessel", "other")

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class VoxelSpacing:
    """Physical voxel pitch in micrometers along x, y, z."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name, v in (("dx", self.dx), ("dy", self.dy), ("dz", self.dz)):
            if not np.isfinite(v) or v <= 0:
                raise ManifestError(f"spacing {name} must be finite and positive, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz], dtype=float)

    @property
    def voxel_volume_um3(self) -> float:
        return self.dx * self.dy * self.dz


@dataclass(frozen=True)
class ChannelSpec:
    """One fluorescence channel and the pipeline route it takes."""

    index: int
    name: str
    role: str

    def __post_init__(self):
        if self.role not in CHANNEL_ROLES:
            raise ManifestError(f"channel role must be one of {CHANNEL_ROLES}, got {self.role!r}")


@dataclass(frozen=True)
class VoxelGrid:
    """One channel of one time point: a 3-D intensity array with physical spacing."""

    values: np.ndarray
    spacing: VoxelSpacing

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"grid must be 3-D, got shape {self.values.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def voxel_count(self) -> int:
        return int(self.values.size)

    def with_values(self, values: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(values=values, spacing=self.spacing)


@dataclass(frozen=True)
class TransferFunction:
    """Display remap: intensities below ``floor`` go to 0, above ``ceiling`` to 255,
    and a gamma curve shapes the range in between. ``alpha_multiplier`` scales
    channel opacity in the viewer and does not affect the mapped intensity."""

    floor: float = 0.0
    ceiling: float = 255.0
    gamma: float = 1.0
    alpha_multiplier: float = 1.0

    def __post_init__(self):
        if not self.floor < self.ceiling:
            raise ParameterError(f"transfer floor {self.floor} must be below ceiling {self.ceiling}")
        if self.gamma <= 0:
            raise ParameterError(f"transfer gamma must be positive, got {self.gamma}")
        if not 0.0 <= self.alpha_multiplier <= 2.0:
            raise ParameterError(f"alpha multiplier must be in [0, 2], got {self.alpha_multiplier}")


@dataclass
class ExperimentManifest:
    """Validated description of a 5-D experiment: geometry, channels, frame files."""

    spacing: VoxelSpacing
    frame_interval_min: float
    dims: tuple[int, int, int]
    channels: list[ChannelSpec]
    frames: dict[tuple[int, int], Path]
    t_count: int
    base_dir: Path = field(default_factory=Path)

    def channel_by_role(self, role: str) -> ChannelSpec | None:
        for ch in self.channels:
            if ch.role == role:
                return ch
        return None

    def channel_indices(self) -> list[int]:
        return [ch.index for ch in self.channels]

    def frame_path(self, t: int, channel: int) -> Path:
        if not 0 <= t < self.t_count:
            raise FrameRangeError(f"frame {t} out of range [0, {self.t_count})")
        if channel not in self.channel_indices():
            raise FrameRangeError(f"channel {channel} not declared in manifest")
        return self.frames[(t, channel)]


def _read_tiff_dims(path: Path) -> tuple[int, int, int]:
    """Dims (nx, ny, nz) of a multi-page TIFF without loading pixel data."""
    with tifffile.TiffFile(path) as tf:
        nz = len(tf.pages)
        page = tf.pages[0]
        ny, nx = page.shape[:2]
    return int(nx), int(ny), int(nz)


def load_manifest(path: str | Path) -> ExperimentManifest:
    """Load and fully validate an experiment manifest.

    Checks that every (t, channel) pair has exactly one file, that all files
    exist, and that each image's dimensions match the declared dims.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc

    for key in ("spacing_um", "dims", "channels", "frames"):
        if key not in raw:
            raise ManifestError(f"manifest missing required key {key!r}")

    spacing = VoxelSpacing(*[float(v) for v in raw["spacing_um"]])
    dims = tuple(int(v) for v in raw["dims"])
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ManifestError(f"dims must be three positive voxel counts, got {raw['dims']}")
    interval = float(raw.get("frame_interval_min", 0.0))

    channels = [
        ChannelSpec(index=int(c["index"]), name=str(c.get("name", f"ch{c['index']}")), role=str(c.get("role", "other")))
        for c in raw["channels"]
    ]
    indices = [c.index for c in channels]
    if len(set(indices)) != len(indices):
        raise ManifestError(f"duplicate channel indices in manifest: {indices}")

    base = path.parent
    frames: dict[tuple[int, int], Path] = {}
    for entry in raw["frames"]:
        t, ch = int(entry["t"]), int(entry["channel"])
        if ch not in indices:
            raise ManifestError(f"frame entry references undeclared channel {ch}")
        if (t, ch) in frames:
            raise ManifestError(f"duplicate frame entry for (t={t}, channel={ch})")
        frames[(t, ch)] = (base / entry["path"]).resolve()

    if not frames:
        raise ManifestError("manifest declares no frames")
    t_values = sorted({t for t, _ in frames})
    t_count = t_values[-1] + 1
    expected = {(t, ch) for t in range(t_count) for ch in indices}
    missing = expected - set(frames)
    if missing:
        raise ManifestError(f"manifest missing frame entries for (t, channel) pairs: {sorted(missing)[:5]}")

    for (t, ch), fpath in sorted(frames.items()):
        if not fpath.exists():
            raise ManifestError(f"image file not found for (t={t}, channel={ch}): {fpath}")
        file_dims = _read_tiff_dims(fpath)
        if file_dims != dims:
            raise ManifestError(
                f"image {fpath} has dims {file_dims}, manifest declares {dims}"
            )

    return ExperimentManifest(
        spacing=spacing,
        frame_interval_min=interval,
        dims=dims,
        channels=channels,
        frames=frames,
        t_count=t_count,
        base_dir=base,
    )


def load_tiff_volume(path: str | Path) -> np.ndarray:
    """Read a multi-page TIFF into an (nx, ny, nz) array, page k = z-slice k."""
    try:
        pages = tifffile.imread(path)
    except Exception as exc:
        raise ManifestError(f"failed to read image {path}: {exc}") from exc
    if pages.ndim == 2:
        pages = pages[np.newaxis, ...]
    # TIFF stacks arrive as (z, y, x); grids are indexed (x, y, z).
    return np.ascontiguousarray(pages.transpose(2, 1, 0))


def load_frame(manifest: ExperimentManifest, t: int, channel: int) -> VoxelGrid:
    """Load one (t, channel) frame as a VoxelGrid with the manifest's spacing."""
    fpath = manifest.frame_path(t, channel)
    grid = VoxelGrid(values=load_tiff_volume(fpath), spacing=manifest.spacing)
    if grid.dims != manifest.dims:
        raise ManifestError(f"image {fpath} has dims {grid.dims}, manifest declares {manifest.dims}")
    return grid


def save_grid(grid: VoxelGrid, path: str | Path) -> None:
    """Write a grid as a multi-page grayscale TIFF, page k = z-slice k."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tifffile.imwrite(
        path,
        np.ascontiguousarray(grid.values.transpose(2, 1, 0)),
        photometric="minisblack",
    )


def max_intensity_projection(grid: VoxelGrid, axis: str = "z") -> np.ndarray:
    """Project the volume to 2-D by taking the per-ray maximum along one axis.

    The output keeps the two remaining axes in x, y, z order: axis="z" yields
    an (nx, ny) array, axis="y" an (nx, nz) array, axis="x" an (ny, nz) array.
    """
    if axis not in _AXES:
        raise ParameterError(f"projection axis must be one of {tuple(_AXES)}, got {axis!r}")
    if grid.voxel_count == 0:
        raise ParameterError("cannot project an empty grid")
    return grid.values.max(axis=_AXES[axis])


def apply_transfer(values: np.ndarray | float, tf: TransferFunction) -> np.ndarray:
    """Map intensities through the display transfer function onto [0, 255].

    Values at or below the floor become 0, values at or above the ceiling
    become 255, and the interior follows a gamma curve with round-half-up
    rounding. Monotone non-decreasing by construction.
    """
    v = np.asarray(values, dtype=np.float64)
    span = tf.ceiling - tf.floor
    frac = np.clip((v - tf.floor) / span, 0.0, 1.0)
    mapped = np.floor(255.0 * np.power(frac, tf.gamma) + 0.5)
    return np.clip(mapped, 0, 255).astype(np.uint8)


def physical_coordinates(voxels: np.ndarray, spacing: VoxelSpacing) -> np.ndarray:
    """Voxel-center positions in micrometers for an (n, 3) index array."""
    return np.asarray(voxels, dtype=np.float64) * spacing.as_array()
