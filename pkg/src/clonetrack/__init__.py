"""clonetrack: segmentation, tracking, lineaging, and correction of 5-D live-cell imagery."""

from .denoise import CellDenoiseParams, denoise_cell_channel, mrf_denoise
from .errors import (
    ClonetrackError,
    DegenerateHistogramError,
    DisconnectedMontageError,
    EditError,
    EmptyDistanceMapError,
    FrameRangeError,
    ManifestError,
    ParameterError,
    RegistrationError,
    StaleRevisionError,
)
from .imaging import (
    ChannelSpec,
    ExperimentManifest,
    TransferFunction,
    VoxelGrid,
    VoxelSpacing,
    load_frame,
    load_manifest,
)
from .lineage import LineageConfig, LineageForest, build_lineages, vessel_distance_series
from .montage import MontageSolution, composite, register_pair, solve_montage
from .segment import (
    Detection,
    DistanceMap,
    SegmentationConfig,
    segment_cell_channel,
    segment_vessel_channel,
)
from .session import (
    EditRecord,
    EditRequest,
    PipelineConfig,
    SessionState,
    apply_edit_and_propagate,
    export_results,
    import_results,
    process_experiment,
    replay_session,
    split_detection,
)
from .track import CostGraph, Track, TrackingConfig, track_sequence

__version__ = "0.1.0"

__all__ = [
    "CellDenoiseParams",
    "ChannelSpec",
    "ClonetrackError",
    "CostGraph",
    "DegenerateHistogramError",
    "Detection",
    "DisconnectedMontageError",
    "DistanceMap",
    "EditError",
    "EditRecord",
    "EditRequest",
    "EmptyDistanceMapError",
    "ExperimentManifest",
    "FrameRangeError",
    "LineageConfig",
    "LineageForest",
    "ManifestError",
    "MontageSolution",
    "ParameterError",
    "PipelineConfig",
    "RegistrationError",
    "SegmentationConfig",
    "SessionState",
    "StaleRevisionError",
    "Track",
    "TrackingConfig",
    "TransferFunction",
    "VoxelGrid",
    "VoxelSpacing",
    "apply_edit_and_propagate",
    "build_lineages",
    "composite",
    "denoise_cell_channel",
    "export_results",
    "import_results",
    "load_frame",
    "load_manifest",
    "mrf_denoise",
    "process_experiment",
    "register_pair",
    "replay_session",
    "segment_cell_channel",
    "segment_vessel_channel",
    "solve_montage",
    "split_detection",
    "track_sequence",
    "vessel_distance_series",
]
