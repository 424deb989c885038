"""Exception types shared across the pipeline."""


class ClonetrackError(Exception):
    """Base class for all pipeline errors."""


class ManifestError(ClonetrackError):
    """Experiment or tile manifest is malformed or inconsistent with its images."""


class FrameRangeError(ClonetrackError):
    """Requested frame index or channel is not declared in the manifest."""


class ParameterError(ClonetrackError):
    """A processing parameter is outside its valid range for the given input."""


class DegenerateHistogramError(ClonetrackError):
    """Histogram has fewer than two non-empty bins; no threshold separates it."""


class RegistrationError(ClonetrackError):
    """Tile pair has no overlap at any searched offset."""


class DisconnectedMontageError(ClonetrackError):
    """Overlap graph does not connect all tiles."""

    def __init__(self, unreachable: list):
        self.unreachable = sorted(unreachable)
        super().__init__(f"tiles not reachable from the overlap graph: {self.unreachable}")


class EmptyDistanceMapError(ClonetrackError):
    """Distance map has no foreground; distances are undefined."""


class EditError(ClonetrackError):
    """Edit request targets a detection or track that does not exist."""


class StaleRevisionError(ClonetrackError):
    """Edit was issued against an out-of-date session revision."""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"stale revision {got}, session is at {expected}")
