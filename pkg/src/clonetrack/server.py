"""HTTP service exposing a correction session to browser clients.

Read endpoints serve the experiment summary, rendered frame projections,
per-frame detection overlays, and lineage payloads. The single write
endpoint applies edits under a process-wide lock with optimistic
concurrency: requests carry the revision they were built against and get
a 409 when the session has moved on. When a results directory is
attached, every successful edit is persisted back to it.
"""

from __future__ import annotations

import io
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from scipy.spatial import ConvexHull, QhullError

from .errors import EditError, FrameRangeError, ParameterError, StaleRevisionError
from .imaging import TransferFunction, apply_transfer, load_frame, max_intensity_projection, physical_coordinates
from .segment import Detection
from .session import EditRequest, SessionState, apply_edit_and_propagate, export_results

_AXIS_COLUMNS = {"x": (1, 2), "y": (0, 2), "z": (0, 1)}


class EditBody(BaseModel):
    revision: int
    kind: str
    detection_id: int
    n: int | None = None
    track_id: int | None = None


def _outline_2d(detection: Detection, spacing, axis: str) -> list[list[float]]:
    """Ordered outline (um) of the detection's hull projected along one axis."""
    keep = _AXIS_COLUMNS[axis]
    if detection.hull is not None and detection.hull.vertices_um.shape[0] >= 1:
        pts = np.asarray(detection.hull.vertices_um, dtype=np.float64)[:, keep]
    else:
        pts = physical_coordinates(detection.voxels, spacing)[:, keep]
    unique = np.unique(pts, axis=0)
    if unique.shape[0] <= 2:
        ordered = unique
    else:
        try:
            hull = ConvexHull(unique)
            ordered = unique[hull.vertices]  # counterclockwise
        except QhullError:  # collinear points: keep the two extremes
            direction = unique[-1] - unique[0]
            along = (unique - unique[0]) @ direction
            ordered = unique[[int(along.argmin()), int(along.argmax())]]
    return [[float(a), float(b)] for a, b in ordered]


def _tree_payload(state: SessionState, root: int) -> dict:
    members = state.forest.trees[root]
    track_by_id = {tr.id: tr for tr in state.tracks}
    member_set = set(members)
    return {
        "root": int(root),
        "members": [int(m) for m in members],
        "tracks": [
            {
                "id": int(m),
                "parent": (
                    None
                    if state.forest.parent[m] is None
                    else int(state.forest.parent[m])
                ),
                "status": track_by_id[m].status,
                "birth_frame": int(track_by_id[m].birth_frame),
                "end_frame": int(track_by_id[m].last_extended_frame),
                "detections": [
                    {"frame": int(d.frame), "detection_id": int(d.id)}
                    for d in track_by_id[m].detections
                ],
                "vessel_series": [
                    [int(f), float(v)] for f, v in state.vessel_series.get(m, [])
                ],
            }
            for m in members
        ],
        "cleavage_planes": [
            p for p in state.cleavage_planes if p["parent"] in member_set
        ],
    }


def create_app(
    state: SessionState,
    results_dir: str | Path | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    """Build the API application around one session."""
    app = FastAPI(title="clonetrack session")
    edit_lock = threading.Lock()
    manifest = state.manifest

    @app.get("/api/experiment")
    def experiment() -> dict:
        return {
            "dims": list(manifest.dims),
            "spacing_um": [manifest.spacing.dx, manifest.spacing.dy, manifest.spacing.dz],
            "frame_interval_min": manifest.frame_interval_min,
            "t_count": manifest.t_count,
            "channels": [
                {"index": ch.index, "name": ch.name, "role": ch.role}
                for ch in manifest.channels
            ],
            "revision": state.revision,
            "track_count": len(state.tracks),
            "tree_count": len(state.forest.trees),
        }

    @app.get("/api/frames/{t}/projection")
    def projection(
        t: int,
        channel: int | None = Query(default=None),
        axis: str = Query(default="z"),
        floor: float = Query(default=0.0),
        ceiling: float | None = Query(default=None),
        gamma: float = Query(default=1.0),
    ) -> Response:
        if axis not in _AXIS_COLUMNS:
            raise HTTPException(status_code=422, detail=f"axis must be x, y, or z, got {axis!r}")
        if channel is None:
            channel = manifest.channel_by_role("cell").index
        try:
            grid = load_frame(manifest, t, channel)
        except FrameRangeError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        proj = max_intensity_projection(grid, axis)
        if ceiling is None:
            ceiling = max(float(grid.values.max()), floor + 1.0)
        try:
            tf = TransferFunction(floor=floor, ceiling=ceiling, gamma=gamma)
        except ParameterError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        from PIL import Image

        buf = io.BytesIO()
        # Image rows are the second kept axis, columns the first.
        Image.fromarray(apply_transfer(proj, tf).T).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/api/frames/{t}/detections")
    def frame_detections(t: int, axis: str = Query(default="z")) -> dict:
        if axis not in _AXIS_COLUMNS:
            raise HTTPException(status_code=422, detail=f"axis must be x, y, or z, got {axis!r}")
        if not 0 <= t < manifest.t_count:
            raise HTTPException(status_code=404, detail=f"frame {t} out of range")
        track_of_det: dict[int, int] = {}
        for tr in state.tracks:
            for d in tr.detections:
                track_of_det[d.id] = tr.id
        out = []
        for det in state.detections_by_frame[t]:
            track_id = track_of_det.get(det.id)
            tree_id = None if track_id is None else state.forest.root_of(track_id)
            out.append(
                {
                    "id": int(det.id),
                    "track_id": track_id,
                    "tree_id": tree_id,
                    "centroid_um": [float(c) for c in det.centroid_um],
                    "volume_um3": float(det.volume_um3),
                    "voxel_count": int(det.voxel_count),
                    "outline_um": _outline_2d(det, manifest.spacing, axis),
                }
            )
        return {"frame": t, "axis": axis, "revision": state.revision, "detections": out}

    @app.get("/api/lineage/presented")
    def lineage_presented() -> dict:
        trees = [
            {"root": int(root), "size": len(state.forest.trees[root])}
            for root in sorted(state.forest.trees)
        ]
        presented = state.forest.presented_tree
        return {
            "revision": state.revision,
            "trees": trees,
            "presented": None if presented is None else _tree_payload(state, presented),
        }

    @app.get("/api/lineage/{tree_id}")
    def lineage_tree(tree_id: int) -> dict:
        if tree_id not in state.forest.trees:
            raise HTTPException(status_code=404, detail=f"no tree rooted at {tree_id}")
        payload = _tree_payload(state, tree_id)
        payload["revision"] = state.revision
        return payload

    @app.get("/api/edits")
    def list_edits() -> dict:
        return {
            "revision": state.revision,
            "edits": [record.to_dict() for record in state.edit_log],
        }

    @app.post("/api/edits")
    def post_edit(body: EditBody) -> dict:
        with edit_lock:
            try:
                record = apply_edit_and_propagate(
                    state,
                    EditRequest(
                        revision=body.revision,
                        kind=body.kind,
                        detection_id=body.detection_id,
                        n=body.n,
                        track_id=body.track_id,
                    ),
                )
            except StaleRevisionError as exc:
                raise HTTPException(
                    status_code=409,
                    detail={"expected": exc.expected, "got": exc.got},
                ) from exc
            except (EditError, ParameterError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            if results_dir is not None:
                export_results(state, results_dir, projections=False)
            return {"revision": state.revision, "record": record.to_dict()}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
