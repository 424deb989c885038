"""Command-line entry points: process experiments, fuse montages, serve sessions."""

from __future__ import annotations

from pathlib import Path

import click

from .errors import ClonetrackError


def _parse_weights(_ctx, _param, value):
    if value is None:
        return None
    try:
        return tuple(float(w) for w in value.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"weights must be comma-separated numbers, got {value!r}") from exc


@click.group()
def main():
    """Live-cell analysis: denoise, segment, track, lineage, and correction."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path), help="Experiment manifest JSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path), help="Results directory to write.")
@click.option("--cell-sigma-um", default=10.0, show_default=True, help="Background scale for the cell-channel denoise.")
@click.option("--median-radius", default=1, show_default=True, help="Median filter half-width in voxels.")
@click.option("--min-volume-um3", default=19.0, show_default=True, help="Smallest detection volume kept.")
@click.option("--closing-radius", default=1, show_default=True, help="Morphological closing radius in voxels.")
@click.option("--window", default=4, show_default=True, help="Tracking lookahead window in frames.")
@click.option("--weights", callback=_parse_weights, default=None, help="Comma-separated per-step weights (window+1 values).")
@click.option("--patience", default=None, type=int, help="Frames a track survives unmatched (default window-1).")
@click.option("--gate-um", default=50.0, show_default=True, help="Max parent-to-newborn distance for lineage.")
@click.option("--seed", default=0, show_default=True, help="Seed for deterministic split operations.")
def process(manifest_path, out_dir, cell_sigma_um, median_radius, min_volume_um3,
            closing_radius, window, weights, patience, gate_um, seed):
    """Run the full pipeline on an experiment and export results."""
    from .session import PipelineConfig, export_results, process_experiment

    config = PipelineConfig(
        cell_sigma_um=cell_sigma_um,
        median_radius=median_radius,
        min_volume_um3=min_volume_um3,
        closing_radius=closing_radius,
        window=window,
        weights=weights if weights is not None else tuple([1.0, 3.0] + [1.0] * (window - 1)),
        occlusion_patience=patience,
        spatial_gate_um=gate_um,
        session_seed=seed,
    )
    try:
        state = process_experiment(manifest_path, config)
        export_results(state, out_dir)
    except ClonetrackError as exc:
        raise click.ClickException(str(exc)) from exc
    n_dets = sum(len(d) for d in state.detections_by_frame)
    click.echo(f"frames: {state.manifest.t_count}")
    click.echo(f"detections: {n_dets}")
    click.echo(f"tracks: {len(state.tracks)}")
    click.echo(f"trees: {len(state.forest.trees)}")
    click.echo(f"results: {out_dir}")


@main.command()
@click.option("--tiles", "tiles_path", required=True, type=click.Path(exists=True, path_type=Path), help="Tile-set manifest JSON.")
@click.option("--channel", required=True, type=int, help="Channel used for registration.")
@click.option("--window", default=8, show_default=True, help="Max per-axis offset searched, in voxels.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path), help="Directory for the fused volumes.")
def montage(tiles_path, channel, window, out_dir):
    """Register a tile set and write the fused per-channel volumes."""
    import json

    from .imaging import save_grid
    from .montage import composite, load_tile_manifest, solve_montage

    try:
        tiles, _spacing = load_tile_manifest(tiles_path)
        solution = solve_montage(tiles, channel=channel, window=window)
        fused = composite(tiles, solution)
    except ClonetrackError as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ch, grid in sorted(fused.items()):
        save_grid(grid, out / f"fused_c{ch}.tif")
    positions = {
        "root": solution.root,
        "final_positions_vox": {
            str(tid): [int(v) for v in pos]
            for tid, pos in sorted(solution.final_positions.items())
        },
        "tree_edges": [
            {
                "a": e.tile_a,
                "b": e.tile_b,
                "offset_vox": [int(v) for v in e.best_offset],
                "score": e.score,
            }
            for e in solution.tree_edges
        ],
    }
    (out / "positions.json").write_text(json.dumps(positions, sort_keys=True, indent=2) + "\n")
    click.echo(f"tiles: {len(tiles)}")
    click.echo(f"root: {solution.root}")
    click.echo(f"fused channels: {sorted(fused)}")
    click.echo(f"results: {out}")


@main.command()
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True, path_type=Path), help="Results directory from `process`.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path(path_type=Path), help="Directory of built UI assets to serve at /.")
def serve(results_dir, host, port, frontend_dir):
    """Serve a processed experiment for interactive validation and correction."""
    import uvicorn

    from .server import create_app
    from .session import import_results

    try:
        state = import_results(results_dir)
    except ClonetrackError as exc:
        raise click.ClickException(str(exc)) from exc
    if frontend_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = bundled if bundled.is_dir() else None
    app = create_app(state, results_dir=results_dir, frontend_dir=frontend_dir)
    click.echo(f"revision {state.revision}, {len(state.tracks)} tracks; listening on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path), help="Directory for the generated experiment.")
@click.option("--scene", default="drift", show_default=True, type=click.Choice(["drift", "underseg"]), help="drift: separated moving cells; underseg: two touching cells.")
@click.option("--cells", default=3, show_default=True, help="Cell count (drift scene).")
@click.option("--frames", default=5, show_default=True, help="Frame count (drift scene).")
@click.option("--seed", default=0, show_default=True, help="Scene layout seed (drift scene).")
def synth(out_dir, scene, cells, frames, seed):
    """Generate a small deterministic demo experiment."""
    from .synth import drifting_cells_experiment, undersegmentation_experiment

    if scene == "drift":
        manifest = drifting_cells_experiment(out_dir, n_cells=cells, t_count=frames, seed=seed)
    else:
        manifest = undersegmentation_experiment(out_dir).manifest_path
    click.echo(f"manifest: {manifest}")


if __name__ == "__main__":
    main()
