import { ApiClient } from "./api.js";
import { EditController } from "./edits.js";
import {
  axisColumns,
  colorForTrack,
  drawOverlay,
  fromCanvas,
  hitTest,
  wheelStep,
} from "./projection.js";
import {
  clampFrame,
  initialViewState,
  selectDetection,
  selectTrack,
  setFrame,
  setRevision,
  setTransfer,
  stepFrame,
  type ViewState,
} from "./state.js";
import { layoutTree, renderTree } from "./tree.js";
import type { Axis, Experiment, FrameDetections, TreePayload } from "./types.js";

const api = new ApiClient("");
const edits = new EditController(api);

let exp: Experiment;
let state: ViewState;
let currentTree: TreePayload | null = null;
let currentDetections: FrameDetections | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

function imageScale(): number {
  const [c0, c1] = axisColumns(state.axis);
  const w = exp.dims[c0];
  const h = exp.dims[c1];
  return Math.max(1, Math.floor(560 / Math.max(w, h)));
}

function buildChannelControls(): void {
  const host = $("channel-controls");
  host.textContent = "";
  for (const ch of exp.channels) {
    const row = document.createElement("div");
    row.className = "channel-row";

    const label = document.createElement("label");
    const visible = document.createElement("input");
    visible.type = "checkbox";
    visible.checked = true;
    visible.addEventListener("change", () => {
      state = setTransfer(state, ch.index, { visible: visible.checked });
      void refreshImages();
    });
    label.append(visible, ` ${ch.name} (${ch.role})`);
    row.appendChild(label);

    const addSlider = (
      name: string,
      min: number,
      max: number,
      step: number,
      value: number,
      apply: (v: number) => void,
    ) => {
      const wrap = document.createElement("label");
      wrap.className = "slider";
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(min);
      input.max = String(max);
      input.step = String(step);
      input.value = String(value);
      input.addEventListener("input", () => {
        apply(Number(input.value));
        void refreshImages();
      });
      wrap.append(`${name} `, input);
      row.appendChild(wrap);
    };

    addSlider("floor", 0, 255, 1, 0, (v) => {
      state = setTransfer(state, ch.index, { floor: v });
    });
    addSlider("ceiling", 1, 255, 1, 255, (v) => {
      state = setTransfer(state, ch.index, { ceiling: v });
    });
    addSlider("gamma", 0.2, 3, 0.05, 1, (v) => {
      state = setTransfer(state, ch.index, { gamma: v });
    });
    host.appendChild(row);
  }
}

async function refreshImages(): Promise<void> {
  const stack = $("image-stack");
  const scale = imageScale();
  const [c0, c1] = axisColumns(state.axis);
  const w = exp.dims[c0] * scale;
  const h = exp.dims[c1] * scale;
  stack.style.width = `${w}px`;
  stack.style.height = `${h}px`;

  let canvas = stack.querySelector("canvas");
  for (const ch of exp.channels) {
    const id = `channel-img-${ch.index}`;
    let img = document.getElementById(id) as HTMLImageElement | null;
    const view = state.transfer[ch.index];
    if (!view.visible) {
      img?.remove();
      continue;
    }
    if (!img) {
      img = document.createElement("img");
      img.id = id;
      img.className = "channel-img";
      img.alt = `channel ${ch.index} projection`;
      stack.insertBefore(img, canvas);
    }
    img.width = w;
    img.height = h;
    img.src = api.projectionUrl(state.frame, {
      channel: ch.index,
      axis: state.axis,
      floor: view.floor,
      ceiling: view.ceiling,
      gamma: view.gamma,
    });
  }

  if (!canvas) {
    canvas = document.createElement("canvas");
    canvas.id = "overlay-canvas";
    stack.appendChild(canvas);
    canvas.addEventListener("click", (e) => {
      if (!currentDetections) return;
      const pt = fromCanvas([e.offsetX, e.offsetY], overlayOpts());
      const det = hitTest(currentDetections.detections, pt);
      state = selectDetection(state, det);
      renderSelection();
      renderOverlay();
      renderLineage();
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const next = stepFrame(state, wheelStep(e.deltaY));
      if (next.frame !== state.frame) {
        state = next;
        void refreshFrame();
      }
    });
  }
  canvas.width = w;
  canvas.height = h;
  renderOverlay();
}

function overlayOpts() {
  return {
    spacing: exp.spacing_um,
    axis: state.axis,
    scale: imageScale(),
    selectedDetection: state.selectedDetection,
    selectedTrack: state.selectedTrack,
  };
}

function renderOverlay(): void {
  const canvas = document.getElementById("overlay-canvas") as HTMLCanvasElement | null;
  if (!canvas || !currentDetections) return;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  drawOverlay(ctx, currentDetections.detections, overlayOpts());
}

function renderSelection(): void {
  const info = $("selection-info");
  if (state.selectedDetection === null) {
    info.textContent = "Nothing selected — click a cell outline or a track line.";
    return;
  }
  const det = currentDetections?.detections.find((d) => d.id === state.selectedDetection);
  const vol = det ? ` · ${det.volume_um3.toFixed(1)} µm³` : "";
  info.textContent =
    `detection ${state.selectedDetection} · track ${state.selectedTrack ?? "—"}` +
    ` · tree ${state.selectedTree ?? "—"}${vol}`;
}

function renderLineage(): void {
  const svg = $("tree-svg") as unknown as SVGSVGElement;
  if (!currentTree) return;
  const layout = layoutTree(currentTree, {
    width: Number(svg.getAttribute("width") ?? 380),
    height: Number(svg.getAttribute("height") ?? 600),
    tCount: exp.t_count,
  });
  renderTree(svg, layout, {
    selectedTrack: state.selectedTrack,
    cursorFrame: state.frame,
    colorFor: colorForTrack,
    onPickFrame: (t) => {
      state = setFrame(state, t);
      void refreshFrame();
    },
    onPickTrack: (trackId) => {
      state = selectTrack(state, trackId, currentTree?.root ?? null);
      renderSelection();
      renderOverlay();
      renderLineage();
    },
  });
}

function renderRevision(): void {
  $("revision-badge").textContent = `revision ${state.revision}`;
  const slider = $("frame-slider") as HTMLInputElement;
  slider.max = String(Math.max(0, exp.t_count - 1));
  slider.value = String(state.frame);
  $("frame-label").textContent = `t = ${state.frame} / ${exp.t_count - 1}`;
}

async function refreshFrame(): Promise<void> {
  currentDetections = await api.getFrameDetections(state.frame, state.axis);
  state = setRevision(state, currentDetections.revision);
  renderRevision();
  await refreshImages();
  renderSelection();
  renderLineage();
}

async function refreshLineage(selectRoot?: number): Promise<void> {
  const overview = await api.getLineageOverview();
  const select = $("tree-select") as HTMLSelectElement;
  select.textContent = "";
  for (const tree of overview.trees) {
    const opt = document.createElement("option");
    opt.value = String(tree.root);
    opt.textContent = `tree ${tree.root} (${tree.size} track${tree.size === 1 ? "" : "s"})`;
    select.appendChild(opt);
  }
  const wanted =
    selectRoot ?? currentTree?.root ?? overview.presented?.root ?? overview.trees[0]?.root;
  if (wanted === undefined) {
    currentTree = null;
    return;
  }
  select.value = String(wanted);
  currentTree =
    overview.presented && overview.presented.root === wanted
      ? overview.presented
      : await api.getLineageTree(wanted);
  renderLineage();
}

async function refreshEditLog(): Promise<void> {
  const log = await api.getEdits();
  state = setRevision(state, log.revision);
  renderRevision();
  const list = $("edit-log");
  list.textContent = "";
  for (const record of log.edits) {
    const item = document.createElement("li");
    const extra = record.propagation.length
      ? ` (+${record.propagation.length} auto)`
      : "";
    item.textContent = `r${record.revision} ${record.kind} det ${record.detection_id} @ t${record.frame}${extra}`;
    list.appendChild(item);
  }
}

async function submitEdit(kind: "split" | "delete" | "set_track"): Promise<void> {
  const status = $("edit-status");
  if (state.selectedDetection === null) {
    status.textContent = "Select a detection first.";
    return;
  }
  const body = {
    revision: state.revision,
    kind,
    detection_id: state.selectedDetection,
    ...(kind === "split" ? { n: Number(($("split-n") as HTMLInputElement).value) } : {}),
    ...(kind === "set_track"
      ? { track_id: Number(($("set-track-id") as HTMLInputElement).value) }
      : {}),
  };
  status.textContent = "Submitting…";
  const result = await edits.submit(body);
  status.textContent = result.message;
  if (result.outcome.status === "ok") {
    state = setRevision(state, result.outcome.revision);
    state = selectDetection(state, null);
    await refreshLineage();
    await refreshFrame();
    await refreshEditLog();
  } else if (result.outcome.status === "stale" && result.retryRevision !== undefined) {
    state = setRevision(state, result.retryRevision);
    await refreshLineage();
    await refreshFrame();
    await refreshEditLog();
    status.textContent = result.message;
  }
}

async function boot(): Promise<void> {
  exp = await api.getExperiment();
  state = initialViewState(exp);
  $("experiment-info").textContent =
    `${exp.dims.join("×")} vox · ${exp.t_count} frames · ` +
    `${exp.track_count} tracks · ${exp.tree_count} trees`;

  buildChannelControls();

  ($("frame-slider") as HTMLInputElement).addEventListener("input", (e) => {
    state = setFrame(state, Number((e.target as HTMLInputElement).value));
    void refreshFrame();
  });
  ($("axis-select") as HTMLSelectElement).addEventListener("change", (e) => {
    state = { ...state, axis: (e.target as HTMLSelectElement).value as Axis };
    state = setFrame(state, clampFrame(state, state.frame));
    void refreshFrame();
  });
  ($("tree-select") as HTMLSelectElement).addEventListener("change", async (e) => {
    await refreshLineage(Number((e.target as HTMLSelectElement).value));
  });
  $("split-btn").addEventListener("click", () => void submitEdit("split"));
  $("delete-btn").addEventListener("click", () => void submitEdit("delete"));
  $("set-track-btn").addEventListener("click", () => void submitEdit("set_track"));

  await refreshLineage();
  await refreshFrame();
  await refreshEditLog();
}

void boot().catch((err) => {
  document.body.insertAdjacentHTML(
    "afterbegin",
    `<div class="boot-error">Failed to load session: ${String(err)}</div>`,
  );
});
