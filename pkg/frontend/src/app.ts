// DOM wiring for the sketchpad. Everything interesting is delegated: stroke
// capture feeds DraftController, edits round-trip through the service, and
// the viewport renders exactly the points the service sent back.

import { ApiClient } from "./api";
import { DraftController } from "./draft";
import { JobWatcher, JobView, scrubTo } from "./jobs";
import { SessionState, emptySession, recordJob, withCurve } from "./session";
import type { Point2, Point3, SamplerConfig, SseLabel } from "./types";
import { defaultSamplerConfig } from "./types";
import { Camera, fitCamera, polylineSegments, project, unprojectDelta } from "./viewport";

type Mode = "draw" | "drag" | "paint";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export function startApp(baseUrl = "http://127.0.0.1:8008"): void {
  const api = new ApiClient(baseUrl);
  const controller = new DraftController(api);
  const watcher = new JobWatcher(api);
  let session: SessionState = emptySession;
  let mode: Mode = "draw";
  let paintLabel: SseLabel = "H";
  let camera: Camera | null = null;
  let activeJob: JobView | null = null;

  const sketchCanvas = el<HTMLCanvasElement>("sketch-canvas");
  const viewCanvas = el<HTMLCanvasElement>("view-canvas");
  const statusLine = el<HTMLDivElement>("status");
  const metricsLine = el<HTMLDivElement>("metrics");
  const scrubber = el<HTMLInputElement>("scrubber");

  const say = (msg: string) => {
    statusLine.textContent = msg;
  };

  // ------------------------------------------------------------- rendering

  function drawStrokeLane(): void {
    const ctx = sketchCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, sketchCanvas.width, sketchCanvas.height);
    const stroke = controller.draft.stroke;
    if (stroke.length < 2) return;
    ctx.strokeStyle = "#4a90d9";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(stroke[0].x, stroke[0].y);
    for (const p of stroke.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }

  function drawViewport(points: readonly Point3[], labels: string | null): void {
    const ctx = viewCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, viewCanvas.width, viewCanvas.height);
    if (points.length < 2) return;
    if (!camera) camera = fitCamera(points, viewCanvas.width, viewCanvas.height);
    const projected = project(points, camera);
    for (const seg of polylineSegments(projected, labels)) {
      ctx.strokeStyle = seg.color;
      ctx.lineWidth = 2.5;
      ctx.beginPath();
      ctx.moveTo(seg.x1, seg.y1);
      ctx.lineTo(seg.x2, seg.y2);
      ctx.stroke();
    }
  }

  function render(): void {
    drawStrokeLane();
    const scrubbed = activeJob?.trajectory?.[activeJob.selectedStep];
    if (scrubbed?.z_t) {
      drawViewport(scrubbed.z_t, null);
      metricsLine.textContent =
        `t=${scrubbed.t}  phase=${scrubbed.phase}  F=${scrubbed.F.toFixed(3)}  ` +
        `rmsd_to_sketch=${scrubbed.rmsd_to_sketch.toFixed(2)}`;
      return;
    }
    drawViewport(controller.draft.preview, controller.draft.labels);
    if (activeJob?.sctf1 != null) {
      metricsLine.textContent =
        `scTF_1=${activeJob.sctf1}  phase switch at t=${activeJob.phaseSwitchStep ?? "-"}`;
    }
  }

  // ---------------------------------------------------------- stroke input

  let rawStroke: Point2[] = [];
  let pointerDown = false;

  sketchCanvas.addEventListener("pointerdown", (ev) => {
    if (mode !== "draw") return;
    pointerDown = true;
    rawStroke = [{ x: ev.offsetX, y: ev.offsetY }];
  });
  sketchCanvas.addEventListener("pointermove", (ev) => {
    if (!pointerDown) return;
    rawStroke.push({ x: ev.offsetX, y: ev.offsetY });
  });
  sketchCanvas.addEventListener("pointerup", () => {
    if (!pointerDown) return;
    pointerDown = false;
    controller.finishStroke(rawStroke);
    rawStroke = [];
    camera = null;
    render();
    say(`stroke: ${controller.draft.stroke.length} points (simplified)`);
  });

  // ------------------------------------------------------------ anchor drag

  let dragAnchor: number | null = null;
  let dragStart: Point2 | null = null;

  function nearestAnchor(x: number, y: number): number | null {
    if (!camera) return null;
    const projected = project(controller.draft.preview, camera);
    let best = -1;
    let bestDist = 12; // px hit radius
    projected.forEach((p, i) => {
      const d = Math.hypot(p.x - x, p.y - y);
      if (d < bestDist) {
        best = i;
        bestDist = d;
      }
    });
    return best >= 0 ? best : null;
  }

  viewCanvas.addEventListener("pointerdown", (ev) => {
    if (mode !== "drag") return;
    dragAnchor = nearestAnchor(ev.offsetX, ev.offsetY);
    dragStart = { x: ev.offsetX, y: ev.offsetY };
  });
  viewCanvas.addEventListener("pointerup", async (ev) => {
    if (mode !== "drag" || dragAnchor == null || !dragStart || !camera) return;
    const delta = unprojectDelta(ev.offsetX - dragStart.x, ev.offsetY - dragStart.y, camera);
    const anchor = dragAnchor;
    dragAnchor = null;
    dragStart = null;
    try {
      await controller.dragAnchor(anchor, delta);
      render();
      say(`dragged anchor ${anchor}`);
    } catch (err) {
      say(`drag failed: ${err}`);
    }
  });

  // --------------------------------------------------------------- controls

  el<HTMLButtonElement>("btn-sync").addEventListener("click", async () => {
    try {
      const lift = {
        amplitude: Number(el<HTMLInputElement>("lift-amplitude").value),
        period: Number(el<HTMLInputElement>("lift-period").value),
        noise_amplitude: Number(el<HTMLInputElement>("lift-noise").value),
        seed: Number(el<HTMLInputElement>("lift-seed").value),
      };
      controller.setLift(lift);
      const draft = await controller.sync();
      session = withCurve(session, draft.curveId);
      camera = null;
      activeJob = null;
      render();
      say(`lifted to 3D: curve ${draft.curveId} (${draft.preview.length} points)`);
    } catch (err) {
      say(`lift failed: ${err}`);
    }
  });

  el<HTMLButtonElement>("btn-encode").addEventListener("click", async () => {
    try {
      await controller.applyPredictedSse();
      session = withCurve(session, controller.draft.curveId);
      render();
      say(`SSE painted: ${controller.draft.labels}`);
    } catch (err) {
      say(`encode failed: ${err}`);
    }
  });

  for (const label of ["H", "E", "L"] as const) {
    el<HTMLButtonElement>(`btn-paint-${label.toLowerCase()}`).addEventListener("click", () => {
      mode = "paint";
      paintLabel = label;
      say(`painting ${label}: click a start and an end point in the viewport`);
    });
  }

  let paintStart: number | null = null;
  viewCanvas.addEventListener("pointerdown", async (ev) => {
    if (mode !== "paint") return;
    const hit = nearestAnchor(ev.offsetX, ev.offsetY);
    if (hit == null) return;
    if (paintStart == null) {
      paintStart = hit;
      say(`paint from ${hit}...`);
      return;
    }
    const [start, stop] = [Math.min(paintStart, hit), Math.max(paintStart, hit) + 1];
    paintStart = null;
    try {
      await controller.paintSse(start, stop, paintLabel);
      session = withCurve(session, controller.draft.curveId);
      render();
      say(`painted ${paintLabel} on [${start}, ${stop})`);
    } catch (err) {
      say(`paint failed: ${err}`);
    }
  });

  el<HTMLButtonElement>("btn-mode-draw").addEventListener("click", () => {
    mode = "draw";
    say("draw mode");
  });
  el<HTMLButtonElement>("btn-mode-drag").addEventListener("click", () => {
    mode = "drag";
    say("drag mode: pick an anchor in the viewport and drag");
  });

  el<HTMLButtonElement>("btn-undo").addEventListener("click", () => {
    if (controller.undo()) {
      camera = null;
      render();
      say("undo");
    }
  });
  el<HTMLButtonElement>("btn-redo").addEventListener("click", () => {
    if (controller.redo()) {
      camera = null;
      render();
      say("redo");
    }
  });

  el<HTMLButtonElement>("btn-submit").addEventListener("click", async () => {
    const curveId = controller.draft.curveId;
    if (!curveId || controller.draft.labels == null) {
      say("sync and paint SSE before submitting");
      return;
    }
    const config: SamplerConfig = {
      ...defaultSamplerConfig,
      guidance: Number(el<HTMLInputElement>("cfg-lambda").value),
      seed: Number(el<HTMLInputElement>("cfg-seed").value),
      schedule_T: Number(el<HTMLInputElement>("cfg-steps").value),
    };
    try {
      const jobId = await watcher.submit(curveId, config);
      say(`job ${jobId} submitted`);
      const view = await watcher.watch(jobId, (update) => {
        session = recordJob(session, update);
        say(`job ${jobId}: ${update.status} (step ${update.currentT ?? "-"})`);
      });
      activeJob = view;
      if (view.status === "failed") {
        say(`job failed: ${view.error}`);
        return;
      }
      scrubber.max = String((view.trajectory?.length ?? 1) - 1);
      scrubber.value = scrubber.max;
      activeJob = scrubTo(view, Number(scrubber.max));
      camera = null;
      render();
      say(`job done: scTF_1 = ${view.sctf1}`);
    } catch (err) {
      say(`submit failed: ${err}`);
    }
  });

  scrubber.addEventListener("input", () => {
    if (!activeJob) return;
    activeJob = scrubTo(activeJob, Number(scrubber.value));
    render();
  });

  api.health().then(
    (ok) => say(ok ? `connected to ${baseUrl}` : "service unhealthy"),
    () => say(`cannot reach ${baseUrl} — start it with: sketchfold serve`),
  );
}
