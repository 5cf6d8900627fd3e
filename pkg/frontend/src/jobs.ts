// Job submission and live watching. The view model only ever holds values
// copied from service responses: displayed TF, phase-switch step, progress,
// and trajectory records all come back over the wire.

import { ApiClient } from "./api";
import type { JobDoc, SamplerConfig, TrajectoryRecord } from "./types";

export interface JobView {
  jobId: string;
  status: JobDoc["status"];
  progress: number;
  currentT: number | null;
  error: string | null;
  sctf1: number | null;
  phaseSwitchStep: number | null;
  steps: number | null;
  trajectory: TrajectoryRecord[] | null;
  selectedStep: number; // scrubber position, index into trajectory
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class JobWatcher {
  constructor(
    private readonly api: ApiClient,
    private readonly pollMs = 250,
  ) {}

  async submit(curveId: string, config: SamplerConfig, dumpCoords = true): Promise<string> {
    const { id } = await this.api.submitGenerate(curveId, config, dumpCoords);
    return id;
  }

  /** Poll until the job settles, reporting every snapshot to onUpdate. */
  async watch(jobId: string, onUpdate?: (view: JobView) => void): Promise<JobView> {
    let view: JobView = {
      jobId,
      status: "queued",
      progress: 0,
      currentT: null,
      error: null,
      sctf1: null,
      phaseSwitchStep: null,
      steps: null,
      trajectory: null,
      selectedStep: 0,
    };
    for (;;) {
      const doc = await this.api.getJob(jobId);
      view = {
        ...view,
        status: doc.status,
        progress: doc.progress,
        currentT: doc.current_t ?? null,
        error: doc.error,
      };
      if (doc.status === "done" && doc.result) {
        view = {
          ...view,
          sctf1: doc.result.metrics.sctf1,
          phaseSwitchStep: doc.result.metrics.phase_switch_step,
          steps: doc.result.metrics.steps,
        };
        view = { ...view, trajectory: await this.api.trajectory(jobId) };
        onUpdate?.(view);
        return view;
      }
      if (doc.status === "failed") {
        onUpdate?.(view);
        return view;
      }
      onUpdate?.(view);
      await sleep(this.pollMs);
    }
  }
}

export function scrubTo(view: JobView, index: number): JobView {
  if (!view.trajectory || view.trajectory.length === 0) {
    return view;
  }
  const clamped = Math.max(0, Math.min(view.trajectory.length - 1, Math.round(index)));
  return { ...view, selectedStep: clamped };
}
