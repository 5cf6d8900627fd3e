// Session bookkeeping: which curve is active, which jobs were submitted,
// and which trajectory step the scrubber points at.

import type { JobView } from "./jobs";

export interface SessionState {
  readonly currentCurveId: string | null;
  readonly jobs: readonly JobView[]; // ordered by submission time
}

export const emptySession: SessionState = Object.freeze({
  currentCurveId: null,
  jobs: [],
});

export function withCurve(state: SessionState, curveId: string | null): SessionState {
  return Object.freeze({ ...state, currentCurveId: curveId });
}

export function recordJob(state: SessionState, view: JobView): SessionState {
  const existing = state.jobs.findIndex((j) => j.jobId === view.jobId);
  const jobs =
    existing >= 0
      ? state.jobs.map((j, i) => (i === existing ? view : j))
      : [...state.jobs, view];
  return Object.freeze({ ...state, jobs });
}
