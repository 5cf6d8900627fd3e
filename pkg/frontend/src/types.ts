// Wire formats of the design service. The sketchpad never invents geometry:
// every 3D point and every metric shown on screen comes from one of these
// documents as returned by the service.

export type Point2 = { x: number; y: number };
export type Point3 = [number, number, number];

export type SseLabel = "H" | "E" | "L";

export interface CurveDoc {
  id: string;
  points: Point3[];
  labels?: string;
}

export interface BackboneDoc {
  id?: string;
  residues: [string, number, number, number, number][];
  labels?: string;
}

export interface SamplerConfig {
  guidance: number;
  gate_gamma: number;
  gate_eta: number;
  fixed_phase_switch: number | null;
  seed: number;
  mode: "guided" | "unconditional" | "motif-guided";
  schedule_T: number;
}

export const defaultSamplerConfig: SamplerConfig = {
  guidance: 2 / 3,
  gate_gamma: 0.2,
  gate_eta: 0.7,
  fixed_phase_switch: null,
  seed: 0,
  mode: "guided",
  schedule_T: 50,
};

export interface LiftParams {
  amplitude: number;
  period: number;
  noise_amplitude: number;
  seed: number;
}

export const defaultLiftParams: LiftParams = {
  amplitude: 6,
  period: 24,
  noise_amplitude: 1,
  seed: 0,
};

export interface JobMetrics {
  sctf1: number;
  phase_switch_step: number | null;
  steps: number;
}

export interface JobResult {
  backbone: BackboneDoc;
  metrics: JobMetrics;
  trajectory_steps: number;
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobDoc {
  id: string;
  kind: string;
  status: JobStatus;
  progress: number;
  current_t?: number;
  error: string | null;
  result?: JobResult;
}

export interface TrajectoryRecord {
  t: number;
  phase: "confidential" | "controllable";
  F: number;
  rmsd_to_sketch: number;
  z_t?: Point3[];
}

export interface EncodeResult {
  classes: string;
  probabilities: [number, number, number][];
}
