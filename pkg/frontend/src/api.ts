// Thin client over the design service HTTP API. All methods resolve to the
// parsed response body; non-2xx responses throw ApiError with the service's
// detail message so callers can surface it inline.

import type {
  BackboneDoc,
  CurveDoc,
  EncodeResult,
  JobDoc,
  LiftParams,
  Point3,
  SamplerConfig,
  SseLabel,
  TrajectoryRecord,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(message);
  }
}

async function parseOrThrow<T>(res: Response): Promise<T> {
  if (res.ok) {
    return (await res.json()) as T;
  }
  let detail: unknown = null;
  try {
    detail = (await res.json()).detail;
  } catch {
    detail = await res.text().catch(() => null);
  }
  throw new ApiError(`service returned ${res.status}`, res.status, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((res) => parseOrThrow<T>(res));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchImpl(`${this.baseUrl}${path}`).then((res) => parseOrThrow<T>(res));
  }

  async health(): Promise<boolean> {
    const doc = await this.get<{ status: string }>("/health");
    return doc.status === "ok";
  }

  postCurve(points: Point3[], labels?: string): Promise<{ id: string }> {
    const body: Record<string, unknown> = { points };
    if (labels !== undefined) body.labels = labels;
    return this.post("/curves", body);
  }

  getCurve(id: string): Promise<CurveDoc> {
    return this.get(`/curves/${id}`);
  }

  encode(id: string): Promise<EncodeResult> {
    return this.post(`/curves/${id}/encode`, {});
  }

  lift(id: string, params: LiftParams): Promise<CurveDoc> {
    return this.post(`/curves/${id}/ops/lift`, params);
  }

  drag(
    id: string,
    anchor: number,
    displacement: Point3,
    falloff: number,
  ): Promise<CurveDoc> {
    return this.post(`/curves/${id}/ops/drag`, { anchor, displacement, falloff });
  }

  editSse(id: string, start: number, stop: number, label: SseLabel): Promise<CurveDoc> {
    return this.post(`/curves/${id}/ops/edit-sse`, { start, stop, label });
  }

  perturb(id: string, radius: number, seed: number): Promise<CurveDoc> {
    return this.post(`/curves/${id}/ops/perturb`, { radius, seed });
  }

  joint(id: string, otherId: string, angle: number): Promise<CurveDoc> {
    return this.post(`/curves/${id}/ops/joint`, { other_id: otherId, angle });
  }

  sketch(curveId: string): Promise<BackboneDoc> {
    return this.post("/sketches", { curve_id: curveId });
  }

  submitGenerate(
    curveId: string,
    config: SamplerConfig,
    dumpCoords = true,
  ): Promise<{ id: string }> {
    return this.post("/jobs", {
      kind: "generate",
      curve_id: curveId,
      config,
      denoiser: { kind: "toy" },
      dump_coords: dumpCoords,
    });
  }

  getJob(id: string): Promise<JobDoc> {
    return this.get(`/jobs/${id}`);
  }

  async trajectory(jobId: string): Promise<TrajectoryRecord[]> {
    const res = await this.fetchImpl(`${this.baseUrl}/jobs/${jobId}/trajectory`);
    if (!res.ok) {
      throw new ApiError(`service returned ${res.status}`, res.status, await res.text());
    }
    const text = await res.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as TrajectoryRecord);
  }
}
