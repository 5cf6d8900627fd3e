// Curve drafting. A draft is an immutable snapshot: the simplified 2D
// stroke, the lift parameters, and the 3D preview. The preview is never
// computed locally — it is always the verbatim point list of the last
// service response, and the SSE paint is whatever labels the service
// confirmed. Async edits go through the DraftController, which talks to the
// service and records each confirmed state on the undo stack.

import { ApiClient } from "./api";
import { UndoStack } from "./history";
import { simplifyStroke } from "./simplify";
import type { CurveDoc, LiftParams, Point2, Point3, SseLabel } from "./types";
import { defaultLiftParams } from "./types";

export interface CurveDraft {
  readonly stroke: readonly Point2[];
  readonly lift: LiftParams;
  readonly curveId: string | null;
  readonly preview: readonly Point3[];
  readonly labels: string | null;
  readonly dirty: boolean; // stroke or lift changed since the last sync
}

export const emptyDraft: CurveDraft = Object.freeze({
  stroke: [],
  lift: defaultLiftParams,
  curveId: null,
  preview: [],
  labels: null,
  dirty: false,
});

function checkInvariants(draft: CurveDraft): CurveDraft {
  if (draft.labels !== null && draft.labels.length !== draft.preview.length) {
    throw new Error(
      `SSE paint length ${draft.labels.length} != preview length ${draft.preview.length}`,
    );
  }
  return Object.freeze(draft);
}

function fromDoc(draft: CurveDraft, doc: CurveDoc, dirty = false): CurveDraft {
  return checkInvariants({
    ...draft,
    curveId: doc.id,
    preview: doc.points,
    labels: doc.labels ?? null,
    dirty,
  });
}

/** Record a drawn stroke (already in canvas pixels). Strokes that simplify
 * below two points are ignored and leave the draft untouched. */
export function applyStroke(draft: CurveDraft, raw: Point2[], tolerance?: number): CurveDraft {
  const simplified = simplifyStroke(raw, tolerance);
  if (simplified.length < 2) {
    return draft;
  }
  return checkInvariants({
    ...draft,
    stroke: simplified,
    curveId: null,
    preview: [],
    labels: null,
    dirty: true,
  });
}

export function withLift(draft: CurveDraft, lift: LiftParams): CurveDraft {
  return checkInvariants({ ...draft, lift, dirty: true });
}

// canvas pixels to Angstrom at stroke capture; a full 420 px lane maps to a
// bundle-sized ~105 A curve
export const STROKE_SCALE = 0.25;

export class DraftController {
  readonly history: UndoStack<CurveDraft>;

  constructor(
    private readonly api: ApiClient,
    initial: CurveDraft = emptyDraft,
    private readonly strokeScale: number = STROKE_SCALE,
  ) {
    this.history = new UndoStack(initial);
  }

  get draft(): CurveDraft {
    return this.history.value;
  }

  /** Stroke finished: simplify and store locally (no service call yet). */
  finishStroke(raw: Point2[], tolerance?: number): CurveDraft {
    const next = applyStroke(this.draft, raw, tolerance);
    if (next !== this.draft) {
      this.history.push(next);
    }
    return next;
  }

  setLift(lift: LiftParams): CurveDraft {
    return this.history.push(withLift(this.draft, lift));
  }

  /** Upload the flat stroke and lift it; the preview becomes the service's
   * lifted curve, verbatim. */
  async sync(): Promise<CurveDraft> {
    const draft = this.draft;
    if (draft.stroke.length < 2) {
      throw new Error("nothing to sync: draw a stroke first");
    }
    const s = this.strokeScale;
    const flat: Point3[] = draft.stroke.map((p) => [p.x * s, p.y * s, 0]);
    const { id } = await this.api.postCurve(flat);
    const lifted = await this.api.lift(id, draft.lift);
    return this.history.push(fromDoc(draft, lifted));
  }

  private requireSynced(): string {
    const id = this.draft.curveId;
    if (!id || this.draft.dirty) {
      throw new Error("draft is not synced to the service yet");
    }
    return id;
  }

  async dragAnchor(anchor: number, displacement: Point3, falloff = 8): Promise<CurveDraft> {
    const id = this.requireSynced();
    const doc = await this.api.drag(id, anchor, displacement, falloff);
    return this.history.push(fromDoc(this.draft, doc));
  }

  async paintSse(start: number, stop: number, label: SseLabel): Promise<CurveDraft> {
    const id = this.requireSynced();
    const doc = await this.api.editSse(id, start, stop, label);
    return this.history.push(fromDoc(this.draft, doc));
  }

  async perturb(radius: number, seed: number): Promise<CurveDraft> {
    const id = this.requireSynced();
    const doc = await this.api.perturb(id, radius, seed);
    return this.history.push(fromDoc(this.draft, doc));
  }

  /** Ask the encoder for SSE probabilities, then write the arg-max runs back
   * through edit-sse so the stored labels are service-confirmed. */
  async applyPredictedSse(): Promise<CurveDraft> {
    const id = this.requireSynced();
    const { classes, probabilities } = await this.api.encode(id);
    let doc: CurveDoc | null = null;
    let runStart = 0;
    let runLabel = argmaxLabel(classes, probabilities[0]);
    for (let i = 1; i <= probabilities.length; i++) {
      const label = i < probabilities.length ? argmaxLabel(classes, probabilities[i]) : null;
      if (label !== runLabel) {
        doc = await this.api.editSse(doc?.id ?? id, runStart, i, runLabel);
        runStart = i;
        runLabel = label as SseLabel;
      }
    }
    if (doc === null) {
      throw new Error("encoder returned no probabilities");
    }
    return this.history.push(fromDoc(this.draft, doc));
  }

  undo(): CurveDraft | null {
    return this.history.undo();
  }

  redo(): CurveDraft | null {
    return this.history.redo();
  }
}

function argmaxLabel(classes: string, row: readonly number[]): SseLabel {
  let best = 0;
  for (let k = 1; k < row.length; k++) {
    if (row[k] > row[best]) best = k;
  }
  return classes[best] as SseLabel;
}
