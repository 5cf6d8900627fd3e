"""Local HTTP service for the sketchpad UI and scripts.

Exposes curves, curve operations, sketches, and generation jobs over JSON.
State lives under a data directory: curve documents, an append-only job log,
and per-job result files.  On startup the log is replayed; jobs that were
running when the process died are re-queued.  Job execution happens on worker
threads (one by default); the store is the only shared mutable state and sits
behind a single lock.  Every job runs with its own seeded generator, so
concurrent jobs never interleave rng streams.
"""
from __future__ import annotations

import json
import queue
import threading
import uuid
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .backbone import Backbone, assign_sse_geometric, extract_curve
from .curve_ops import DragSpec, LiftSpec, drag, edit_sse, joint, lift_2d_to_3d, perturb_sphere
from .denoisers import ToyDenoiser, ToyDenoiserConfig, oracle_denoiser, train_toy_denoiser
from .diffusion import Motif, SamplerConfig, make_schedule, sample
from .encoder import (
    CurveEncoderModel,
    TrainingConfig,
    encode_curve,
    generate_synthetic_sse_dataset,
    load_encoder,
    save_encoder,
    train_encoder,
)
from .errors import SketchfoldError
from .geometry import Curve
from .metrics import topology_fitness
from .sketcher import sketch_from_curve
from .synthetic import bundle_corpus

DATA_DIR_ENV = "SKETCHFOLD_DATA"

JobKind = Literal["generate", "motif-generate", "restore"]
JobStatus = Literal["queued", "running", "done", "failed"]


# ---------------------------------------------------------------- payloads

class SamplerConfigModel(BaseModel):
    guidance: float = Field(default=2.0 / 3.0, ge=0.0, lt=1.0)
    gate_gamma: float = Field(default=0.2, ge=0.0)
    gate_eta: float = Field(default=0.7, gt=0.0, le=1.0)
    fixed_phase_switch: int | None = None
    seed: int = 0
    mode: Literal["guided", "unconditional", "motif-guided"] = "guided"
    schedule_T: int = Field(default=50, ge=2)

    def to_config(self) -> SamplerConfig:
        return SamplerConfig(
            guidance=self.guidance,
            gate_gamma=self.gate_gamma,
            gate_eta=self.gate_eta,
            fixed_phase_switch=self.fixed_phase_switch,
            seed=self.seed,
            mode=self.mode,
        )


class CurveModel(BaseModel):
    id: str = ""
    points: list[tuple[float, float, float]] = Field(min_length=2)
    labels: str | None = None

    def to_curve(self) -> Curve:
        return Curve(np.asarray(self.points, dtype=float), labels=self.labels, id=self.id)

    @staticmethod
    def from_curve(curve: Curve) -> "CurveModel":
        return CurveModel(
            id=curve.id,
            points=[tuple(p) for p in curve.points.tolist()],
            labels=curve.labels,
        )


class BackboneModel(BaseModel):
    id: str = ""
    residues: list[tuple[str, int, float, float, float]]
    labels: str | None = None

    def to_backbone(self) -> Backbone:
        coords = np.asarray([[r[2], r[3], r[4]] for r in self.residues], dtype=float)
        return Backbone(
            coords,
            tuple(r[0] for r in self.residues),
            tuple(r[1] for r in self.residues),
            self.labels,
            self.id,
        )

    @staticmethod
    def from_backbone(bb: Backbone) -> "BackboneModel":
        return BackboneModel(
            id=bb.id,
            residues=[
                (bb.chain_ids[i], bb.residue_numbers[i], *map(float, bb.coords[i]))
                for i in range(len(bb))
            ],
            labels=bb.labels,
        )


class MotifModel(BaseModel):
    indices: list[int]
    coords: list[tuple[float, float, float]]

    def to_motif(self) -> Motif:
        return Motif(np.asarray(self.indices, dtype=int), np.asarray(self.coords, dtype=float))


class DenoiserSpec(BaseModel):
    kind: str = "toy"
    target: BackboneModel | None = None  # oracle target
    path: str | None = None  # toy model file


class GeneratePayload(BaseModel):
    curve_id: str | None = None
    curve: CurveModel | None = None
    config: SamplerConfigModel = SamplerConfigModel()
    denoiser: DenoiserSpec = DenoiserSpec()
    motif: MotifModel | None = None
    dump_coords: bool = False  # include per-step coordinates in the trajectory


class RestorePayload(BaseModel):
    backbones: list[BackboneModel] = Field(min_length=1)
    n_bb: int = Field(default=1, ge=1)
    config: SamplerConfigModel = SamplerConfigModel()
    denoiser: DenoiserSpec = DenoiserSpec(kind="oracle")


class JobModel(BaseModel):
    """Response schema of GET /jobs/{id} (validated in tests)."""

    id: str
    kind: JobKind
    status: JobStatus
    config: dict
    progress: int
    current_t: int | None = None
    error: str | None = None
    result: dict | None = None


class DragPayload(BaseModel):
    anchor: int
    displacement: tuple[float, float, float]
    falloff: float = 8.0


class JointPayload(BaseModel):
    other_id: str
    angle: float


class EditSsePayload(BaseModel):
    start: int
    stop: int
    label: Literal["H", "E", "L"]


class LiftPayload(BaseModel):
    amplitude: float = 6.0
    period: int = 24
    noise_amplitude: float = 1.0
    seed: int = 0


class PerturbPayload(BaseModel):
    radius: float = Field(ge=0.0)
    seed: int = 0


# ---------------------------------------------------------------- job store

class JobStore:
    """Durable job state: append-only event log plus result files."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.curve_dir = self.data_dir / "curves"
        self.result_dir = self.data_dir / "results"
        self.model_dir = self.data_dir / "models"
        self.log_path = self.data_dir / "jobs.jsonl"
        for d in (self.curve_dir, self.result_dir, self.model_dir):
            d.mkdir(parents=True, exist_ok=True)
        self.lock = threading.RLock()
        self.jobs: dict[str, dict] = {}
        self._replay()

    def _replay(self):
        if not self.log_path.exists():
            return
        for line in self.log_path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            job_id = event["id"]
            if event["event"] == "submitted":
                self.jobs[job_id] = {
                    "id": job_id,
                    "kind": event["kind"],
                    "status": "queued",
                    "config": event["config"],
                    "payload": event["payload"],
                    "progress": 0,
                    "error": None,
                }
            elif event["event"] == "status" and job_id in self.jobs:
                self.jobs[job_id]["status"] = event["status"]
                self.jobs[job_id]["error"] = event.get("error")
        # crash recovery: anything caught mid-flight goes back to the queue
        for job in self.jobs.values():
            if job["status"] == "running":
                job["status"] = "queued"

    def _append(self, event: dict):
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def submit(self, kind: str, config: dict, payload: dict) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self.lock:
            self.jobs[job_id] = {
                "id": job_id,
                "kind": kind,
                "status": "queued",
                "config": config,
                "payload": payload,
                "progress": 0,
                "error": None,
            }
            self._append(
                {"event": "submitted", "id": job_id, "kind": kind, "config": config, "payload": payload}
            )
        return job_id

    def pending(self) -> list[str]:
        with self.lock:
            return [j["id"] for j in self.jobs.values() if j["status"] == "queued"]

    def set_status(self, job_id: str, status: str, error: str | None = None):
        with self.lock:
            job = self.jobs[job_id]
            job["status"] = status
            job["error"] = error
            self._append({"event": "status", "id": job_id, "status": status, "error": error})

    def set_progress(self, job_id: str, steps_done: int, current_t: int):
        with self.lock:
            self.jobs[job_id]["progress"] = steps_done
            self.jobs[job_id]["current_t"] = current_t

    def get(self, job_id: str) -> dict | None:
        with self.lock:
            job = self.jobs.get(job_id)
            return dict(job) if job else None

    # ---- curves

    def save_curve(self, curve: Curve) -> str:
        curve_id = curve.id or uuid.uuid4().hex[:12]
        if curve.id != curve_id:
            curve = Curve(curve.points, labels=curve.labels, id=curve_id)
        (self.curve_dir / f"{curve_id}.json").write_text(curve.to_json())
        return curve_id

    def load_curve(self, curve_id: str) -> Curve:
        path = self.curve_dir / f"{curve_id}.json"
        if not path.exists():
            raise KeyError(curve_id)
        return Curve.from_json(path.read_text())

    # ---- results

    def result_path(self, job_id: str) -> Path:
        path = self.result_dir / job_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def load_result(self, job_id: str) -> dict | None:
        path = self.result_dir / job_id / "result.json"
        if not path.exists():
            return None
        return json.loads(path.read_text())


# ---------------------------------------------------------------- service

DenoiserFactory = Callable[[DenoiserSpec, Backbone | None, "ServiceState"], object]


def _default_denoiser_factory(spec: DenoiserSpec, target: Backbone | None, state: "ServiceState"):
    if spec.kind == "oracle":
        bb = spec.target.to_backbone() if spec.target is not None else target
        if bb is None:
            raise SketchfoldError("oracle denoiser needs a target backbone")
        if bb.labels is None:
            bb = bb.with_labels(assign_sse_geometric(bb.coords))
        return oracle_denoiser(bb)
    if spec.kind == "toy":
        return state.toy_denoiser(spec.path)
    raise SketchfoldError(f"unknown denoiser kind {spec.kind!r}")


class ServiceState:
    """Models and workers shared by request handlers."""

    def __init__(self, store: JobStore, workers: int,
                 denoiser_factory: DenoiserFactory | None = None,
                 model_seed: int = 1234):
        self.store = store
        self.schedule = make_schedule()
        self.model_seed = model_seed
        self.denoiser_factory = denoiser_factory or _default_denoiser_factory
        self._encoder: CurveEncoderModel | None = None
        self._toy: ToyDenoiser | None = None
        self._model_lock = threading.Lock()
        self.queue: "queue.Queue[str]" = queue.Queue()
        self.workers = [
            threading.Thread(target=self._worker_loop, name=f"sketchfold-worker-{i}", daemon=True)
            for i in range(workers)
        ]
        for job_id in store.pending():
            self.queue.put(job_id)
        for w in self.workers:
            w.start()

    # ---- lazily trained default models (cached on disk, deterministic)

    def encoder(self) -> CurveEncoderModel:
        with self._model_lock:
            if self._encoder is None:
                path = self.store.model_dir / "encoder.npz"
                if path.exists():
                    self._encoder = load_encoder(path)
                else:
                    data = generate_synthetic_sse_dataset(24, seed=self.model_seed)
                    model, _ = train_encoder(
                        data, TrainingConfig(learning_rate=3e-3, epochs=15, seed=self.model_seed)
                    )
                    save_encoder(model, path)
                    self._encoder = model
            return self._encoder

    def toy_denoiser(self, path: str | None = None) -> ToyDenoiser:
        if path:
            return ToyDenoiser.load(path).bind_schedule(self.schedule)
        with self._model_lock:
            if self._toy is None:
                cached = self.store.model_dir / "toy.npz"
                if cached.exists():
                    self._toy = ToyDenoiser.load(cached).bind_schedule(self.schedule)
                else:
                    corpus = bundle_corpus(40, seed=self.model_seed + 1)
                    self._toy = train_toy_denoiser(
                        corpus, self.schedule, ToyDenoiserConfig(steps=1200, seed=self.model_seed + 1)
                    )
                    self._toy.save(cached)
            return self._toy

    # ---- job execution

    def enqueue(self, job_id: str):
        self.queue.put(job_id)

    def _worker_loop(self):
        while True:
            job_id = self.queue.get()
            if job_id is None:
                return
            try:
                self._run_job(job_id)
            except Exception:  # pragma: no cover - worker must survive anything
                pass
            finally:
                self.queue.task_done()

    def _run_job(self, job_id: str):
        job = self.store.get(job_id)
        if job is None or job["status"] != "queued":
            return
        self.store.set_status(job_id, "running")
        try:
            if job["kind"] in ("generate", "motif-generate"):
                result = self._run_generate(job_id, job)
            elif job["kind"] == "restore":
                result = self._run_restore(job_id, job)
            else:
                raise SketchfoldError(f"unknown job kind {job['kind']!r}")
            out = self.store.result_path(job_id)
            (out / "result.json").write_text(json.dumps(result, sort_keys=True))
            self.store.set_status(job_id, "done")
        except Exception as exc:  # noqa: BLE001 - failures land on the job record
            self.store.set_status(job_id, "failed", error=str(exc))

    def _run_generate(self, job_id: str, job: dict) -> dict:
        payload = GeneratePayload.model_validate(job["payload"])
        if payload.curve is not None:
            curve = payload.curve.to_curve()
        elif payload.curve_id:
            curve = self.store.load_curve(payload.curve_id)
        else:
            raise SketchfoldError("generate job needs a curve or curve_id")
        if curve.labels is None:
            raise SketchfoldError("generation needs a labeled curve (encode or paint SSE first)")
        sketch = sketch_from_curve(curve)
        cfg = payload.config.to_config()
        schedule = make_schedule(T=payload.config.schedule_T)
        denoiser = self.denoiser_factory(payload.denoiser, None, self)
        motif = payload.motif.to_motif() if payload.motif is not None else None
        if motif is not None and cfg.mode == "guided":
            from dataclasses import replace

            cfg = replace(cfg, mode="motif-guided")

        def on_step(t: int):
            self.store.set_progress(job_id, schedule.T - t + 1, t)

        traj = sample(denoiser, sketch, cfg, schedule, motif=motif, progress=on_step)
        final = traj.final
        relabeled = final.with_labels(assign_sse_geometric(final.coords))
        sctf1 = topology_fitness(extract_curve(relabeled, 0.4), curve)
        out = self.store.result_path(job_id)
        (out / "backbone.json").write_text(final.to_json())
        (out / "trajectory.jsonl").write_text(traj.export_jsonl(include_coords=payload.dump_coords))
        return {
            "backbone": json.loads(final.to_json()),
            "metrics": {
                "sctf1": sctf1,
                "phase_switch_step": traj.phase_switch_step,
                "steps": schedule.T,
            },
            "trajectory_steps": schedule.T,
        }

    def _run_restore(self, job_id: str, job: dict) -> dict:
        from .bench import run_restoration

        payload = RestorePayload.model_validate(job["payload"])
        backbones = []
        for model in payload.backbones:
            bb = model.to_backbone()
            if bb.labels is None:
                bb = bb.with_labels(assign_sse_geometric(bb.coords))
            backbones.append(bb)
        cfg = payload.config.to_config()
        schedule = make_schedule(T=payload.config.schedule_T)

        def factory(bb: Backbone):
            return self.denoiser_factory(payload.denoiser, bb, self)

        report = run_restoration(backbones, cfg, payload.n_bb, factory, schedule)
        self.store.set_progress(job_id, schedule.T, 0)
        return {"report": report.to_payload()}

    def shutdown(self):
        for _ in self.workers:
            self.queue.put(None)


def create_app(
    data_dir: str | Path | None = None,
    workers: int = 1,
    denoiser_factory: DenoiserFactory | None = None,
    model_seed: int = 1234,
) -> FastAPI:
    """Build the service app around a data directory."""
    import os

    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV, "./sketchfold-data")
    store = JobStore(Path(data_dir))
    state = ServiceState(store, workers, denoiser_factory, model_seed)
    app = FastAPI(title="sketchfold", version="0.1.0")
    app.state.service = state

    def _curve_or_404(curve_id: str) -> Curve:
        try:
            return store.load_curve(curve_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"curve {curve_id} not found")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/curves")
    def post_curve(curve: CurveModel):
        try:
            curve_id = store.save_curve(curve.to_curve())
        except SketchfoldError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"id": curve_id}

    @app.get("/curves/{curve_id}")
    def get_curve(curve_id: str):
        return json.loads(_curve_or_404(curve_id).to_json())

    @app.post("/curves/{curve_id}/encode")
    def encode(curve_id: str):
        curve = _curve_or_404(curve_id)
        try:
            probs = encode_curve(state.encoder(), curve)
        except SketchfoldError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"probabilities": probs.tolist(), "classes": "HEL"}

    def _apply_op(curve_id: str, fn) -> dict:
        curve = _curve_or_404(curve_id)
        try:
            out = fn(curve)
        except (SketchfoldError, IndexError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        new_id = store.save_curve(Curve(out.points, labels=out.labels, id=""))
        doc = json.loads(store.load_curve(new_id).to_json())
        return doc

    @app.post("/curves/{curve_id}/ops/drag")
    def op_drag(curve_id: str, body: DragPayload):
        spec = DragSpec(body.anchor, body.displacement, body.falloff)
        return _apply_op(curve_id, lambda c: drag(c, spec))

    @app.post("/curves/{curve_id}/ops/joint")
    def op_joint(curve_id: str, body: JointPayload):
        other = _curve_or_404(body.other_id)
        return _apply_op(curve_id, lambda c: joint(c, other, body.angle))

    @app.post("/curves/{curve_id}/ops/edit-sse")
    def op_edit_sse(curve_id: str, body: EditSsePayload):
        return _apply_op(curve_id, lambda c: edit_sse(c, body.start, body.stop, body.label))

    @app.post("/curves/{curve_id}/ops/lift")
    def op_lift(curve_id: str, body: LiftPayload):
        spec = LiftSpec(body.amplitude, body.period, body.noise_amplitude, body.seed)

        def lift(curve: Curve) -> Curve:
            out = lift_2d_to_3d(curve.points[:, :2], spec)
            return Curve(out.points, labels=curve.labels, id="")

        return _apply_op(curve_id, lift)

    @app.post("/curves/{curve_id}/ops/perturb")
    def op_perturb(curve_id: str, body: PerturbPayload):
        return _apply_op(curve_id, lambda c: perturb_sphere(c, body.radius, body.seed))

    @app.post("/sketches")
    def post_sketch(body: dict):
        curve_id = body.get("curve_id")
        if not curve_id:
            raise HTTPException(status_code=422, detail="curve_id is required")
        curve = _curve_or_404(curve_id)
        try:
            sketch = sketch_from_curve(curve)
        except SketchfoldError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return json.loads(sketch.to_json())

    @app.post("/jobs")
    def post_job(body: dict):
        from pydantic import ValidationError

        kind = body.get("kind")
        try:
            if kind in ("generate", "motif-generate"):
                payload = GeneratePayload.model_validate(body)
                if payload.curve_id:
                    _curve_or_404(payload.curve_id)
                if payload.curve is not None:
                    payload.curve.to_curve()  # run curve invariants before queueing
            elif kind == "restore":
                payload = RestorePayload.model_validate(body)
                for model in payload.backbones:
                    model.to_backbone()
            else:
                raise HTTPException(
                    status_code=422, detail="kind must be generate, motif-generate, or restore"
                )
        except ValidationError as exc:
            raise HTTPException(
                status_code=422,
                detail=[
                    {"loc": list(err["loc"]), "msg": err["msg"]} for err in exc.errors()
                ],
            )
        except SketchfoldError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        config = payload.config.model_dump()
        job_id = store.submit(kind, config, payload.model_dump())
        state.enqueue(job_id)
        return {"id": job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"job {job_id} not found")
        doc = {k: job.get(k) for k in ("id", "kind", "status", "config", "progress", "current_t", "error")}
        if job["status"] == "done":
            doc["result"] = store.load_result(job_id)
        return doc

    @app.get("/jobs/{job_id}/trajectory")
    def get_trajectory(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"job {job_id} not found")
        path = store.result_dir / job_id / "trajectory.jsonl"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no trajectory recorded (job unfinished?)")
        from fastapi.responses import PlainTextResponse

        return PlainTextResponse(path.read_text(), media_type="application/jsonl")

    return app
