"""HTTP service exposing generators, directions, morphs, and adapt jobs.

Artifacts live in an on-disk registry: an append-only JSONL index next to
content-addressed blob files.  Read endpoints are deterministic given the
request body (seeds included), so responses can be cached or compared by
hash; adaptation runs on a single background worker with a bounded queue.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import queue
import shutil
import threading
import time
import uuid
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import torch
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from . import apps, directions as dirs, trainer
from .arch import GeneratorWeights, SamplerConfig, affine_styles, map_latent, sample_z, synthesize
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import FingerprintError, StyleDomainError
from .losses import OneShotSpec, TextDomainSpec, get_backend
from .paramspace import parse_kind
from .reporting import to_png_bytes

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True)
class RegistryEntry:
    id: str
    kind: str  # "generator" | "direction" | "adaptation_job"
    path: str
    fingerprint: str
    metadata: dict
    created_at: float


@dataclass
class JobStatus:
    job_id: str
    state: str = "queued"  # queued | running | done | failed
    progress: tuple[int, int] = (0, 0)
    result_id: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["progress"] = {"done": self.progress[0], "total": self.progress[1]}
        return d


class Registry:
    """Append-only artifact index; blobs are content-addressed files."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.blob_dir = self.root / "blobs"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.jsonl"
        self._lock = threading.Lock()
        self.entries: dict[str, RegistryEntry] = {}
        if self.index_path.exists():
            for line in self.index_path.read_text().splitlines():
                if line.strip():
                    entry = RegistryEntry(**json.loads(line))
                    self.entries[entry.id] = entry

    def _append(self, entry: RegistryEntry) -> None:
        with self._lock:
            if entry.id in self.entries:
                return
            self.entries[entry.id] = entry
            with open(self.index_path, "a") as fh:
                fh.write(json.dumps(asdict(entry), sort_keys=True) + "\n")

    def register_file(self, kind: str, src: str | Path, metadata: dict | None = None) -> RegistryEntry:
        src = Path(src)
        if kind == "generator":
            fingerprint = load_checkpoint(src).descriptor.fingerprint
            suffix = ".ckpt"
        elif kind == "direction":
            fingerprint = dirs.load(src).fingerprint
            suffix = ".sdir"
        else:
            raise StyleDomainError(f"cannot register artifact kind {kind!r}")
        digest = hashlib.sha256(src.read_bytes()).hexdigest()[:16]
        entry_id = f"{kind[:3]}-{digest}"
        blob = self.blob_dir / f"{entry_id}{suffix}"
        if not blob.exists():
            shutil.copyfile(src, blob)
        entry = RegistryEntry(
            id=entry_id,
            kind=kind,
            path=str(blob),
            fingerprint=fingerprint,
            metadata=metadata or {},
            created_at=time.time(),
        )
        self._append(entry)
        return entry

    def register_direction(self, direction: dirs.StyleDomainDirection, metadata: dict | None = None) -> RegistryEntry:
        tmp = self.blob_dir / f"tmp-{uuid.uuid4().hex}.sdir"
        try:
            dirs.save(direction, tmp)
            return self.register_file("direction", tmp, metadata)
        finally:
            tmp.unlink(missing_ok=True)

    def register_generator(self, weights: GeneratorWeights, metadata: dict | None = None) -> RegistryEntry:
        tmp = self.blob_dir / f"tmp-{uuid.uuid4().hex}.ckpt"
        try:
            save_checkpoint(weights, tmp)
            return self.register_file("generator", tmp, metadata)
        finally:
            tmp.unlink(missing_ok=True)

    def get(self, entry_id: str) -> RegistryEntry:
        if entry_id not in self.entries:
            raise KeyError(entry_id)
        return self.entries[entry_id]

    def load_generator(self, entry_id: str) -> GeneratorWeights:
        entry = self.get(entry_id)
        if entry.kind != "generator":
            raise KeyError(entry_id)
        return load_checkpoint(entry.path)

    def load_direction(self, entry_id: str) -> dirs.StyleDomainDirection:
        entry = self.get(entry_id)
        if entry.kind != "direction":
            raise KeyError(entry_id)
        return dirs.load(entry.path)


# --- request bodies -----------------------------------------------------------


class DirectionTerm(BaseModel):
    id: str
    coeff: float = 1.0


class GenerateRequest(BaseModel):
    generator_id: str
    directions: list[DirectionTerm] = []
    strength: float = 1.0
    seeds: list[int] = [0]
    psi: float = 0.7


class MixRequest(BaseModel):
    directions: list[DirectionTerm]
    domain_label: str | None = None


class MorphRequest(BaseModel):
    stages: list[dict]
    frames_per_stage: int = 8
    seed: int = 0
    psi: float = 0.7
    preview_at: float | None = None


class AdaptRequest(BaseModel):
    generator_id: str
    space: str = "stylespace"
    loss: dict
    regime: str = "similar_text"
    iterations: int | None = None
    batch_size: int | None = None
    seed: int = 0
    backend: str = "stub-train"
    domain_label: str = ""


class RegisterRequest(BaseModel):
    kind: str
    path: str
    metadata: dict = {}


def _hash_response(payload: bytes, media_type: str) -> Response:
    return Response(
        content=payload,
        media_type=media_type,
        headers={"X-Content-SHA256": hashlib.sha256(payload).hexdigest()},
    )


def _zip_frames(named_pngs: list[tuple[str, bytes]]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, blob in named_pngs:
            info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
            zf.writestr(info, blob)
    return buf.getvalue()


def create_app(
    registry_dir: str | Path,
    adapt_queue_size: int = 4,
    start_worker: bool = True,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    registry = Registry(registry_dir)
    app = FastAPI(title="styledomain service")
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    jobs: dict[str, JobStatus] = {}
    jobs_lock = threading.Lock()
    work_queue: "queue.Queue[tuple[str, AdaptRequest]]" = queue.Queue(maxsize=adapt_queue_size)

    app.state.registry = registry

    def _get_or_404(loader, entry_id: str):
        try:
            return loader(entry_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown artifact {entry_id!r}")

    def _mixed_direction(terms: list[DirectionTerm]) -> dirs.StyleDomainDirection:
        for term in terms:
            if not math.isfinite(term.coeff):
                raise HTTPException(status_code=422, detail="coefficients must be finite")
        loaded = [(_get_or_404(registry.load_direction, t.id), t.coeff) for t in terms]
        try:
            return dirs.mix(loaded)
        except FingerprintError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except StyleDomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/registry")
    def list_registry() -> list[dict]:
        return [asdict(e) for e in registry.entries.values()]

    @app.post("/registry")
    def register(req: RegisterRequest) -> dict:
        try:
            entry = registry.register_file(req.kind, req.path, req.metadata)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except StyleDomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return asdict(entry)

    @app.post("/generate")
    def generate_images(req: GenerateRequest):
        weights = _get_or_404(registry.load_generator, req.generator_id)
        direction = None
        if req.directions:
            direction = _mixed_direction(req.directions)
            try:
                direction.validate_for(weights.descriptor)
            except (FingerprintError, StyleDomainError) as exc:
                raise HTTPException(status_code=409, detail=str(exc))
        cfg = SamplerConfig(truncation_psi=req.psi)
        pngs: list[tuple[str, bytes]] = []
        for seed in req.seeds:
            z = sample_z(weights.descriptor, seed)
            per_seed_cfg = SamplerConfig(truncation_psi=req.psi, seed=seed)
            w = map_latent(weights, z, per_seed_cfg)
            styles = affine_styles(weights, w)
            offsets = None
            if direction is not None:
                styles = dirs.apply(styles, direction, req.strength)
                offsets = direction.offsets
            img = synthesize(weights, styles, offsets=offsets, cfg=per_seed_cfg).squeeze(0)
            pngs.append((f"seed_{seed:05d}.png", to_png_bytes(img)))
        if len(pngs) == 1:
            return _hash_response(pngs[0][1], "image/png")
        return _hash_response(_zip_frames(pngs), "application/zip")

    @app.post("/mix")
    def mix_directions(req: MixRequest) -> dict:
        if not req.directions:
            raise HTTPException(status_code=422, detail="mix needs at least one term")
        mixed = _mixed_direction(req.directions)
        if req.domain_label:
            from dataclasses import replace as dc_replace

            mixed = dc_replace(mixed, domain_label=req.domain_label)
        entry = registry.register_direction(mixed, {"mixed_from": [t.id for t in req.directions]})
        return asdict(entry)

    def _plan_from_request(req: MorphRequest) -> apps.MorphPlan:
        try:
            return apps.plan_from_document(
                {"stages": req.stages, "frames_per_stage": req.frames_per_stage},
                resolve_generator=lambda ref: _get_or_404(registry.load_generator, ref),
                resolve_direction=lambda ref: _get_or_404(registry.load_direction, ref),
            )
        except StyleDomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/morph")
    def morph(req: MorphRequest):
        plan = _plan_from_request(req)
        gen0 = plan.stages[0].state_at(0.0)[0]
        z = sample_z(gen0.descriptor, req.seed)
        cfg = SamplerConfig(truncation_psi=req.psi, seed=req.seed)
        try:
            if req.preview_at is not None:
                frame = apps.render_frame(plan, req.preview_at, z, cfg).squeeze(0)
                return _hash_response(to_png_bytes(frame), "image/png")
            frames = apps.render_morph(plan, z, cfg)
        except StyleDomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        pngs = [
            (f"frame_{i:05d}.png", to_png_bytes(f.squeeze(0))) for i, f in enumerate(frames)
        ]
        return _hash_response(_zip_frames(pngs), "application/zip")

    def _run_job(job_id: str, req: AdaptRequest) -> None:
        with jobs_lock:
            jobs[job_id].state = "running"
        try:
            parent = registry.load_generator(req.generator_id)
            kind = parse_kind(req.space)
            hp = trainer.preset(kind, req.regime)
            if req.iterations is not None or req.batch_size is not None or req.seed:
                from dataclasses import replace as dc_replace

                hp = dc_replace(
                    hp,
                    iterations=req.iterations if req.iterations is not None else hp.iterations,
                    batch_size=req.batch_size if req.batch_size is not None else hp.batch_size,
                    seed=req.seed,
                )
            loss_kind = req.loss.get("kind", "text")
            backend = None
            if loss_kind == "text":
                spec: Any = TextDomainSpec(
                    target_text=req.loss["target"], source_text=req.loss["source"]
                )
                backend = get_backend(req.backend)
            elif loss_kind == "mean_color":
                spec = trainer.mean_color_objective(req.loss["rgb"])
            else:
                raise StyleDomainError(f"unsupported loss kind {loss_kind!r}")
            with jobs_lock:
                jobs[job_id].progress = (0, hp.iterations)
            result = trainer.adapt(
                parent, kind, spec, backend, hp, domain_label=req.domain_label
            )
            if result.direction is not None:
                entry = registry.register_direction(
                    result.direction, {"job_id": job_id, "loss_trace": list(result.loss_trace)}
                )
            else:
                child, _ = result.build_child(parent)
                entry = registry.register_generator(child, {"job_id": job_id})
            with jobs_lock:
                jobs[job_id].state = "done"
                jobs[job_id].progress = (hp.iterations, hp.iterations)
                jobs[job_id].result_id = entry.id
        except Exception as exc:  # noqa: BLE001 - job isolation boundary
            with jobs_lock:
                jobs[job_id].state = "failed"
                jobs[job_id].error = str(exc)

    def _worker() -> None:
        while True:
            job_id, req = work_queue.get()
            _run_job(job_id, req)
            work_queue.task_done()

    if start_worker:
        worker = threading.Thread(target=_worker, daemon=True, name="styledomain-adapt")
        worker.start()

    @app.post("/adapt", status_code=202)
    def adapt_async(req: AdaptRequest) -> dict:
        _get_or_404(registry.get, req.generator_id)
        job_id = f"job-{uuid.uuid4().hex[:12]}"
        status = JobStatus(job_id=job_id)
        with jobs_lock:
            jobs[job_id] = status
        try:
            work_queue.put_nowait((job_id, req))
        except queue.Full:
            with jobs_lock:
                del jobs[job_id]
            raise HTTPException(status_code=429, detail="adaptation queue is full")
        return status.to_dict()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        with jobs_lock:
            if job_id not in jobs:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
            return jobs[job_id].to_dict()

    return app
