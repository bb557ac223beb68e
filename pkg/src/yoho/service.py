"""HTTP facade for interactive one-image runs.

Routes:
    POST /api/runs               multipart image + annotation + profile -> 202 {run_id}
    GET  /api/runs               run listing (newest first)
    GET  /api/runs/{id}          state record
    GET  /api/runs/{id}/mask     native-resolution binary mask PNG (404 before done)
    GET  /api/runs/{id}/history  training history CSV

Run execution is serialized by a single worker thread (FIFO); status
reads never touch the worker, so polls stay fast during training.
"""
from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image

from yoho import annotation as anno
from yoho import render as render_mod
from yoho import train_infer
from yoho.config import PROFILES, load_config
from yoho.errors import YohoError

MAX_IMAGE_BYTES = 32 * 1024 * 1024

STATES = ("queued", "rendering", "training", "inferring", "done", "failed")


@dataclass
class RunRecord:
    run_id: str
    state: str = "queued"
    profile: str = "smoke"
    step: int = 0
    total_steps: int = 0
    error: str | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


class RunStore:
    """Single-writer / multi-reader table of run records, persisted per run."""

    def __init__(self, output_root: Path):
        self.output_root = output_root
        self._records: dict[str, RunRecord] = {}
        self._lock = threading.Lock()
        self._load_existing()

    def _load_existing(self) -> None:
        if not self.output_root.is_dir():
            return
        for record_file in sorted(self.output_root.glob("*/record.json")):
            try:
                doc = json.loads(record_file.read_text())
                rec = RunRecord(**doc)
            except (json.JSONDecodeError, TypeError):
                continue
            if rec.state not in ("done", "failed"):
                rec.state, rec.error = "failed", "interrupted by service restart"
            self._records[rec.run_id] = rec

    def run_dir(self, run_id: str) -> Path:
        return self.output_root / run_id

    def create(self, profile: str) -> RunRecord:
        rec = RunRecord(run_id=uuid.uuid4().hex[:12], profile=profile)
        with self._lock:
            self._records[rec.run_id] = rec
        self._persist(rec)
        return rec

    def get(self, run_id: str) -> RunRecord | None:
        with self._lock:
            return self._records.get(run_id)

    def list(self) -> list[RunRecord]:
        with self._lock:
            return sorted(self._records.values(), key=lambda r: r.created_at, reverse=True)

    def update(self, run_id: str, **changes) -> RunRecord:
        with self._lock:
            rec = self._records[run_id]
            for key, value in changes.items():
                setattr(rec, key, value)
            rec.updated_at = time.time()
        self._persist(rec)
        return rec

    def _persist(self, rec: RunRecord) -> None:
        run_dir = self.run_dir(rec.run_id)
        run_dir.mkdir(parents=True, exist_ok=True)
        tmp = run_dir / "record.json.tmp"
        tmp.write_text(json.dumps(rec.to_dict(), indent=1))
        tmp.replace(run_dir / "record.json")


class RunWorker:
    """Executes queued runs one at a time."""

    def __init__(self, store: RunStore, device: str = "cpu"):
        self.store = store
        self.device = device
        self.queue: queue.Queue[str] = queue.Queue()
        self._thread: threading.Thread | None = None
        self._started = threading.Lock()

    def submit(self, run_id: str) -> None:
        self.ensure_started()
        self.queue.put(run_id)

    def ensure_started(self) -> None:
        with self._started:
            if self._thread is None or not self._thread.is_alive():
                self._thread = threading.Thread(target=self._loop, daemon=True, name="yoho-run-worker")
                self._thread.start()

    def _loop(self) -> None:
        while True:
            run_id = self.queue.get()
            try:
                self._execute(run_id)
            except Exception as exc:  # record and keep serving
                self.store.update(run_id, state="failed", error=f"{type(exc).__name__}: {exc}")

    def _execute(self, run_id: str) -> None:
        rec = self.store.get(run_id)
        run_dir = self.store.run_dir(run_id)
        cfg = load_config(None, profile=rec.profile)
        a = anno.parse_annotation((run_dir / "annotation.json").read_bytes(), base_dir=run_dir)

        self.store.update(run_id, state="rendering")
        manifest = render_mod.generate_dataset(a, cfg.render, run_dir / "dataset")

        self.store.update(run_id, state="training",
                          total_steps=cfg.train.phase1_steps + cfg.train.phase2_steps)
        last_push = 0.0

        def on_step(step: int, total: int, _loss: float) -> None:
            nonlocal last_push
            now = time.monotonic()
            if now - last_push >= 0.2 or step == total:
                self.store.update(run_id, step=step, total_steps=total)
                last_push = now

        model, history = train_infer.train(
            manifest, cfg.net, cfg.loss, cfg.train,
            device=self.device, checkpoint_path=run_dir / "checkpoint.pt", on_step=on_step,
        )
        history.save(run_dir / "history.csv")

        self.store.update(run_id, state="inferring")
        opts = train_infer.InferOptions(
            threshold=cfg.infer.threshold, roi_gating=cfg.infer.roi_gating,
            out_size=cfg.render.out_size, device=self.device,
        )
        result = train_infer.infer(a, model, opts)
        Image.fromarray(result.binary_mask.astype(np.uint8) * 255).save(run_dir / "mask.png")
        Image.fromarray(np.clip(result.prob_map * 255, 0, 255).astype(np.uint8)).save(run_dir / "prob.png")

        self.store.update(run_id, state="done", artifacts={
            "mask": "mask.png", "prob": "prob.png",
            "history": "history.csv", "checkpoint": "checkpoint.pt",
            "final_train_dice": history.final_train_dice,
        })


def create_app(output_root: str | Path = "runs", device: str = "cpu") -> FastAPI:
    output_root = Path(output_root)
    output_root.mkdir(parents=True, exist_ok=True)
    store = RunStore(output_root)
    worker = RunWorker(store, device=device)

    app = FastAPI(title="yoho service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.store = store
    app.state.worker = worker

    @app.post("/api/runs", status_code=202)
    async def submit_run(
        image: UploadFile = File(...),
        annotation: str = Form(...),
        profile: str = Form("smoke"),
    ):
        if profile not in PROFILES:
            raise HTTPException(400, detail={"errors": [f"unknown profile '{profile}'"], "warnings": []})
        payload = await image.read()
        if len(payload) > MAX_IMAGE_BYTES:
            raise HTTPException(413, detail=f"image exceeds {MAX_IMAGE_BYTES} bytes")

        rec = store.create(profile)
        run_dir = store.run_dir(rec.run_id)
        image_name = "image.png"
        (run_dir / image_name).write_bytes(payload)
        try:
            doc = json.loads(annotation)
            if not isinstance(doc, dict):
                raise ValueError("annotation must be a JSON object")
            doc["image"] = image_name
            (run_dir / "annotation.json").write_text(json.dumps(doc))
            a = anno.annotation_from_dict(doc, base_dir=run_dir)
            report = anno.validate(a)
        except (YohoError, ValueError, json.JSONDecodeError) as exc:
            store.update(rec.run_id, state="failed", error=str(exc))
            raise HTTPException(400, detail={"errors": [str(exc)], "warnings": []}) from exc
        if not report.ok:
            store.update(rec.run_id, state="failed", error="; ".join(report.errors))
            raise HTTPException(400, detail=report.to_dict())

        worker.submit(rec.run_id)
        return {"run_id": rec.run_id, "warnings": report.warnings}

    @app.get("/api/runs")
    def list_runs():
        return [r.to_dict() for r in store.list()]

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        rec = store.get(run_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown run {run_id}")
        return rec.to_dict()

    def _artifact(run_id: str, name: str, media_type: str):
        rec = store.get(run_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown run {run_id}")
        path = store.run_dir(run_id) / name
        if rec.state != "done" or not path.is_file():
            raise HTTPException(404, detail=f"artifact {name} not ready (state: {rec.state})")
        return FileResponse(path, media_type=media_type)

    @app.get("/api/runs/{run_id}/mask")
    def get_mask(run_id: str):
        return _artifact(run_id, "mask.png", "image/png")

    @app.get("/api/runs/{run_id}/history")
    def get_history(run_id: str):
        rec = store.get(run_id)
        if rec is None:
            raise HTTPException(404, detail=f"unknown run {run_id}")
        path = store.run_dir(run_id) / "history.csv"
        if not path.is_file():
            raise HTTPException(404, detail="history not ready")
        return FileResponse(path, media_type="text/csv")

    @app.exception_handler(YohoError)
    async def yoho_error_handler(_request, exc: YohoError):
        return JSONResponse(status_code=400, content={"errors": [str(exc)], "warnings": []})

    return app
