"""HTTP service exposing segmentation, metrics, and slice data.

JSON-over-HTTP API (see API.md for the full reference):

* ``POST /volumes`` — NIfTI bytes in the body; returns volume_id + geometry.
* ``POST /masks`` — NIfTI mask upload (optional ``volume_id`` query for
  geometry validation); returns mask_id.
* ``POST /segment`` — ``{"volume_id", "modality"}``; queues an inference
  job and returns its job_id.
* ``GET /jobs/{id}`` — job record; ``GET /jobs/{id}/result`` is 409
  until the job is done.
* ``GET /volumes/{id}/slices/{axis}/{index}`` — 8-bit grayscale PNG,
  windowed to the volume's 1st-99th intensity percentile; with
  ``?overlay=mask_id`` the response is instead the mask's slice as a
  0/255 PNG for the client to composite.
* ``GET /masks/{id}/volume-ml`` / ``GET /masks/{id}/download``.

Volumes, masks, and jobs live in concurrency-safe in-memory stores;
segmentation jobs run FIFO on a single background worker so at most one
inference holds the weights at a time.
"""

from __future__ import annotations

import io
import queue
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse

from . import niftio, segmetrics
from .errors import VolsegError
from .segnet import NetworkConfig, Weights, sliding_window_infer
from .volcore import SegmentationPair

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class JobRecord:
    job_id: str
    kind: str
    inputs: dict
    state: str = "queued"  # queued -> running -> done | error
    result: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "inputs": self.inputs,
            "state": self.state,
            "result": self.result,
            "error": self.error,
        }


class _Store:
    """Lock-guarded id -> object map handing out opaque ids."""

    def __init__(self, prefix: str):
        self._prefix = prefix
        self._lock = threading.Lock()
        self._items: dict[str, object] = {}

    def add(self, obj) -> str:
        key = f"{self._prefix}-{uuid.uuid4().hex[:12]}"
        with self._lock:
            self._items[key] = obj
        return key

    def get(self, key: str):
        with self._lock:
            return self._items.get(key)

    def put(self, key: str, obj) -> None:
        with self._lock:
            self._items[key] = obj


def _window_levels(data: np.ndarray) -> tuple[float, float]:
    lo, hi = np.percentile(data, [1.0, 99.0])
    if hi <= lo:
        hi = lo + 1.0
    return float(lo), float(hi)


def _slice_2d(vol3d: np.ndarray, axis: int, index: int) -> np.ndarray:
    # remaining axes keep their (x, y, z) relative order; rows = later axis
    sl = np.take(vol3d, index, axis=axis)
    return sl.T  # PNG rows = second remaining axis, columns = first


def _to_png(img8: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(img8, mode="L").save(buf, format="PNG")
    return buf.getvalue()


class InferenceWorker:
    """Single-threaded FIFO executor for segmentation jobs."""

    def __init__(self, app_state):
        self.state = app_state
        self.queue: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def submit(self, job: JobRecord) -> None:
        self.queue.put(job)

    def _run(self) -> None:
        while True:
            job = self.queue.get()
            if job is None:
                return
            job.state = "running"
            try:
                grid = self.state.volumes.get(job.inputs["volume_id"])
                weights, config = self.state.weight_sets[job.inputs["modality"]]
                mask = sliding_window_infer(grid, weights, config)
                mask_id = self.state.masks.add(mask)
                job.result = {
                    "mask_id": mask_id,
                    "foreground_voxels": int(mask.voxels.sum(dtype=np.int64)),
                }
                job.state = "done"
            except Exception as exc:  # noqa: BLE001 - job errors surface via the record
                job.error = f"{type(exc).__name__}: {exc}"
                job.state = "error"

    def stop(self) -> None:
        self.queue.put(None)


class AppState:
    def __init__(self, weight_sets: dict[str, tuple[Weights, NetworkConfig]]):
        self.volumes = _Store("vol")
        self.masks = _Store("mask")
        self.jobs = _Store("job")
        self.weight_sets = weight_sets
        self.worker = InferenceWorker(self)


def create_app(weight_sets: dict[str, tuple[Weights, NetworkConfig]] | None = None) -> FastAPI:
    """Build the service; ``weight_sets`` maps modality tags (T1/T2) to
    (weights, config) pairs used by ``POST /segment``."""
    app = FastAPI(title="volseg service")
    state = AppState(weight_sets or {})
    app.state.volseg = state

    def err(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"detail": message})

    @app.post("/volumes")
    async def upload_volume(request: Request):
        body = await request.body()
        try:
            grid, _ = niftio.read_nifti(body)
        except VolsegError as exc:
            return err(400, f"{type(exc).__name__}: {exc}")
        volume_id = state.volumes.add(grid)
        return {"volume_id": volume_id, "dims": list(grid.dims), "spacing": list(grid.spacing)}

    @app.post("/masks")
    async def upload_mask(request: Request, volume_id: str | None = Query(default=None)):
        body = await request.body()
        try:
            mask = niftio.read_mask(body)
        except VolsegError as exc:
            return err(400, f"{type(exc).__name__}: {exc}")
        if volume_id is not None:
            grid = state.volumes.get(volume_id)
            if grid is None:
                return err(404, f"unknown volume {volume_id}")
            if grid.dims != mask.dims or not np.allclose(grid.spacing, mask.spacing, rtol=1e-6):
                return err(400, "mask geometry does not match the volume")
        mask_id = state.masks.add(mask)
        return {
            "mask_id": mask_id,
            "dims": list(mask.dims),
            "spacing": list(mask.spacing),
            "foreground_voxels": int(mask.voxels.sum(dtype=np.int64)),
        }

    @app.post("/segment")
    async def segment(payload: dict):
        volume_id = payload.get("volume_id")
        modality = payload.get("modality")
        if state.volumes.get(volume_id) is None:
            return err(404, f"unknown volume {volume_id}")
        if modality not in state.weight_sets:
            return err(
                400,
                f"unknown modality {modality!r}; loaded: {sorted(state.weight_sets)}",
            )
        job = JobRecord(job_id="", kind="segment",
                        inputs={"volume_id": volume_id, "modality": modality})
        job.job_id = state.jobs.add(job)
        state.worker.submit(job)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            return err(404, f"unknown job {job_id}")
        return job.to_dict()

    @app.get("/jobs/{job_id}/result")
    async def get_job_result(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            return err(404, f"unknown job {job_id}")
        if job.state == "error":
            return err(409, f"job failed: {job.error}")
        if job.state != "done":
            return err(409, f"job is {job.state}")
        return job.result

    @app.get("/volumes/{volume_id}/slices/{axis}/{index}")
    async def get_slice(volume_id: str, axis: str, index: int,
                        overlay: str | None = Query(default=None)):
        grid = state.volumes.get(volume_id)
        if grid is None:
            return err(404, f"unknown volume {volume_id}")
        if axis not in AXES:
            return err(400, f"axis must be one of {sorted(AXES)}")
        ax = AXES[axis]
        extent = grid.dims[ax]
        if not 0 <= index < extent:
            return err(400, f"slice index {index} out of range [0, {extent}) on axis {axis}")
        if overlay is not None:
            mask = state.masks.get(overlay)
            if mask is None:
                return err(404, f"unknown mask {overlay}")
            if mask.dims != grid.dims:
                return err(400, "overlay mask geometry does not match the volume")
            img8 = (_slice_2d(mask.voxels, ax, index) * 255).astype(np.uint8)
        else:
            lo, hi = _window_levels(grid.data)
            sl = _slice_2d(grid.data, ax, index)
            img8 = (np.clip((sl - lo) / (hi - lo), 0.0, 1.0) * 255).round().astype(np.uint8)
        return Response(content=_to_png(np.ascontiguousarray(img8)), media_type="image/png")

    @app.get("/masks/{mask_id}/volume-ml")
    async def mask_volume(mask_id: str):
        mask = state.masks.get(mask_id)
        if mask is None:
            return err(404, f"unknown mask {mask_id}")
        return {"ml": segmetrics.mask_volume_ml(mask)}

    @app.get("/masks/{mask_id}/download")
    async def mask_download(mask_id: str, gzipped: bool = Query(default=True, alias="gz")):
        mask = state.masks.get(mask_id)
        if mask is None:
            return err(404, f"unknown mask {mask_id}")
        data = niftio.write_mask(mask, compressed=gzipped)
        name = f"{mask_id}.nii.gz" if gzipped else f"{mask_id}.nii"
        return Response(
            content=data,
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{name}"'},
        )

    @app.post("/metrics")
    async def metrics(payload: dict):
        pred = state.masks.get(payload.get("prediction_id"))
        ref = state.masks.get(payload.get("reference_id"))
        if pred is None or ref is None:
            return err(404, "unknown prediction or reference mask id")
        try:
            record = segmetrics.evaluate_pair(SegmentationPair(prediction=pred, reference=ref))
        except VolsegError as exc:
            return err(400, f"{type(exc).__name__}: {exc}")
        return record.to_dict()

    return app


def run_server(weight_sets, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(create_app(weight_sets), host=host, port=port, log_level="warning")
