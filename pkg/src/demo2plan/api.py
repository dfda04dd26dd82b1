"""HTTP API for the review UI: job creation, stage advancement, review actions,
artifact retrieval. Errors are problem-details JSON bodies with stable codes."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import InvalidArgument
from .jobs import InvalidState, JobStore, StaleRevision, UnknownJob
from .streams import FormatError, InvariantError
from .vlm import BudgetExceeded, FixtureMiss


def _problem(status: int, title: str, detail: str, code: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={
            "type": "about:blank",
            "title": title,
            "status": status,
            "detail": detail,
            "code": code,
        },
        media_type="application/problem+json",
    )


_ERROR_MAP = [
    (UnknownJob, 404, "job not found", "unknown_job"),
    (StaleRevision, 409, "stale revision", "stale_revision"),
    (InvalidState, 409, "invalid job state", "invalid_state"),
    (InvalidArgument, 400, "invalid argument", "invalid_argument"),
    (FormatError, 400, "malformed detection stream", "stream_format"),
    (InvariantError, 400, "detection stream violates invariants", "stream_invariant"),
    (FixtureMiss, 424, "fixture missing for replay", "fixture_miss"),
    (BudgetExceeded, 400, "token budget exceeded", "budget_exceeded"),
]


def create_app(store: JobStore, ui_dir: Optional[Path | str] = None) -> FastAPI:
    app = FastAPI(title="demo2plan", version="0.1.0")

    for exc_type, status, title, code in _ERROR_MAP:
        def handler(request: Request, exc: Exception, status=status, title=title, code=code):
            return _problem(status, title, str(exc), code)

        app.add_exception_handler(exc_type, handler)

    @app.get("/api/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/jobs")
    async def create_job(
        frames: list[UploadFile] = File(default=[]),
        stream: Optional[UploadFile] = File(default=None),
        instruction: Optional[str] = Form(default=None),
    ):
        frame_payloads = [(f.filename or "frame.png", await f.read()) for f in frames]
        stream_bytes = await stream.read() if stream is not None else None
        job_id = store.create_job(
            frames=frame_payloads or None,
            stream_bytes=stream_bytes,
            instruction=instruction,
        )
        return {"job_id": job_id}

    @app.get("/api/jobs")
    def list_jobs():
        return {"jobs": store.list_jobs()}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return store.load(job_id).to_dict()

    @app.post("/api/jobs/{job_id}/advance")
    def advance(job_id: str):
        return store.advance(job_id).to_dict()

    @app.post("/api/jobs/{job_id}/review")
    async def review(job_id: str, request: Request):
        body = await request.json()
        action = body.get("action")
        if not action:
            return _problem(400, "invalid argument", "review action is required", "invalid_argument")
        record = store.submit_review(
            job_id,
            action=action,
            payload=body.get("payload") or {},
            expected_revision=body.get("expected_revision"),
        )
        return record.to_dict()

    def artifact_endpoint(name: str):
        def endpoint(job_id: str):
            store.load(job_id)  # 404 for unknown jobs
            payload = store.read_artifact(job_id, name)
            if payload is None:
                return _problem(404, "artifact not available", f"job has no {name} yet", "missing_artifact")
            return payload

        endpoint.__name__ = f"get_{name}"
        return endpoint

    app.get("/api/jobs/{job_id}/transcript")(artifact_endpoint("transcript"))
    app.get("/api/jobs/{job_id}/anchors")(artifact_endpoint("anchors"))
    app.get("/api/jobs/{job_id}/plan")(artifact_endpoint("plan"))
    app.get("/api/jobs/{job_id}/document")(artifact_endpoint("document"))

    if ui_dir is not None and Path(ui_dir).is_dir():
        # same-origin hosting for the built review UI (frontend/dist)
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
