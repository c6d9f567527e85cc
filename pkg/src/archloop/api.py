"""HTTP facade over the workflow engine.

Every mutating endpoint is a thin adapter onto one engine operation, so
the journal trace of an API call equals the trace of the direct call.
Iterations run as background jobs surfaced through polling.

Endpoints:
    POST /sessions {subject}                     create a session
    GET  /sessions/{id}[?iteration=n]            session view with diff
    POST /sessions/{id}/iterations               start an iteration job
    GET  /jobs/{job_id}                          poll a job
    POST /sessions/{id}/answers {question, answer}
    POST /sessions/{id}/ratings {alternative, rating}
    POST /sessions/{id}/pins    {service}
    GET  /sessions/{id}/export?format=md|json
    GET  /healthz

Error bodies are ``{"error": {"code", "message"}}``; the code-to-status
mapping is :data:`CODE_STATUS`. A static bearer token (env
``ARCHLOOP_API_TOKEN`` or the ``api_token`` argument) guards everything
except /healthz when set.
"""

from __future__ import annotations

import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .engine import Engine, EngineError, Session, UnknownIteration
from .state import (
    StateError,
    architecture_to_dict,
    diff_services,
    user_to_dict,
)

__all__ = ["CODE_STATUS", "JobHandle", "JobManager", "create_app"]

# Total mapping from machine-readable error codes to HTTP statuses.
CODE_STATUS: dict[str, int] = {
    "EmptySubject": 400,
    "EmptyKey": 400,
    "InvalidAnswer": 400,
    "InvalidRating": 400,
    "InvalidRequest": 400,
    "UnknownQuestion": 400,
    "UnknownAlternative": 400,
    "UnknownService": 400,
    "SchemaError": 400,
    "Unauthorized": 401,
    "UnknownSession": 404,
    "UnknownIteration": 404,
    "UnknownJob": 404,
    "IterationInFlight": 409,
    "KeyConflict": 409,
    "NoIterationYet": 409,
}


class UnknownJob(EngineError):
    code = "UnknownJob"


@dataclass
class JobHandle:
    """One background iteration job; ``state`` is Queued, Running, Done,
    or Failed (with a non-empty error)."""

    job_id: str
    session_id: str
    state: str = "Queued"
    error: str | None = None
    iteration: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "job_id": self.job_id,
            "session_id": self.session_id,
            "state": self.state,
            "error": self.error,
            "iteration": self.iteration,
        }


class JobManager:
    """Runs iterations on a thread pool, one active job per session.

    The reservation happens synchronously in :meth:`start`, so an
    iteration already in flight is rejected before a job is created.
    """

    def __init__(self, engine: Engine, max_workers: int = 8):
        self._engine = engine
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._jobs: dict[str, JobHandle] = {}
        self._lock = threading.Lock()

    def start(self, session_id: str) -> JobHandle:
        index = self._engine.begin_iteration(session_id)  # may raise
        handle = JobHandle(job_id=uuid.uuid4().hex, session_id=session_id)
        with self._lock:
            self._jobs[handle.job_id] = handle
        self._executor.submit(self._run, handle, index)
        return handle

    def _run(self, handle: JobHandle, index: int) -> None:
        handle.state = "Running"
        try:
            self._engine.run_reserved_iteration(handle.session_id)
        except Exception as exc:
            code = getattr(exc, "code", type(exc).__name__)
            handle.error = f"{code}: {exc}"
            handle.state = "Failed"
        else:
            handle.iteration = index
            handle.state = "Done"

    def get(self, job_id: str) -> JobHandle:
        with self._lock:
            handle = self._jobs.get(job_id)
        if handle is None:
            raise UnknownJob(f"no job {job_id!r}")
        return handle


class CreateSessionBody(BaseModel):
    subject: str


class AnswerBody(BaseModel):
    question: str
    answer: Literal["Yes", "No"]


class RatingBody(BaseModel):
    alternative: str
    rating: Literal["Good", "Bad"]


class PinBody(BaseModel):
    service: str


def _error_response(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=CODE_STATUS.get(code, 500),
        content={"error": {"code": code, "message": message}},
    )


def _session_view(session: Session, iteration: int | None) -> dict[str, Any]:
    count = len(session.iterations)
    if iteration is None:
        index = count if count else None
    else:
        if not 1 <= iteration <= count:
            raise UnknownIteration(
                f"session {session.id!r} has no iteration {iteration}"
            )
        index = iteration
    view: dict[str, Any] = {
        "session_id": session.id,
        "created_at": session.created_at,
        "status": session.status.value,
        "iteration_count": count,
        "user_state": user_to_dict(session.user_state),
        "iteration": index,
        "architecture": None,
        "diff": None,
    }
    if index is not None:
        arch = session.iterations[index - 1]
        prev = session.iterations[index - 2] if index >= 2 else arch
        view["architecture"] = architecture_to_dict(arch)
        view["diff"] = diff_services(prev, arch).to_dict()
    return view


def create_app(
    engine: Engine,
    *,
    api_token: str | None = None,
    ui_origin: str | None = None,
) -> FastAPI:
    """Build the application over an engine.

    ``api_token`` and ``ui_origin`` default to ``ARCHLOOP_API_TOKEN`` and
    ``ARCHLOOP_UI_ORIGIN``; an unset token leaves the API open.
    """
    if api_token is None:
        api_token = os.environ.get("ARCHLOOP_API_TOKEN") or None
    if ui_origin is None:
        ui_origin = os.environ.get("ARCHLOOP_UI_ORIGIN", "*")

    app = FastAPI(title="archloop", version="0.1.0")
    app.state.engine = engine
    jobs = JobManager(engine)
    app.state.jobs = jobs

    app.add_middleware(
        CORSMiddleware,
        allow_origins=[ui_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if api_token and request.url.path != "/healthz":
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {api_token}":
                return _error_response("Unauthorized", "invalid or missing token")
        return await call_next(request)

    @app.exception_handler(EngineError)
    async def engine_error(request: Request, exc: EngineError):
        return _error_response(exc.code, str(exc))

    @app.exception_handler(StateError)
    async def state_error(request: Request, exc: StateError):
        return _error_response(exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        return _error_response("InvalidRequest", str(exc.errors()))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = engine.create_session(body.subject)
        return _session_view(session, None)

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str, iteration: int | None = None):
        session = engine.get_session(session_id)
        return _session_view(session, iteration)

    @app.post("/sessions/{session_id}/iterations", status_code=202)
    def start_iteration(session_id: str):
        return jobs.start(session_id).to_dict()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return jobs.get(job_id).to_dict()

    @app.post("/sessions/{session_id}/answers")
    def answer(session_id: str, body: AnswerBody):
        session = engine.answer_inquiry(session_id, body.question, body.answer)
        return _session_view(session, None)

    @app.post("/sessions/{session_id}/ratings")
    def rate(session_id: str, body: RatingBody):
        session = engine.rate_alternative(
            session_id, body.alternative, body.rating
        )
        return _session_view(session, None)

    @app.post("/sessions/{session_id}/pins")
    def pin(session_id: str, body: PinBody):
        session = engine.pin_service(session_id, body.service)
        return _session_view(session, None)

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, format: str = "md"):
        if format not in ("md", "json"):
            return _error_response(
                "InvalidRequest", f"format must be md or json, got {format!r}"
            )
        design = engine.export_design(session_id)
        if format == "md":
            return PlainTextResponse(
                design.to_markdown(), media_type="text/markdown"
            )
        return design.to_dict()

    return app
