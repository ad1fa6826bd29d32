"""HTTP session service for live acuity-optimization runs.

Wraps :class:`~ctxbo.psychophysics.VaSession` behind a small JSON API: create
a session, fetch the current letter trial, submit the observer's response,
read the evolving estimate. Sessions live in memory; operations on one
session are serialized by a per-session lock while distinct sessions proceed
independently.
"""

from __future__ import annotations

import threading
import uuid
from string import ascii_uppercase

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .acquisition import AcquisitionConfig
from .psychophysics import SessionClosed, VaConfig, VaSession
from .rules import rules_for_mode


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SessionConfigBody(BaseModel):
    rule: str = "ucb-ald"
    iterations: int = Field(default=260, ge=1)
    seed: int = Field(default=0, ge=0)
    slope: float = Field(default=5.0, gt=0)
    simulated: bool = True
    truth: list[float] | None = None
    calibration: float = Field(default=40.0, gt=0)  # px of letter height at s = 0


class ResponseBody(BaseModel):
    c: int = Field(ge=0, le=1)
    iteration: int | None = None


class _Entry:
    def __init__(self, session: VaSession, calibration: float):
        self.session = session
        self.calibration = calibration
        self.lock = threading.Lock()
        self.letter_cache: dict[int, str] = {}

    def letter_for(self, iteration: int) -> str:
        if iteration not in self.letter_cache:
            idx = int(self.session.stimulus_rng.integers(26))
            self.letter_cache[iteration] = ascii_uppercase[idx]
        return self.letter_cache[iteration]


def create_app(acq_config: AcquisitionConfig | None = None) -> FastAPI:
    app = FastAPI(title="ctxbo refraction service")
    sessions: dict[str, _Entry] = {}

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "invalid-request", "message": str(exc.errors())},
        )

    def entry_of(session_id: str) -> _Entry:
        entry = sessions.get(session_id)
        if entry is None:
            raise ApiError(404, "unknown-session", f"no session {session_id!r}")
        return entry

    def trial_payload(entry: _Entry) -> dict:
        session = entry.session
        if session.status == "complete" or session.done:
            return {"done": True, "iteration": session.iteration}
        try:
            proposal = session.current_proposal()
        except SessionClosed as exc:
            raise ApiError(409, "session-closed", str(exc)) from None
        s = float(proposal.s[0])
        iteration = session.iteration
        return {
            "done": False,
            "iteration": iteration,
            "s": s,
            "x": [float(v) for v in proposal.x],
            "stimulus": {
                "letter": entry.letter_for(iteration),
                "size_px": entry.calibration * 10.0**s,
            },
        }

    @app.post("/sessions")
    def create_session(body: SessionConfigBody):
        if body.rule not in rules_for_mode("binary"):
            raise ApiError(422, "unknown-rule", f"rule {body.rule!r} not available")
        config = VaConfig(
            rule=body.rule,
            iterations=body.iterations,
            seed=body.seed,
            slope=body.slope,
            truth=tuple(body.truth) if body.truth is not None else None,
            simulated=body.simulated,
        )
        session_id = uuid.uuid4().hex
        sessions[session_id] = _Entry(VaSession(config, acq_config), body.calibration)
        return {"id": session_id}

    @app.get("/sessions/{session_id}/trial")
    def get_trial(session_id: str):
        entry = entry_of(session_id)
        with entry.lock:
            if entry.session.status == "closed":
                raise ApiError(409, "session-closed", "session was closed")
            return trial_payload(entry)

    @app.post("/sessions/{session_id}/response")
    def submit_response(session_id: str, body: ResponseBody):
        entry = entry_of(session_id)
        with entry.lock:
            session = entry.session
            if session.status == "closed":
                raise ApiError(409, "session-closed", "session was closed")
            if session.status == "complete" or session.done:
                raise ApiError(409, "session-complete", "all trials already answered")
            if body.iteration is not None and body.iteration != session.iteration:
                raise ApiError(
                    409,
                    "stale-response",
                    f"response targets iteration {body.iteration}, "
                    f"current is {session.iteration}",
                )
            try:
                session.record_response(body.c)
            except SessionClosed as exc:
                raise ApiError(409, "no-outstanding-proposal", str(exc)) from None
            return trial_payload(entry)

    @app.get("/sessions/{session_id}/estimate")
    def get_estimate(session_id: str):
        entry = entry_of(session_id)
        with entry.lock:
            return entry.session.estimate()

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str):
        entry = entry_of(session_id)
        with entry.lock:
            entry.session.close()
        del sessions[session_id]
        return {"closed": True}

    return app


app = create_app()
