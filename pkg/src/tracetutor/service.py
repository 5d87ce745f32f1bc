"""Versioned HTTP API over the session store.

All assessment state lives server-side; question payloads never carry the
answer key, misconception tags, or reference reasons, so a client cannot be
mined for solutions.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import assessment, dialogue
from .minilang import ParseError, SemanticError
from .session import (
    ProctorTokenRequired,
    SessionError,
    SessionStore,
    StaleQuestion,
    UnknownAssignment,
    UnknownSession,
    UnknownSubmission,
    ValidationError,
    WrongState,
)

API_PREFIX = "/api/v1"

_STATUS = {
    ValidationError: 400,
    ParseError: 400,
    SemanticError: 400,
    dialogue.EmptyAnswer: 400,
    ProctorTokenRequired: 403,
    UnknownAssignment: 404,
    UnknownSubmission: 404,
    UnknownSession: 404,
    WrongState: 409,
    StaleQuestion: 409,
    assessment.SessionNotFinished: 409,
}


def _error_payload(code: str, message: str, detail: Any = None) -> dict[str, Any]:
    return {"code": code, "message": message, "detail": detail}


class SubmissionBody(BaseModel):
    assignment_id: str
    source: str


class SessionBody(BaseModel):
    submission_id: str
    mode: str = "FORMATIVE"
    seed: int = 0
    question_budget: Optional[int] = None
    proctor_token: Optional[str] = None


class Tier1Body(BaseModel):
    question_id: str
    choice_index: int = Field(ge=0, le=3)


class TextBody(BaseModel):
    text: str


def create_app(store: SessionStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="tracetutor", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def _handler(status: int):
        async def handle(request: Request, exc: Exception):
            code = getattr(exc, "code", type(exc).__name__.lower())
            return JSONResponse(status_code=status,
                                content=_error_payload(code, str(exc)))
        return handle

    for kind, status in _STATUS.items():
        app.add_exception_handler(kind, _handler(status))
    app.add_exception_handler(SessionError, _handler(409))

    @app.get(API_PREFIX + "/assignments")
    def list_assignments():
        out = []
        for assignment_id in store.list_assignments():
            config = store.load_assignment(assignment_id)
            out.append({"assignment_id": assignment_id,
                        "question_budget": config.question_budget,
                        "tests": len(config.tests)})
        return {"assignments": out}

    @app.post(API_PREFIX + "/submissions", status_code=201)
    def create_submission(body: SubmissionBody):
        submission = store.create_submission(body.assignment_id, body.source)
        return {
            "submission_id": submission.submission_id,
            "assignment_id": submission.assignment_id,
            "received_at": submission.received_at,
            "functional": {
                "pass_fraction": submission.functional.pass_fraction,
                "tests": [{"name": t["name"], "passed": t["passed"]}
                          for t in submission.functional.tests],
            },
        }

    @app.post(API_PREFIX + "/sessions", status_code=201)
    def create_session(body: SessionBody):
        session = store.start_session(body.submission_id, body.mode, body.seed,
                                      body.question_budget, body.proctor_token)
        return session.client_view()

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get_session(session_id).client_view()

    @app.post(API_PREFIX + "/sessions/{session_id}/tier1")
    def submit_tier1(session_id: str, body: Tier1Body):
        result = store.submit_tier1(session_id, body.question_id, body.choice_index)
        return {**result, "session": store.get_session(session_id).client_view()}

    @app.post(API_PREFIX + "/sessions/{session_id}/tier2")
    def submit_tier2(session_id: str, body: TextBody):
        result = store.submit_tier2(session_id, body.text)
        return {**result, "session": store.get_session(session_id).client_view()}

    @app.post(API_PREFIX + "/sessions/{session_id}/message")
    def message(session_id: str, body: TextBody):
        result = store.message(session_id, body.text)
        return {**result, "session": store.get_session(session_id).client_view()}

    @app.get(API_PREFIX + "/sessions/{session_id}/report")
    def report(session_id: str):
        return store.get_report(session_id).to_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        static_path = Path(static_dir)

        @app.get("/")
        def index():
            return RedirectResponse("/app/")

        app.mount("/app", StaticFiles(directory=static_path, html=True), name="app")

    return app
