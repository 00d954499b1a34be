"""Local HTTP facade over one shared engine.

Sessions exist only for turn bookkeeping; all of them drive the same
engine, matching one-user IME semantics. Error bodies always carry
``{error_code, message}`` plus an ``offset`` when one is known.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import OnlineEngine
from .errors import ContractError, SegmentationError

log = logging.getLogger(__name__)

PAGE_SIZE = 5


class ConvertRequest(BaseModel):
    session_id: str
    pinyin: str


class SelectRequest(BaseModel):
    session_id: str
    turn_id: int
    chosen_text: str


@dataclass
class ApiSession:
    session_id: str
    turns: dict = field(default_factory=dict)  # turn_id -> SessionTurn (pending)


def error_response(status: int, code: str, message: str, offset=None) -> JSONResponse:
    body = {"error_code": code, "message": message}
    if offset is not None:
        body["offset"] = offset
    return JSONResponse(status_code=status, content=body)


def create_app(engine: OnlineEngine, serve_ui: bool = False, ui_dir=None) -> FastAPI:
    app = FastAPI(title="pinyinime", docs_url=None, redoc_url=None)
    sessions: dict[str, ApiSession] = {}
    lock = threading.Lock()

    @app.post("/api/session")
    def new_session():
        session = ApiSession(session_id=uuid.uuid4().hex)
        with lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id}

    @app.post("/api/convert")
    def convert(req: ConvertRequest):
        session = sessions.get(req.session_id)
        if session is None:
            return error_response(404, "unknown_session", "no such session")
        if not req.pinyin:
            return error_response(422, "empty_input", "empty pinyin", offset=0)
        try:
            turn = engine.convert(req.pinyin)
        except SegmentationError as exc:
            return error_response(422, "unsegmentable", str(exc), offset=exc.offset)
        session.turns[turn.turn_id] = turn
        return {
            "turn_id": turn.turn_id,
            "candidates": [{"text": c.text, "score": c.score} for c in turn.shown],
            "page_size": PAGE_SIZE,
        }

    @app.post("/api/select")
    def select(req: SelectRequest):
        session = sessions.get(req.session_id)
        if session is None:
            return error_response(404, "unknown_session", "no such session")
        turn = session.turns.get(req.turn_id)
        if turn is None or turn.choice is not None:
            return error_response(409, "stale_turn", f"turn {req.turn_id} unknown or already selected")
        try:
            done = engine.submit_choice(turn, req.chosen_text)
        except ContractError as exc:
            return error_response(422, "length_mismatch", str(exc))
        return {
            "added_words": [e.hanzi for e in done.update.added],
            "vocab_size": len(engine.vocab),
            "flush_performed": engine.last_flush_turn == turn.turn_id,
        }

    @app.get("/api/stats")
    def stats():
        counted = sum(1 for s in sessions.values()
                      for t in s.turns.values() if t.choice is not None)
        data = engine.stats()
        data["turns"] = counted
        return data

    if serve_ui and ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def run_server(engine: OnlineEngine, host="127.0.0.1", port=8601,
               serve_ui=False, ui_dir=None):
    import uvicorn

    app = create_app(engine, serve_ui=serve_ui, ui_dir=ui_dir)
    log.info("serving on http://%s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
