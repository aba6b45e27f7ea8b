"""HTTP+JSON service hosting live paired-comparison studies.

Endpoints:
    POST /studies                       create a study from a manifest
    GET  /studies/{id}                  manifest
    GET  /studies/{id}/results          aggregated scores per rendering tag
    POST /studies/{id}/sessions         open a session, returns the first pair
    GET  /sessions/{id}                 session record with transcript
    GET  /sessions/{id}/pair            the pending pair
    POST /sessions/{id}/choice          submit a winner (idempotent per token)
    POST /sessions/{id}/replay          ranking for a recorded winner sequence
    GET  /media/{file}                  stimulus media with range support

Stimulus media are operator-supplied pre-rendered files (video or image)
placed in the store's media directory; the service never renders 3D.
"""

from __future__ import annotations

import mimetypes
import re
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import ProtocolError
from .study_store import StaleTokenError, StudyStore, UnknownIdError


class ChoiceBody(BaseModel):
    token: int
    winner: str


class SessionBody(BaseModel):
    subject: str = ""
    rendering: str | None = None


class ReplayBody(BaseModel):
    winners: list[str]


_RANGE = re.compile(r"bytes=(\d*)-(\d*)")


def create_app(data_dir: str | Path) -> FastAPI:
    store = StudyStore(data_dir)
    app = FastAPI(title="texmeshqa study service")
    app.state.store = store

    @app.exception_handler(UnknownIdError)
    async def _unknown(request: Request, exc: UnknownIdError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(StaleTokenError)
    async def _stale(request: Request, exc: StaleTokenError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ProtocolError)
    async def _protocol(request: Request, exc: ProtocolError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _value(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/studies", status_code=201)
    def create_study(manifest: dict):
        created = store.create_study(manifest)
        return {"study_id": created.study_id}

    @app.get("/studies/{study_id}")
    def get_study(study_id: str):
        return store.get_study(study_id).to_dict()

    @app.get("/studies/{study_id}/results")
    def study_results(study_id: str):
        return store.study_results(study_id)

    @app.post("/studies/{study_id}/sessions", status_code=201)
    def create_session(study_id: str, body: SessionBody):
        record = store.create_session(study_id, subject=body.subject, rendering=body.rendering)
        return store.pending_pair(record.session_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.session_summary(session_id)

    @app.get("/sessions/{session_id}/pair")
    def get_pair(session_id: str):
        return store.pending_pair(session_id)

    @app.post("/sessions/{session_id}/choice")
    def submit_choice(session_id: str, body: ChoiceBody):
        return store.submit_choice(session_id, body.token, body.winner)

    @app.post("/sessions/{session_id}/replay")
    def replay(session_id: str, body: ReplayBody):
        return {"ranking": store.replay_ranking(session_id, body.winners)}

    @app.get("/media/{name}")
    def media(name: str, request: Request):
        path = store.media_dir / name
        if "/" in name or "\\" in name or ".." in name or not path.is_file():
            raise UnknownIdError(f"unknown media: {name}")
        data = path.read_bytes()
        content_type = mimetypes.guess_type(name)[0] or "application/octet-stream"
        headers = {"Accept-Ranges": "bytes"}
        range_header = request.headers.get("range")
        if range_header:
            match = _RANGE.match(range_header)
            if match:
                start = int(match.group(1) or 0)
                end = int(match.group(2)) if match.group(2) else len(data) - 1
                end = min(end, len(data) - 1)
                if start <= end:
                    headers["Content-Range"] = f"bytes {start}-{end}/{len(data)}"
                    return Response(
                        content=data[start : end + 1],
                        status_code=206,
                        media_type=content_type,
                        headers=headers,
                    )
            return Response(status_code=416, headers=headers)
        return Response(content=data, media_type=content_type, headers=headers)

    return app


def serve(data_dir: str | Path, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the study service with uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(data_dir), host=host, port=port, log_level="warning")
