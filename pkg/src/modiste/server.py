"""HTTP surface for the session engine.

Everything a client needs is JSON over a handful of routes plus one
server-sent-events stream; images travel as raw bytes and are addressed by
their content hash, so artifact responses are immutable and cacheable.
"""

from __future__ import annotations

import queue
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from modiste.errors import (
    EngineError,
    ImageRejectedError,
    NotFoundError,
    ParameterError,
)
from modiste.session import Engine
from modiste.store import canonical_json


class MessageIn(BaseModel):
    text: str


def create_app(engine: Engine, frontend_dist: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="modiste", docs_url=None, redoc_url=None)

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(ImageRejectedError)
    async def _image_rejected(request: Request, exc: ImageRejectedError):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(ParameterError)
    async def _bad_parameter(request: Request, exc: ParameterError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/api/sessions", status_code=201)
    def create_session():
        session = engine.create_session()
        return {"sessionId": session.id, "state": session.state}

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": engine.session_ids()}

    @app.post("/api/sessions/{session_id}/image")
    async def attach_image(session_id: str, request: Request):
        session = engine.get_session(session_id)
        data = await request.body()
        if not data:
            raise ParameterError("the request body must contain the image bytes")
        return session.attach_image(data)

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        session = engine.get_session(session_id)
        turns = session.handle_message(message.text)
        return {
            "turns": turns,
            "state": session.state,
            "currentImageRef": session.current_image_ref,
        }

    @app.get("/api/sessions/{session_id}/transcript")
    def transcript(session_id: str):
        return engine.get_session(session_id).snapshot()

    @app.get("/api/sessions/{session_id}/events")
    def events(session_id: str, replay: int = 0):
        session = engine.get_session(session_id)

        def stream():
            sub = session.subscribe()
            last_seq = -1
            try:
                for event in session.events():
                    last_seq = event["seq"]
                    yield f"data: {canonical_json(event)}\n\n"
                if replay:
                    return
                while True:
                    try:
                        event = sub.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    if event["seq"] <= last_seq:
                        continue
                    last_seq = event["seq"]
                    yield f"data: {canonical_json(event)}\n\n"
            finally:
                session.unsubscribe(sub)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/artifacts/{ref}")
    def artifact(ref: str):
        data = engine.store.get(ref)
        return Response(
            content=data,
            media_type=engine.store.media_type(ref),
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    dist = Path(frontend_dist) if frontend_dist else None
    if dist is not None and dist.is_dir():
        app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app
