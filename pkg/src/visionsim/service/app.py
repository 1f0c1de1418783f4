"""FastAPI application exposing a session over REST + WebSocket.

Each WebSocket connection owns one session engine; all engine access runs
under a per-connection lock, so the receive loop and the periodic broadcast
task never interleave inside the state machine. REST endpoints serve the
static setup information the client needs before connecting.
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..engine import PACKAGED_DATA_DIR, EngineConfig, SessionEngine, validate_setup
from ..errors import StateError
from ..experiment import DEFAULT_DEMOGRAPHIC_FIELDS, Protocol, load_protocol
from .models import (
    DemographicFieldModel,
    HealthResponse,
    ProtocolResponse,
    SceneEntryModel,
    ValidateRequest,
    ValidateResponse,
)

TICK_INTERVAL = 0.05  # 20 Hz broadcast while a task scene runs


def create_app(protocol: Optional[Protocol] = None, *,
               protocol_path=None,
               data_root=None,
               sessions_root=None,
               seed: int = 0,
               config: Optional[EngineConfig] = None,
               static_dir=None) -> FastAPI:
    if protocol is None:
        path = protocol_path or PACKAGED_DATA_DIR / "demo_protocol.json"
        protocol = load_protocol(path)
    data_root = Path(data_root) if data_root else None
    sessions_root = Path(sessions_root) if sessions_root else Path("sessions")

    app = FastAPI(title="visionsim session service", version=__version__)
    app.state.protocol = protocol
    app.state.data_root = data_root
    app.state.sessions_root = sessions_root
    app.state.seed = seed
    app.state.engine_config = config

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.get("/api/protocol", response_model=ProtocolResponse)
    def get_protocol() -> ProtocolResponse:
        p = app.state.protocol
        return ProtocolResponse(
            name=p.name, order_mode=p.order_mode, seed=p.seed,
            scenes=[SceneEntryModel(scene=e.scene_id, parameter=e.parameter)
                    for e in p.scenes])

    @app.get("/api/demographics-fields",
             response_model=list[DemographicFieldModel])
    def demographics_fields() -> list:
        return [DemographicFieldModel(**f.to_dict())
                for f in DEFAULT_DEMOGRAPHIC_FIELDS]

    @app.post("/api/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        if request.protocol_path:
            problems = validate_setup(request.protocol_path,
                                      data_root=app.state.data_root,
                                      devices_path=request.devices_path)
        else:
            problems = validate_setup(protocol=app.state.protocol,
                                      data_root=app.state.data_root,
                                      devices_path=request.devices_path)
        return ValidateResponse(valid=not problems, problems=problems)

    @app.websocket("/ws")
    async def session_socket(websocket: WebSocket) -> None:
        await websocket.accept()
        engine = SessionEngine(app.state.protocol, app.state.sessions_root,
                               data_root=app.state.data_root,
                               seed=app.state.seed,
                               config=app.state.engine_config)
        lock = asyncio.Lock()

        async def broadcast_loop() -> None:
            while True:
                await asyncio.sleep(TICK_INTERVAL)
                async with lock:
                    messages = engine.tick(time.monotonic())
                for message in messages:
                    await websocket.send_json(message)

        ticker = asyncio.create_task(broadcast_loop())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    raw = json.loads(text)
                except json.JSONDecodeError:
                    raw = None  # engine turns this into an error reply
                async with lock:
                    replies = engine.handle_message(raw)
                for reply in replies:
                    await websocket.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            ticker.cancel()
            # Flush whatever scene was open so artifacts stay valid.
            if engine.session is not None and not engine.controller.finished:
                try:
                    engine.controller.step("finish")
                except StateError:
                    pass

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="frontend")

    return app
