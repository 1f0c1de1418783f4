"""Request/response models for the REST side of the service.

WebSocket envelopes are validated by the engine itself (it must produce
protocol-level error replies, not HTTP 422s), so only the REST surface is
modeled here.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class SceneEntryModel(BaseModel):
    scene: str
    parameter: str = ""


class ProtocolResponse(BaseModel):
    name: str
    order_mode: str
    seed: int
    scenes: List[SceneEntryModel]


class DemographicFieldModel(BaseModel):
    id: str
    label: str
    type: str
    options: List[str] = Field(default_factory=list)
    required: bool = True


class ValidateRequest(BaseModel):
    protocol_path: Optional[str] = None
    devices_path: Optional[str] = None


class ValidateResponse(BaseModel):
    valid: bool
    problems: List[str]


class Envelope(BaseModel):
    """Message envelope used in both directions on the WebSocket."""

    type: str
    seq: int
    timestamp: float
    payload: Dict = Field(default_factory=dict)
