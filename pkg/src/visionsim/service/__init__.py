"""HTTP/WebSocket wrapper around the session engine."""

from .app import create_app

__all__ = ["create_app"]
