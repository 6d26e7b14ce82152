"""FastAPI service wrapping the engine; see app.py for the endpoints."""

from .app import app

__all__ = ["app"]
