"""HTTP client helpers: remote service or in-process ASGI dispatch."""

from __future__ import annotations

import asyncio

import httpx


class InProcessClient:
    """Synchronous facade over the ASGI app, no network or server needed."""

    def __init__(self, app):
        self._app = app

    def post(self, url: str, json=None) -> httpx.Response:
        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://engine.local") as client:
                return await client.post(url, json=json)

        return asyncio.run(go())

    def get(self, url: str) -> httpx.Response:
        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://engine.local") as client:
                return await client.get(url)

        return asyncio.run(go())

    def close(self):
        pass


def make_client(server: str | None = None):
    """A client for the given server URL, or an in-process one when None."""
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from .service.app import app

    return InProcessClient(app)
