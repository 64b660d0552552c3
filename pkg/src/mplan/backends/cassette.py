"""Record/replay of HTTP responses for offline fixtures.

A cassette file is a JSON map from a request key (method + URL + body hash)
to the recorded JSON response. ReplayTransport serves matching requests from
the cassette; RecordingTransport passes requests through and records them.
"""

from __future__ import annotations

import json
from pathlib import Path

import httpx

from ..plan_model import sha256_hex


def request_key(method: str, url: str, body: bytes) -> str:
    return sha256_hex(f"{method.upper()} {url}\n".encode("utf-8") + body)


class Cassette:
    def __init__(self, entries: dict[str, dict] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def load(cls, path: Path | str) -> "Cassette":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(
            json.dumps(self.entries, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")

    def put(self, key: str, response: dict) -> None:
        self.entries[key] = response

    def get(self, key: str) -> dict | None:
        return self.entries.get(key)


class ReplayTransport(httpx.BaseTransport):
    """Serves recorded responses; unknown requests get a 404."""

    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        key = request_key(request.method, str(request.url), request.read())
        recorded = self.cassette.get(key)
        if recorded is None:
            return httpx.Response(404, json={"error": "not recorded"})
        return httpx.Response(200, json=recorded)


class RecordingTransport(httpx.BaseTransport):
    """Wraps a live transport and records every JSON response it sees."""

    def __init__(self, inner: httpx.BaseTransport, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        body = request.read()
        response = self.inner.handle_request(request)
        if response.status_code == 200:
            try:
                payload = json.loads(response.read())
            except ValueError:
                return response
            self.cassette.put(request_key(request.method, str(request.url), body),
                              payload)
        return response
