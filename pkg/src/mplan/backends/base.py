"""Role interfaces, provenance logging, and shared throttling for model services.

Five roles back the pipeline: text generation, image synthesis, vision
interpretation, embedding, and token scoring. Every call appends one
immutable transcript entry to the client's provenance log; the engine swaps
in a per-task log via `with_log` to slice transcripts per step.
"""

from __future__ import annotations

import copy
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from ..plan_model import ProvenanceEntry, sha256_hex


class ProvenanceLog:
    """Append-only, thread-safe transcript of backend calls."""

    def __init__(self):
        self._entries: list[ProvenanceEntry] = []
        self._lock = threading.Lock()

    def append(self, entry: ProvenanceEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    def entries(self) -> tuple[ProvenanceEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def mark(self) -> int:
        with self._lock:
            return len(self._entries)

    def since(self, mark: int) -> tuple[ProvenanceEntry, ...]:
        with self._lock:
            return tuple(self._entries[mark:])

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class TokenBucket:
    """Per-role request throttle; None rate disables it."""

    def __init__(self, per_minute: float | None):
        self.per_minute = per_minute
        self._tokens = per_minute if per_minute else 0.0
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if not self.per_minute:
            return
        rate = self.per_minute / 60.0
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.per_minute,
                                   self._tokens + (now - self._last) * rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / rate
            time.sleep(wait)


class RoleClient:
    """Base for role implementations: provenance recording and log rebinding."""

    role = "role"

    def __init__(self, log: ProvenanceLog | None = None):
        self.log = log or ProvenanceLog()

    def with_log(self, log: ProvenanceLog):
        clone = copy.copy(self)
        clone.log = log
        return clone

    def _record(self, stage: str, request: str, response: str, t0: float) -> ProvenanceEntry:
        entry = ProvenanceEntry(
            role=self.role,
            stage=stage,
            request=request,
            response=response,
            request_sha256=sha256_hex(request.encode("utf-8")),
            response_sha256=sha256_hex(response.encode("utf-8")),
            latency_ms=(time.perf_counter() - t0) * 1000.0,
        )
        self.log.append(entry)
        return entry


@runtime_checkable
class TextGenerator(Protocol):
    def complete_text(self, prompt: str, stage: str = "text") -> str: ...


@runtime_checkable
class ImageSynthesizer(Protocol):
    def synthesize_image(self, prompt: str, base: bytes | None = None,
                         stage: str = "synthesize") -> bytes: ...


@runtime_checkable
class VisionInterpreter(Protocol):
    def interpret_image(self, image: bytes, prompt: str,
                        extra_images: tuple[bytes, ...] = (),
                        stage: str = "vision") -> str: ...


@runtime_checkable
class Embedder(Protocol):
    dim: int

    def embed(self, item: str | bytes) -> np.ndarray: ...


@runtime_checkable
class TokenScorer(Protocol):
    def score_tokens(self, context: str, continuation: str) -> list[float]: ...


@dataclass
class BackendSuite:
    """The five model-service roles plus their shared provenance log."""

    text_generator: TextGenerator
    image_synthesizer: ImageSynthesizer
    vision_interpreter: VisionInterpreter
    embedder: Embedder
    token_scorer: TokenScorer
    fingerprint: str
    log: ProvenanceLog = field(default_factory=ProvenanceLog)

    def __post_init__(self):
        for client in self._clients():
            client.log = self.log

    def _clients(self):
        return (self.text_generator, self.image_synthesizer,
                self.vision_interpreter, self.embedder, self.token_scorer)

    def with_log(self, log: ProvenanceLog) -> "BackendSuite":
        """A view of this suite whose calls record into `log` instead."""
        return BackendSuite(
            text_generator=self.text_generator.with_log(log),
            image_synthesizer=self.image_synthesizer.with_log(log),
            vision_interpreter=self.vision_interpreter.with_log(log),
            embedder=self.embedder.with_log(log),
            token_scorer=self.token_scorer.with_log(log),
            fingerprint=self.fingerprint,
            log=log,
        )
