"""HTTP implementations of the model-service roles.

All roles share one transport layer: JSON POST with bearer auth from an
environment variable, exponential backoff on 429/5xx and transport errors,
a per-role token-bucket throttle, and latency/token accounting. The wire
shapes are thin adapters over the common chat-completion, image-generation,
and embedding request styles, so swapping providers is configuration.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from time import perf_counter as timer

import httpx
import numpy as np

from ..errors import (AuthError, MalformedResponse, PayloadTooLarge, RateLimited,
                      Timeout, UnsupportedByBackend, ValidationError)
from ..plan_model import decode_png, sha256_hex
from .base import ProvenanceLog, RoleClient, TokenBucket
from .config import RoleConfig


class HttpTransport:
    """Retrying JSON POST channel for one role endpoint."""

    def __init__(self, cfg: RoleConfig, client: httpx.Client | None = None,
                 sleep=time.sleep):
        cfg.validate()
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout_s)
        self._bucket = TokenBucket(cfg.rpm)
        self._sleep = sleep
        self._lock = threading.Lock()
        self.stats = {"calls": 0, "retries": 0, "prompt_tokens": 0,
                      "completion_tokens": 0}

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.cfg.auth_env:
            token = os.environ.get(self.cfg.auth_env, "")
            if not token:
                raise AuthError(f"auth env var {self.cfg.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _count(self, key: str, n: int = 1) -> None:
        with self._lock:
            self.stats[key] += n

    def post_json(self, payload: dict) -> dict:
        headers = self._headers()
        body = json.dumps(payload)
        last_exc: Exception | None = None
        last_status: int | None = None
        self._count("calls")
        for attempt in range(self.cfg.max_retries + 1):
            if attempt > 0:
                self._count("retries")
                self._sleep(self.cfg.backoff_s * (2 ** (attempt - 1)))
            self._bucket.acquire()
            try:
                resp = self._client.post(self.cfg.endpoint, content=body,
                                         headers=headers)
            except httpx.TimeoutException as exc:
                last_exc, last_status = exc, None
                continue
            except httpx.TransportError as exc:
                last_exc, last_status = exc, None
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_exc, last_status = None, resp.status_code
                continue
            if resp.status_code != 200:
                raise MalformedResponse(f"unexpected status {resp.status_code}")
            try:
                data = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"non-JSON response: {exc}") from exc
            usage = data.get("usage") if isinstance(data, dict) else None
            if isinstance(usage, dict):
                self._count("prompt_tokens", int(usage.get("prompt_tokens", 0)))
                self._count("completion_tokens", int(usage.get("completion_tokens", 0)))
            return data
        if last_status == 429:
            raise RateLimited(f"still rate-limited after {self.cfg.max_retries} retries")
        if last_status is not None:
            raise MalformedResponse(f"server error {last_status} after retries")
        raise Timeout(f"no response after {self.cfg.max_retries} retries: {last_exc}")


def _extract_text(data: dict) -> str:
    # chat-completion style first, then bare-text styles.
    try:
        choices = data.get("choices")
        if choices:
            message = choices[0].get("message")
            if message is not None:
                return str(message["content"])
            return str(choices[0]["text"])
        if "text" in data:
            return str(data["text"])
        if "content" in data:
            return str(data["content"])
    except (KeyError, IndexError, TypeError, AttributeError):
        pass
    raise MalformedResponse(f"cannot locate text in response keys {sorted(data)}")


class HttpTextGenerator(RoleClient):
    role = "text_generator"

    def __init__(self, cfg: RoleConfig, client: httpx.Client | None = None,
                 log: ProvenanceLog | None = None, sleep=time.sleep):
        super().__init__(log)
        self.cfg = cfg
        self.transport = HttpTransport(cfg, client, sleep)

    def _payload(self, messages: list[dict]) -> dict:
        return {
            "model": self.cfg.model,
            "messages": messages,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
        }

    def complete_text(self, prompt: str, stage: str = "text") -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        t0 = timer()
        data = self.transport.post_json(
            self._payload([{"role": "user", "content": prompt}]))
        text = _extract_text(data)
        self._record(stage, prompt, text, t0)
        return text


class HttpImageSynthesizer(RoleClient):
    role = "image_synthesizer"

    def __init__(self, cfg: RoleConfig, client: httpx.Client | None = None,
                 log: ProvenanceLog | None = None, sleep=time.sleep):
        super().__init__(log)
        self.cfg = cfg
        self.transport = HttpTransport(cfg, client, sleep)

    def synthesize_image(self, prompt: str, base: bytes | None = None,
                         stage: str = "synthesize") -> bytes:
        t0 = timer()
        base_digest = None
        payload = {"model": self.cfg.model, "prompt": prompt}
        if base is not None:
            decode_png(base)
            base_digest = sha256_hex(base)
            payload["image_b64"] = base64.b64encode(base).decode("ascii")
        data = self.transport.post_json(payload)
        b64 = None
        if "image_b64" in data:
            b64 = data["image_b64"]
        elif data.get("data"):
            b64 = data["data"][0].get("b64_json")
        if not b64:
            raise MalformedResponse("image response carries no image payload")
        raw = base64.b64decode(b64)
        decode_png(raw)
        request = json.dumps({"prompt": prompt, "base_digest": base_digest},
                             sort_keys=True)
        self._record(stage, request, f"png:{sha256_hex(raw)}", t0)
        return raw


class HttpVisionInterpreter(RoleClient):
    role = "vision_interpreter"

    def __init__(self, cfg: RoleConfig, client: httpx.Client | None = None,
                 log: ProvenanceLog | None = None, sleep=time.sleep):
        super().__init__(log)
        self.cfg = cfg
        self.transport = HttpTransport(cfg, client, sleep)

    def interpret_image(self, image: bytes, prompt: str,
                        extra_images: tuple[bytes, ...] = (),
                        stage: str = "vision") -> str:
        t0 = timer()
        total = len(image) + sum(len(i) for i in extra_images)
        if total > self.cfg.max_payload_bytes:
            raise PayloadTooLarge(
                f"payload {total} bytes exceeds limit {self.cfg.max_payload_bytes}")
        decode_png(image)
        content: list[dict] = [{"type": "text", "text": prompt}]
        for img in (image, *extra_images):
            content.append({"type": "image_b64",
                            "image_b64": base64.b64encode(img).decode("ascii")})
        data = self.transport.post_json({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
        })
        text = _extract_text(data)
        request = json.dumps({"prompt": prompt, "image": sha256_hex(image),
                              "extra_images": [sha256_hex(i) for i in extra_images]},
                             sort_keys=True)
        self._record(stage, request, text, t0)
        return text


class HttpEmbedder(RoleClient):
    role = "embedder"

    def __init__(self, cfg: RoleConfig, dim: int, client: httpx.Client | None = None,
                 log: ProvenanceLog | None = None, sleep=time.sleep):
        super().__init__(log)
        self.cfg = cfg
        self.dim = dim
        self.transport = HttpTransport(cfg, client, sleep)

    def embed(self, item: str | bytes) -> np.ndarray:
        if not item:
            raise ValidationError("cannot embed empty input")
        t0 = timer()
        payload: dict = {"model": self.cfg.model}
        if isinstance(item, bytes):
            payload["input_b64"] = base64.b64encode(item).decode("ascii")
            request = f"bytes:{sha256_hex(item)}"
        else:
            payload["input"] = item
            request = item
        data = self.transport.post_json(payload)
        if "embedding" in data:
            raw = data["embedding"]
        elif data.get("data"):
            raw = data["data"][0]["embedding"]
        else:
            raise MalformedResponse("embedding response carries no vector")
        vec = np.asarray(raw, dtype=float)
        if vec.shape != (self.dim,):
            raise MalformedResponse(
                f"expected dimension {self.dim}, got {vec.shape}")
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise MalformedResponse("embedding has zero norm")
        vec = vec / norm
        self._record("embed", request, f"vector(dim={self.dim})", t0)
        return vec


class HttpTokenScorer(RoleClient):
    role = "token_scorer"

    def __init__(self, cfg: RoleConfig, client: httpx.Client | None = None,
                 log: ProvenanceLog | None = None, sleep=time.sleep):
        super().__init__(log)
        self.cfg = cfg
        self.transport = HttpTransport(cfg, client, sleep)

    def score_tokens(self, context: str, continuation: str) -> list[float]:
        if not continuation.strip():
            raise ValidationError("continuation must be non-empty")
        t0 = timer()
        data = self.transport.post_json({
            "model": self.cfg.model,
            "context": context,
            "continuation": continuation,
        })
        if data.get("error") == "unsupported" or "logprobs" not in data:
            raise UnsupportedByBackend("endpoint does not return log-probabilities")
        scores = [float(x) for x in data["logprobs"]]
        if not scores or not all(np.isfinite(scores)):
            raise MalformedResponse("log-probabilities missing or non-finite")
        self._record("score",
                     json.dumps({"context": context, "continuation": continuation}),
                     json.dumps(scores), t0)
        return scores
