"""Backend configuration: one TOML table per role, plus suite assembly."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ValidationError
from ..plan_model import sha256_hex

ROLE_NAMES = ("text_generator", "image_synthesizer", "vision_interpreter",
              "embedder", "token_scorer")


@dataclass
class RoleConfig:
    """Connection and sampling settings for one model-service role."""

    endpoint: str = ""
    model: str = ""
    auth_env: str = ""
    timeout_s: float = 30.0
    max_retries: int = 3
    rpm: float | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    backoff_s: float = 0.5
    max_payload_bytes: int = 8_000_000

    def validate(self) -> None:
        if self.timeout_s <= 0:
            raise ValidationError("timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")


@dataclass
class BackendConfig:
    """Full suite configuration; kind selects mock or HTTP implementations."""

    kind: str = "mock"
    seed: int = 0
    embed_dim: int = 64
    mock_image_size: int = 24
    roles: dict[str, RoleConfig] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ValidationError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http":
            for name in ROLE_NAMES:
                if name not in self.roles:
                    raise ValidationError(f"http config missing [{name}] table")
                self.roles[name].validate()

    def fingerprint(self) -> str:
        payload = {
            "kind": self.kind,
            "seed": self.seed,
            "embed_dim": self.embed_dim,
            "mock_image_size": self.mock_image_size,
            "roles": {name: asdict(cfg) for name, cfg in sorted(self.roles.items())},
        }
        return sha256_hex(json.dumps(payload, sort_keys=True).encode("utf-8"))


def load_backend_config(path: Path | str) -> BackendConfig:
    """Parse a TOML config with a [suite] table and one table per role."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    suite = raw.get("suite", {})
    cfg = BackendConfig(
        kind=suite.get("kind", "mock"),
        seed=int(suite.get("seed", 0)),
        embed_dim=int(suite.get("embed_dim", 64)),
        mock_image_size=int(suite.get("mock_image_size", 24)),
    )
    for name in ROLE_NAMES:
        if name in raw:
            table = raw[name]
            role = RoleConfig(
                endpoint=table.get("endpoint", ""),
                model=table.get("model", ""),
                auth_env=table.get("auth_env", ""),
                timeout_s=float(table.get("timeout_s", 30.0)),
                max_retries=int(table.get("max_retries", 3)),
                rpm=float(table["rpm"]) if "rpm" in table else None,
                temperature=float(table.get("temperature", 0.0)),
                max_output_tokens=int(table.get("max_output_tokens", 1024)),
                backoff_s=float(table.get("backoff_s", 0.5)),
                max_payload_bytes=int(table.get("max_payload_bytes", 8_000_000)),
            )
            cfg.roles[name] = role
    cfg.validate()
    return cfg


def build_suite(cfg: BackendConfig):
    """Instantiate the configured suite (mock or HTTP)."""
    cfg.validate()
    if cfg.kind == "mock":
        from .mock import mock_suite
        return mock_suite(seed=cfg.seed, dim=cfg.embed_dim,
                          image_size=cfg.mock_image_size)
    from .base import BackendSuite
    from .http import (HttpEmbedder, HttpImageSynthesizer, HttpTextGenerator,
                       HttpTokenScorer, HttpVisionInterpreter)
    return BackendSuite(
        text_generator=HttpTextGenerator(cfg.roles["text_generator"]),
        image_synthesizer=HttpImageSynthesizer(cfg.roles["image_synthesizer"]),
        vision_interpreter=HttpVisionInterpreter(cfg.roles["vision_interpreter"]),
        embedder=HttpEmbedder(cfg.roles["embedder"], dim=cfg.embed_dim),
        token_scorer=HttpTokenScorer(cfg.roles["token_scorer"]),
        fingerprint=cfg.fingerprint(),
    )
