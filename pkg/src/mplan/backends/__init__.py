"""Model-service backends: role interfaces, mock suite, and HTTP clients."""

from .base import (BackendSuite, Embedder, ImageSynthesizer, ProvenanceLog,
                   RoleClient, TextGenerator, TokenBucket, TokenScorer,
                   VisionInterpreter)
from .config import BackendConfig, RoleConfig, build_suite, load_backend_config
from .mock import (ConstantTokenScorer, MockEmbedder, MockImageSynthesizer,
                   MockTextGenerator, MockVisionInterpreter, OverlapTokenScorer,
                   ScriptedTextGenerator, mock_suite, read_mock_metadata)

__all__ = [
    "BackendSuite", "Embedder", "ImageSynthesizer", "ProvenanceLog",
    "RoleClient", "TextGenerator", "TokenBucket", "TokenScorer",
    "VisionInterpreter", "BackendConfig", "RoleConfig", "build_suite",
    "load_backend_config", "ConstantTokenScorer", "MockEmbedder",
    "MockImageSynthesizer", "MockTextGenerator", "MockVisionInterpreter",
    "OverlapTokenScorer", "ScriptedTextGenerator", "mock_suite",
    "read_mock_metadata",
]
