import base64
import json
import math
import time

import httpx
import numpy as np
import pytest

from mplan.backends import (ConstantTokenScorer, MockEmbedder,
                            MockImageSynthesizer, MockVisionInterpreter,
                            OverlapTokenScorer, ProvenanceLog,
                            ScriptedTextGenerator, TokenBucket, mock_suite,
                            read_mock_metadata)
from mplan.backends.cassette import Cassette, RecordingTransport, ReplayTransport
from mplan.backends.config import BackendConfig, RoleConfig, load_backend_config
from mplan.backends.http import (HttpImageSynthesizer, HttpTextGenerator,
                                 HttpTokenScorer, HttpVisionInterpreter)
from mplan.errors import (AuthError, PayloadTooLarge, RateLimited, Timeout,
                          UnsupportedByBackend, ValidationError)
from mplan.plan_model import sha256_hex
from mplan.ppddl import parse_ppddl
from mplan.prompting import render_prompt
from mplan.synth import make_png


# --- mocks ---

def test_scripted_transcript_returns_entries_in_order():
    gen = ScriptedTextGenerator(["one", "two", "three"])
    assert gen.complete_text("a") == "one"
    assert gen.complete_text("b") == "two"
    assert gen.complete_text("c") == "three"


def test_mock_image_determinism_with_base(png_16x16):
    synth = MockImageSynthesizer(seed=3)
    a = synth.synthesize_image("fill jar", base=png_16x16)
    b = synth.synthesize_image("fill jar", base=png_16x16)
    assert a == b
    no_base = synth.synthesize_image("fill jar")
    assert no_base != a
    assert no_base == synth.synthesize_image("fill jar")


def test_mock_image_embeds_readable_metadata():
    synth = MockImageSynthesizer(seed=3)
    data = synth.synthesize_image(
        "A clear, detailed photograph showing rinse the onion bulb, "
        "high quality, realistic with natural lighting")
    meta = read_mock_metadata(data)
    assert "mock:prompt" in meta
    record = parse_ppddl(meta["mock:ppddl"])
    assert record.goal


def test_mock_vision_returns_embedded_record():
    synth = MockImageSynthesizer(seed=3)
    vision = MockVisionInterpreter(seed=3)
    image = synth.synthesize_image("arrange the seedlings in the tray")
    prompt = render_prompt("visual_extraction", {"goal": "plant seedlings"})
    text = vision.interpret_image(image, prompt)
    assert text == read_mock_metadata(image)["mock:ppddl"]


def test_mock_vision_payload_guard(png_16x16):
    vision = MockVisionInterpreter(seed=0, max_payload_bytes=10)
    with pytest.raises(PayloadTooLarge):
        vision.interpret_image(png_16x16, "describe")


def test_mock_embedder_unit_norm_and_equality():
    emb = MockEmbedder(seed=5)
    v1 = emb.embed("hello world")
    v2 = emb.embed("hello world")
    assert np.allclose(v1, v2)
    assert abs(np.linalg.norm(v1) - 1.0) < 1e-9
    assert emb.embed(b"hello world") == pytest.approx(list(v1))


def test_mock_embedder_unrelated_strings_low_cosine():
    # 100 random pairs under the hash projection stay well below cosine 0.5.
    emb = MockEmbedder(seed=5)
    rng = np.random.default_rng(0)
    for i in range(100):
        a = f"text-{rng.integers(1 << 30)}-{i}"
        b = f"other-{rng.integers(1 << 30)}-{i}"
        assert float(np.dot(emb.embed(a), emb.embed(b))) < 0.5


def test_constant_scorer_value():
    scorer = ConstantTokenScorer()
    scores = scorer.score_tokens("anything", "three little words")
    assert scores == pytest.approx([math.log(0.5)] * 3)


def test_overlap_scorer_rule():
    scorer = OverlapTokenScorer()
    scores = scorer.score_tokens("the jar sits here", "jar of pickles")
    assert scores == pytest.approx([math.log(0.9), math.log(0.1), math.log(0.1)])


def test_scorer_empty_continuation_rejected():
    with pytest.raises(ValidationError):
        ConstantTokenScorer().score_tokens("ctx", "  !! ")


def test_mock_suite_calls_append_provenance():
    suite = mock_suite(seed=1)
    suite.text_generator.complete_text("GOAL: x\nWhat is the next specific, "
                                       "actionable step\nSTEP [1]:")
    suite.embedder.embed("x")
    entries = suite.log.entries()
    assert len(entries) == 2
    assert entries[0].role == "text_generator"
    assert entries[0].request_sha256 and entries[0].response_sha256
    assert entries[0].latency_ms >= 0


def test_with_log_rebinds_all_roles():
    suite = mock_suite(seed=1)
    scoped_log = ProvenanceLog()
    scoped = suite.with_log(scoped_log)
    scoped.embedder.embed("x")
    assert len(scoped_log) == 1
    assert len(suite.log) == 0


# --- HTTP transport behavior ---

def _chat_response(content="hello"):
    return {"choices": [{"message": {"content": content}}],
            "usage": {"prompt_tokens": 5, "completion_tokens": 7}}


def _text_client(handler, **cfg_kwargs):
    cfg = RoleConfig(endpoint="https://api.example/chat", model="m",
                     backoff_s=0.001, **cfg_kwargs)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HttpTextGenerator(cfg, client=client, sleep=lambda s: None)


def test_http_text_success_and_token_accounting():
    gen = _text_client(lambda request: httpx.Response(200, json=_chat_response()))
    assert gen.complete_text("hi") == "hello"
    assert gen.transport.stats["prompt_tokens"] == 5
    assert gen.transport.stats["completion_tokens"] == 7


def test_http_retries_on_429_then_succeeds():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        if calls["n"] <= 2:
            return httpx.Response(429, json={"error": "slow down"})
        return httpx.Response(200, json=_chat_response("ok"))

    gen = _text_client(handler, max_retries=3)
    assert gen.complete_text("hi") == "ok"
    assert gen.transport.stats["retries"] == 2


def test_http_rate_limited_after_budget():
    gen = _text_client(lambda request: httpx.Response(429, json={}), max_retries=2)
    with pytest.raises(RateLimited):
        gen.complete_text("hi")
    assert gen.transport.stats["retries"] == 2


def test_http_timeout_after_retries():
    def handler(request):
        raise httpx.ConnectTimeout("endpoint down")

    gen = _text_client(handler, max_retries=1)
    with pytest.raises(Timeout):
        gen.complete_text("hi")


def test_http_auth_error_not_retried():
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(401, json={})

    gen = _text_client(handler, max_retries=3)
    with pytest.raises(AuthError):
        gen.complete_text("hi")
    assert calls["n"] == 1


def test_http_auth_env_missing(monkeypatch):
    monkeypatch.delenv("MPLAN_TEXTGEN_TOKEN", raising=False)
    gen = _text_client(lambda request: httpx.Response(200, json=_chat_response()),
                       auth_env="MPLAN_TEXTGEN_TOKEN")
    with pytest.raises(AuthError):
        gen.complete_text("hi")


def test_http_auth_header_sent(monkeypatch):
    monkeypatch.setenv("MPLAN_TEXTGEN_TOKEN", "sekrit")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("Authorization")
        return httpx.Response(200, json=_chat_response())

    gen = _text_client(handler, auth_env="MPLAN_TEXTGEN_TOKEN")
    gen.complete_text("hi")
    assert seen["auth"] == "Bearer sekrit"


def test_http_image_round_trip(png_16x16):
    def handler(request):
        payload = json.loads(request.read())
        assert "image_b64" in payload  # base image travels on the wire
        return httpx.Response(200, json={
            "image_b64": base64.b64encode(make_png(9)).decode("ascii")})

    cfg = RoleConfig(endpoint="https://api.example/img", model="m", backoff_s=0.001)
    synth = HttpImageSynthesizer(
        cfg, client=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=lambda s: None)
    out = synth.synthesize_image("fill the jar", base=png_16x16)
    assert out == make_png(9)
    entry = synth.log.entries()[-1]
    assert json.loads(entry.request)["base_digest"] == sha256_hex(png_16x16)


def test_http_vision_payload_guard(png_16x16):
    cfg = RoleConfig(endpoint="https://api.example/vision", model="m",
                     max_payload_bytes=10)
    calls = {"n": 0}

    def handler(request):
        calls["n"] += 1
        return httpx.Response(200, json=_chat_response())

    vision = HttpVisionInterpreter(
        cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
    with pytest.raises(PayloadTooLarge):
        vision.interpret_image(png_16x16, "describe")
    assert calls["n"] == 0  # guard fires before any network call


def test_http_scorer_unsupported():
    cfg = RoleConfig(endpoint="https://api.example/score", model="m")
    scorer = HttpTokenScorer(cfg, client=httpx.Client(
        transport=httpx.MockTransport(
            lambda request: httpx.Response(200, json={"error": "unsupported"}))))
    with pytest.raises(UnsupportedByBackend):
        scorer.score_tokens("ctx", "words here")


def test_token_bucket_throttles():
    bucket = TokenBucket(per_minute=120)  # one token per 0.5s
    bucket._tokens = 1.0
    t0 = time.monotonic()
    bucket.acquire()
    bucket.acquire()
    assert time.monotonic() - t0 >= 0.4


def test_token_bucket_disabled():
    bucket = TokenBucket(per_minute=None)
    t0 = time.monotonic()
    for _ in range(1000):
        bucket.acquire()
    assert time.monotonic() - t0 < 0.5


# --- cassette record/replay ---

def test_cassette_replay_vision_smoke(fixtures_dir, png_16x16):
    cassette = Cassette.load(fixtures_dir / "cassette_vision.json")
    cfg = RoleConfig(endpoint="https://vision.example/api", model="vision-smoke")
    vision = HttpVisionInterpreter(
        cfg, client=httpx.Client(transport=ReplayTransport(cassette)))
    prompt = render_prompt("visual_extraction",
                           {"goal": "prepare a vegetable stir fry"})
    text = vision.interpret_image(png_16x16, prompt)
    record = parse_ppddl(text)
    assert record.objects  # non-empty objects list from the recorded response


def test_cassette_record_then_replay(tmp_path, png_16x16):
    canned = _chat_response("OBJECTS: knife\nTOOLS: none\nACTIONS: chop\nGOAL: cook")
    cassette = Cassette()
    recording = RecordingTransport(
        httpx.MockTransport(lambda request: httpx.Response(200, json=canned)),
        cassette)
    cfg = RoleConfig(endpoint="https://vision.example/api", model="m")
    vision = HttpVisionInterpreter(cfg, client=httpx.Client(transport=recording))
    first = vision.interpret_image(png_16x16, "extract")
    path = tmp_path / "cassette.json"
    cassette.save(path)

    replayed = HttpVisionInterpreter(
        cfg, client=httpx.Client(transport=ReplayTransport(Cassette.load(path))))
    assert replayed.interpret_image(png_16x16, "extract") == first


# --- config ---

def test_load_backend_config(tmp_path):
    path = tmp_path / "backends.toml"
    path.write_text("""
[suite]
kind = "http"
seed = 3
embed_dim = 32

[text_generator]
endpoint = "https://api.example/chat"
model = "chat-1"
auth_env = "MPLAN_TEXTGEN_TOKEN"
timeout_s = 10.0
max_retries = 2
rpm = 30

[image_synthesizer]
endpoint = "https://api.example/img"
model = "img-1"

[vision_interpreter]
endpoint = "https://api.example/vision"
model = "vis-1"

[embedder]
endpoint = "https://api.example/embed"
model = "emb-1"

[token_scorer]
endpoint = "https://api.example/score"
model = "score-1"
""")
    cfg = load_backend_config(path)
    assert cfg.kind == "http"
    assert cfg.embed_dim == 32
    assert cfg.roles["text_generator"].rpm == 30
    assert cfg.roles["text_generator"].auth_env == "MPLAN_TEXTGEN_TOKEN"
    assert len(cfg.fingerprint()) == 64


def test_config_validation():
    cfg = BackendConfig(kind="http")
    with pytest.raises(ValidationError):
        cfg.validate()
    role = RoleConfig(timeout_s=0)
    with pytest.raises(ValidationError):
        role.validate()


def test_mock_suite_fingerprint_stable():
    assert mock_suite(seed=4).fingerprint == mock_suite(seed=4).fingerprint
    assert mock_suite(seed=4).fingerprint != mock_suite(seed=5).fingerprint
