"""Deterministic mock implementations of the five model-service roles.

Every mock is a pure function of (inputs, seed): repeated calls return
byte-identical results, which is what makes end-to-end runs reproducible
and lets metric identity tests run offline. The image mock embeds its
prompt and a derived structured-info record as PNG text chunks so the
vision mock can "see" what the image depicts.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import re
from time import perf_counter as timer

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from ..errors import DecodeError, MalformedResponse, PayloadTooLarge, ValidationError
from ..plan_model import decode_png, sha256_hex
from ..ppddl import PPDDLRecord, serialize_ppddl
from ..textutil import tokenize
from .base import BackendSuite, ProvenanceLog, RoleClient

NOUNS = ("jar", "bowl", "towel", "board", "brush", "bucket", "ladder", "pan",
         "rope", "seed", "shelf", "sponge", "crate", "funnel", "lid", "tray")
VERBS = ("rinse", "arrange", "fasten", "measure", "stir", "trim", "wipe",
         "fill", "press", "attach", "fold", "scrub", "align", "secure")
PLACES = ("counter", "table", "windowsill", "workbench", "sink", "floor",
          "shelf", "garden bed")
ADJECTIVES = ("clean", "sturdy", "damp", "level", "bright", "smooth", "dry")

_STOPWORDS = frozenset(
    "a an the and or of to in on with for is are be this that it its step "
    "clear detailed photograph showing high quality realistic natural "
    "lighting provided image shows please".split())

_K_RE = re.compile(r"STEP \[(\d+)\]")
_GOAL_LINE_RE = re.compile(r"^GOAL:\s*(.+)$", re.MULTILINE)
_ORIGINAL_STEP_RE = re.compile(r"^Original Step(?: \(structured\))?:\s*(.+)$", re.MULTILINE)
_IMAGE_PAYLOAD_RE = re.compile(r"photograph showing (.*?), high quality", re.DOTALL)


def _h(*parts: object, seed: int) -> int:
    payload = "\x1f".join(str(p) for p in parts) + f"\x1f{seed}"
    return int.from_bytes(hashlib.sha256(payload.encode("utf-8")).digest()[:8], "big")


def _pick(options: tuple[str, ...], *parts: object, seed: int) -> str:
    return options[_h(*parts, seed=seed) % len(options)]


def _content_words(text: str) -> list[str]:
    return [w for w in tokenize(text) if len(w) >= 4 and w not in _STOPWORDS]


class ScriptedTextGenerator(RoleClient):
    """Replays a fixed transcript of responses, one per call, in order."""

    role = "text_generator"

    def __init__(self, responses: list[str], log: ProvenanceLog | None = None):
        super().__init__(log)
        self._responses = list(responses)
        self._cursor = 0

    def complete_text(self, prompt: str, stage: str = "text") -> str:
        t0 = timer()
        if self._cursor >= len(self._responses):
            raise MalformedResponse("scripted transcript exhausted")
        response = self._responses[self._cursor]
        self._cursor += 1
        self._record(stage, prompt, response, t0)
        return response


class MockTextGenerator(RoleClient):
    """Rule-based text generation: routes on prompt markers, seeded output."""

    role = "text_generator"

    def __init__(self, seed: int = 0, log: ProvenanceLog | None = None):
        super().__init__(log)
        self.seed = seed

    def complete_text(self, prompt: str, stage: str = "text") -> str:
        if not prompt:
            raise ValidationError("prompt must be non-empty")
        t0 = timer()
        response = self._respond(prompt)
        self._record(stage, prompt, response, t0)
        return response

    # Number of steps after which the mock declares the goal achieved.
    def target_steps(self, goal_text: str) -> int:
        return 3 + _h("target", goal_text, seed=self.seed) % 5

    def _goal(self, prompt: str) -> str:
        m = _GOAL_LINE_RE.search(prompt)
        return m.group(1).strip() if m else "the task"

    def _step_sentence(self, goal: str, k: int) -> str:
        words = _content_words(goal) or ["task"]
        noun = _pick(NOUNS, "noun", goal, k, seed=self.seed)
        verb = _pick(VERBS, "verb", goal, k, seed=self.seed)
        place = _pick(PLACES, "place", goal, k, seed=self.seed)
        focus = words[_h("focus", goal, k, seed=self.seed) % len(words)]
        return f"{verb.capitalize()} the {noun} near the {place} to {focus} {words[0]}."

    def _respond(self, prompt: str) -> str:
        goal = self._goal(prompt)
        if "complete step-by-step plan" in prompt:
            n = self.target_steps(goal)
            lines = []
            for k in range(1, n + 1):
                title = _pick(VERBS, "title", goal, k, seed=self.seed).capitalize()
                lines.append(f"STEP [{k}]: [{title} stage]")
                lines.append(self._step_sentence(goal, k))
            return "\n".join(lines)
        if "What is the next specific, actionable step" in prompt:
            m = _K_RE.search(prompt)
            k = int(m.group(1)) if m else 1
            achieved = "YES" if k >= self.target_steps(goal) else "NO"
            title = _pick(VERBS, "title", goal, k, seed=self.seed).capitalize()
            if "structured visual information" in prompt:
                words = _content_words(goal) or ["task"]
                noun = _pick(NOUNS, "noun", goal, k, seed=self.seed)
                verb = _pick(VERBS, "verb", goal, k, seed=self.seed)
                body = (f"OBJECTS: {noun}, {words[0]}\n"
                        f"TOOLS: none\n"
                        f"ACTIONS: {verb} the {noun}\n"
                        f"GOAL: {goal}")
            else:
                body = self._step_sentence(goal, k)
            return f"STEP [{k}]: [{title} stage]\n{body}\n{achieved}"
        if "Rewrite the step as a clear natural-language instruction" in prompt:
            original = _ORIGINAL_STEP_RE.search(prompt)
            draft = original.group(1).strip() if original else "the step"
            noun = _pick(NOUNS, "nl", prompt, seed=self.seed)
            return f"Carry out {draft.rstrip('.').lower()} using the {noun}."
        if "Visual Information Extracted" in prompt:
            original = _ORIGINAL_STEP_RE.search(prompt)
            draft = original.group(1).strip() if original else "the step"
            objects = re.search(r"^OBJECTS:\s*(.+)$", prompt, re.MULTILINE)
            extras = objects.group(1).strip() if objects else ""
            if extras and extras.lower() != "none":
                return f"{draft.rstrip('.')} using the {extras}."
            return f"{draft.rstrip('.')} carefully."
        if "four criteria" in prompt:
            return "\n".join(
                f"{name}: {3 + _h('judge', name, prompt, seed=self.seed) % 3} - adequate"
                for name in ("Correctness", "Executability", "Coherence",
                             "Informativeness"))
        words = _content_words(prompt) or ["task"]
        return f"Proceed with the {words[0]} as planned."


class MockImageSynthesizer(RoleClient):
    """Deterministic PNGs seeded by hash(prompt ‖ digest(base) ‖ seed).

    The prompt and a derived structured-info record are embedded as PNG text
    chunks, giving the vision mock a consistent story to tell about the image.
    """

    role = "image_synthesizer"

    def __init__(self, seed: int = 0, size: int = 24, log: ProvenanceLog | None = None):
        super().__init__(log)
        self.seed = seed
        self.size = size

    def _payload_words(self, prompt: str) -> list[str]:
        m = _IMAGE_PAYLOAD_RE.search(prompt)
        return _content_words(m.group(1) if m else prompt) or ["scene"]

    def _derived_record(self, prompt: str) -> PPDDLRecord:
        words = self._payload_words(prompt)
        noun = _pick(NOUNS, "img-noun", prompt, seed=self.seed)
        verb = _pick(VERBS, "img-verb", prompt, seed=self.seed)
        objects = tuple(dict.fromkeys([words[0], noun]))
        tools = (words[1],) if len(words) > 1 else ()
        return PPDDLRecord(
            objects=objects,
            tools=tools,
            actions=(f"{verb} the {noun}",),
            goal=" ".join(words[:4]),
        )

    def synthesize_image(self, prompt: str, base: bytes | None = None,
                         stage: str = "synthesize") -> bytes:
        t0 = timer()
        base_digest = None
        if base is not None:
            decode_png(base)
            base_digest = sha256_hex(base)
        key = _h(prompt, base_digest or "", seed=self.seed)
        rng = np.random.default_rng(key)
        pixels = rng.integers(0, 256, size=(self.size, self.size, 3), dtype=np.uint8)
        info = PngInfo()
        info.add_text("mock:prompt", prompt)
        info.add_text("mock:ppddl", serialize_ppddl(self._derived_record(prompt)))
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG", pnginfo=info)
        data = buf.getvalue()
        request = json.dumps({"prompt": prompt, "base_digest": base_digest},
                             sort_keys=True)
        self._record(stage, request, f"png:{sha256_hex(data)}", t0)
        return data


def read_mock_metadata(image: bytes) -> dict[str, str]:
    img = Image.open(io.BytesIO(image))
    return dict(getattr(img, "text", {}) or {})


class MockVisionInterpreter(RoleClient):
    """Routes on prompt markers; answers from the mock image's metadata."""

    role = "vision_interpreter"

    def __init__(self, seed: int = 0, max_payload_bytes: int | None = None,
                 log: ProvenanceLog | None = None):
        super().__init__(log)
        self.seed = seed
        self.max_payload_bytes = max_payload_bytes

    def interpret_image(self, image: bytes, prompt: str,
                        extra_images: tuple[bytes, ...] = (),
                        stage: str = "vision") -> str:
        t0 = timer()
        total = len(image) + sum(len(i) for i in extra_images)
        if self.max_payload_bytes is not None and total > self.max_payload_bytes:
            raise PayloadTooLarge(f"payload {total} bytes exceeds limit")
        try:
            decode_png(image)
        except DecodeError:
            raise
        meta = read_mock_metadata(image)
        response = self._respond(prompt, meta)
        request = json.dumps({"prompt": prompt, "image": sha256_hex(image),
                              "extra_images": [sha256_hex(i) for i in extra_images]},
                             sort_keys=True)
        self._record(stage, request, response, t0)
        return response

    def _describe(self, meta: dict[str, str]) -> str:
        source = meta.get("mock:ppddl", "") + meta.get("mock:prompt", "")
        words = _content_words(source) or ["scene"]
        place = _pick(PLACES, "bg", source, seed=self.seed)
        adj = _pick(ADJECTIVES, "adj", source, seed=self.seed)
        shown = " and ".join(dict.fromkeys(words[:3]))
        return (f"The image shows {shown} on a {adj} {place}. "
                f"Someone is working with the {words[0]}.")

    def _respond(self, prompt: str, meta: dict[str, str]) -> str:
        if "OBJECTS: [object list]" in prompt:
            if "mock:ppddl" in meta:
                return meta["mock:ppddl"]
            words = _content_words(prompt) or ["scene"]
            return (f"OBJECTS: {words[0]}\nTOOLS: none\n"
                    f"ACTIONS: inspect the {words[0]}\nGOAL: {' '.join(words[:3])}")
        if "aligns with the given step description" in prompt:
            return f"Score: {3 + _h('ti', prompt, seed=self.seed) % 3} - mostly aligned"
        if "continues from Image 1" in prompt:
            return f"Score: {3 + _h('ii', prompt, seed=self.seed) % 3} - plausible continuation"
        if "using the provided image" in prompt:
            original = _ORIGINAL_STEP_RE.search(prompt)
            draft = original.group(1).strip() if original else "the step"
            words = _content_words(meta.get("mock:ppddl", "")) or ["scene"]
            return f"{draft.rstrip('.')} with the {words[0]} shown in the image."
        return self._describe(meta)


class MockEmbedder(RoleClient):
    """Seeded hash projection to a unit sphere; byte-equal inputs agree."""

    role = "embedder"

    def __init__(self, seed: int = 0, dim: int = 64, log: ProvenanceLog | None = None):
        super().__init__(log)
        self.seed = seed
        self.dim = dim

    def embed(self, item: str | bytes) -> np.ndarray:
        if not item:
            raise ValidationError("cannot embed empty input")
        t0 = timer()
        data = item.encode("utf-8") if isinstance(item, str) else item
        key = hashlib.sha256(data + self.seed.to_bytes(8, "big")).digest()
        rng = np.random.default_rng(int.from_bytes(key[:8], "big"))
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        request = f"bytes:{sha256_hex(data)}" if isinstance(item, bytes) else item
        self._record("embed", request, f"vector(dim={self.dim})", t0)
        return vec


class ConstantTokenScorer(RoleClient):
    """Assigns a fixed log-probability to every continuation token."""

    role = "token_scorer"

    def __init__(self, logprob: float = math.log(0.5), log: ProvenanceLog | None = None):
        super().__init__(log)
        self.logprob = logprob

    def score_tokens(self, context: str, continuation: str) -> list[float]:
        t0 = timer()
        tokens = tokenize(continuation)
        if not tokens:
            raise ValidationError("continuation must contain at least one token")
        scores = [self.logprob] * len(tokens)
        self._record("score", json.dumps({"context": context, "continuation": continuation}),
                     json.dumps(scores), t0)
        return scores


class OverlapTokenScorer(RoleClient):
    """Tokens appearing in the context score log(0.9); novel tokens log(0.1)."""

    role = "token_scorer"

    def __init__(self, hit_logprob: float = math.log(0.9),
                 miss_logprob: float = math.log(0.1),
                 log: ProvenanceLog | None = None):
        super().__init__(log)
        self.hit_logprob = hit_logprob
        self.miss_logprob = miss_logprob

    def score_tokens(self, context: str, continuation: str) -> list[float]:
        t0 = timer()
        tokens = tokenize(continuation)
        if not tokens:
            raise ValidationError("continuation must contain at least one token")
        known = set(tokenize(context))
        scores = [self.hit_logprob if t in known else self.miss_logprob
                  for t in tokens]
        self._record("score", json.dumps({"context": context, "continuation": continuation}),
                     json.dumps(scores), t0)
        return scores


def mock_suite(seed: int = 0, dim: int = 64, image_size: int = 24,
               transcript: list[str] | None = None,
               scorer: RoleClient | None = None) -> BackendSuite:
    """Build a fully deterministic suite; `transcript` scripts the text role."""
    descriptor = json.dumps(
        {"kind": "mock", "seed": seed, "dim": dim, "image_size": image_size,
         "scripted": transcript is not None},
        sort_keys=True)
    text = (ScriptedTextGenerator(transcript) if transcript is not None
            else MockTextGenerator(seed))
    return BackendSuite(
        text_generator=text,
        image_synthesizer=MockImageSynthesizer(seed, size=image_size),
        vision_interpreter=MockVisionInterpreter(seed),
        embedder=MockEmbedder(seed, dim=dim),
        token_scorer=scorer if scorer is not None else ConstantTokenScorer(),
        fingerprint=sha256_hex(descriptor.encode("utf-8")),
    )
