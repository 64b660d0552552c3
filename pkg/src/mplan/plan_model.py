"""Core data model: goals, steps, plans, and content-addressed persistence.

A bundle is the durable artifact of one generation run for one task: a
`plan.json` manifest plus the referenced images in a sibling `blobs/`
directory keyed by lowercase-hex SHA-256 digest. Manifests are UTF-8 JSON
with sorted keys so that equal bundles produce byte-equal documents.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from PIL import Image

from .errors import DecodeError, ParseError, ValidationError
from .ppddl import PPDDLRecord, parse_ppddl, serialize_ppddl

SOURCES = ("instructables", "wikihow", "synthetic")
COMPLEXITIES = ("high", "medium", "low", "unknown")
METHODS = ("ours", "vanilla", "sd_first", "w_des", "w_img", "ppddl_to_nl")

# Dataset categories: the single Instructables category plus the ten
# wikiHow picks carried by the corpus; anything else maps to "other".
CATEGORIES = (
    "cooking",
    "home-and-garden",
    "hobbies-and-crafts",
    "education-and-communications",
    "arts-and-entertainment",
    "cars-and-other-vehicles",
    "computers-and-electronics",
    "food-and-entertaining",
    "health",
    "pets-and-animals",
    "sports-and-fitness",
    "other",
)

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class TaskGoal:
    """A natural-language task goal with its corpus metadata."""

    id: str
    goal_text: str
    category: str = "other"
    source: str = "synthetic"
    complexity: str = "unknown"

    def __post_init__(self):
        if not self.id:
            raise ValidationError("goal id must be non-empty")
        if not self.goal_text.strip():
            raise ValidationError("goal_text must be non-empty")
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category {self.category!r}")
        if self.source not in SOURCES:
            raise ValidationError(f"unknown source {self.source!r}")
        if self.complexity not in COMPLEXITIES:
            raise ValidationError(f"unknown complexity {self.complexity!r}")


@dataclass(frozen=True)
class ImageRef:
    """Identity of a stored image: content digest plus decoded dimensions."""

    digest: str
    width: int
    height: int
    media_type: str = "image/png"

    def __post_init__(self):
        if not _DIGEST_RE.match(self.digest):
            raise ValidationError("digest must be 64 lowercase hex chars")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be >= 1")


@dataclass(frozen=True)
class ProvenanceEntry:
    """Verbatim transcript of one backend call."""

    role: str
    stage: str
    request: str
    response: str
    request_sha256: str
    response_sha256: str
    latency_ms: float


@dataclass(frozen=True)
class PlanStep:
    """One plan step: the draft, its image, extracted info, and final text."""

    index: int
    draft_text: str
    final_text: str
    visual_info: PPDDLRecord | None = None
    image: ImageRef | None = None
    provenance: tuple[ProvenanceEntry, ...] = ()
    goal_achieved_flag: bool = False
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError("step index must be >= 1")
        if not self.final_text.strip():
            raise ValidationError("final_text must be non-empty")


@dataclass(frozen=True)
class PlanBundle:
    """The full output of one method variant on one goal."""

    goal: TaskGoal
    method: str
    steps: tuple[PlanStep, ...]
    backend_fingerprint: str
    seed: int
    created_at: str = field(default_factory=utc_now_iso)
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class ReferenceStep:
    text: str
    image: ImageRef | None = None


@dataclass(frozen=True)
class ReferencePlan:
    """A ground-truth plan from the corpus, stripped of author identity."""

    goal: TaskGoal
    steps: tuple[ReferenceStep, ...]
    source_url_anonymized: str = ""

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("reference plan requires at least one step")


class ImageStore:
    """Content-addressed PNG store: one file per digest under a root directory.

    Puts are idempotent and safe under concurrent writers (write-to-temp then
    atomic rename); readers need no coordination.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.png"

    def put(self, data: bytes) -> ImageRef:
        ref = decode_png(data)
        self.root.mkdir(parents=True, exist_ok=True)
        target = self._path(ref.digest)
        if not target.exists():
            tmp = target.with_suffix(f".tmp.{os.getpid()}")
            tmp.write_bytes(data)
            os.replace(tmp, target)
        return ref

    def get(self, digest: str) -> bytes:
        path = self._path(digest)
        if not path.exists():
            raise ValidationError(f"image {digest} not in store")
        return path.read_bytes()

    def exists(self, digest: str) -> bool:
        return self._path(digest).exists()

    def digests(self) -> set[str]:
        if not self.root.exists():
            return set()
        return {p.stem for p in self.root.glob("*.png")}


def decode_png(data: bytes) -> ImageRef:
    """Decode PNG bytes into their content-addressed identity."""
    try:
        img = Image.open(io.BytesIO(data))
        fmt = img.format
        width, height = img.size
    except Exception as exc:
        raise DecodeError(f"not a decodable image: {exc}") from exc
    if fmt != "PNG":
        raise DecodeError(f"expected PNG, got {fmt}")
    return ImageRef(digest=sha256_hex(data), width=width, height=height)


def store_image(store: ImageStore, data: bytes) -> ImageRef:
    """Persist PNG bytes under their content hash; idempotent."""
    return store.put(data)


# --- manifest serialization ---

def _image_to_dict(ref: ImageRef | None) -> dict | None:
    if ref is None:
        return None
    return {
        "digest": ref.digest,
        "media_type": ref.media_type,
        "width": ref.width,
        "height": ref.height,
    }


def _image_from_dict(d: dict | None) -> ImageRef | None:
    if d is None:
        return None
    return ImageRef(
        digest=d["digest"],
        width=d["width"],
        height=d["height"],
        media_type=d.get("media_type", "image/png"),
    )


def _provenance_to_dict(entry: ProvenanceEntry) -> dict:
    return {
        "role": entry.role,
        "stage": entry.stage,
        "request": entry.request,
        "response": entry.response,
        "request_sha256": entry.request_sha256,
        "response_sha256": entry.response_sha256,
        "latency_ms": entry.latency_ms,
    }


def _provenance_from_dict(d: dict) -> ProvenanceEntry:
    return ProvenanceEntry(
        role=d["role"],
        stage=d["stage"],
        request=d["request"],
        response=d["response"],
        request_sha256=d["request_sha256"],
        response_sha256=d["response_sha256"],
        latency_ms=d["latency_ms"],
    )


def goal_to_dict(goal: TaskGoal) -> dict:
    return {
        "id": goal.id,
        "goal_text": goal.goal_text,
        "category": goal.category,
        "source": goal.source,
        "complexity": goal.complexity,
    }


def goal_from_dict(d: dict) -> TaskGoal:
    return TaskGoal(
        id=d["id"],
        goal_text=d["goal_text"],
        category=d.get("category", "other"),
        source=d.get("source", "synthetic"),
        complexity=d.get("complexity", "unknown"),
    )


def reference_to_dict(ref: ReferencePlan) -> dict:
    return {
        "goal": goal_to_dict(ref.goal),
        "steps": [{"text": s.text, "image": _image_to_dict(s.image)}
                  for s in ref.steps],
        "source_url_anonymized": ref.source_url_anonymized,
    }


def reference_from_dict(d: dict) -> ReferencePlan:
    return ReferencePlan(
        goal=goal_from_dict(d["goal"]),
        steps=tuple(ReferenceStep(text=s["text"], image=_image_from_dict(s.get("image")))
                    for s in d["steps"]),
        source_url_anonymized=d.get("source_url_anonymized", ""),
    )


def bundle_to_dict(bundle: PlanBundle) -> dict:
    return {
        "goal": goal_to_dict(bundle.goal),
        "method": bundle.method,
        "seed": bundle.seed,
        "backend_fingerprint": bundle.backend_fingerprint,
        "created_at": bundle.created_at,
        "flags": list(bundle.flags),
        "steps": [
            {
                "index": s.index,
                "draft_text": s.draft_text,
                "final_text": s.final_text,
                "visual_info": serialize_ppddl(s.visual_info) if s.visual_info else None,
                "image": _image_to_dict(s.image),
                "goal_achieved_flag": s.goal_achieved_flag,
                "flags": list(s.flags),
                "provenance": [_provenance_to_dict(p) for p in s.provenance],
            }
            for s in bundle.steps
        ],
    }


def bundle_from_dict(d: dict) -> PlanBundle:
    try:
        steps = tuple(
            PlanStep(
                index=sd["index"],
                draft_text=sd.get("draft_text", ""),
                final_text=sd["final_text"],
                visual_info=parse_ppddl(sd["visual_info"]) if sd.get("visual_info") else None,
                image=_image_from_dict(sd.get("image")),
                provenance=tuple(_provenance_from_dict(p) for p in sd.get("provenance", ())),
                goal_achieved_flag=sd.get("goal_achieved_flag", False),
                flags=tuple(sd.get("flags", ())),
            )
            for sd in d["steps"]
        )
        return PlanBundle(
            goal=goal_from_dict(d["goal"]),
            method=d["method"],
            steps=steps,
            backend_fingerprint=d["backend_fingerprint"],
            seed=d["seed"],
            created_at=d["created_at"],
            flags=tuple(d.get("flags", ())),
        )
    except KeyError as exc:
        raise ParseError(f"manifest missing field {exc}") from exc


def validate_bundle(bundle: PlanBundle, store: ImageStore | None = None) -> None:
    """Check structural invariants; raises ValidationError on the first breach."""
    if not bundle.steps:
        raise ValidationError("bundle must contain at least one step")
    indices = [s.index for s in bundle.steps]
    expected = list(range(1, len(indices) + 1))
    if indices != expected:
        for want, got in zip(expected, indices):
            if want != got:
                raise ValidationError(f"step indices must be contiguous: gap at {want}")
        raise ValidationError("step indices must be contiguous")
    for s in bundle.steps:
        if s.image is None:
            # imageless steps are only legal when configured off at step one
            if not (s.index == 1 and "no_first_image" in s.flags):
                raise ValidationError(
                    f"step {s.index}: multimodal method requires an image")
            continue
        if store is not None and not store.exists(s.image.digest):
            raise ValidationError(
                f"step {s.index}: image {s.image.digest} not resolvable in store")


def save_bundle(bundle: PlanBundle, out_dir: Path | str, store: ImageStore) -> Path:
    """Write `plan.json` plus referenced blobs under out_dir; returns the manifest path.

    load_bundle(save_bundle(b)) == b field-for-field, timestamps included.
    """
    validate_bundle(bundle, store)
    out_dir = Path(out_dir)
    blob_store = ImageStore(out_dir / "blobs")
    for s in bundle.steps:
        if s.image is not None and not blob_store.exists(s.image.digest):
            blob_store.put(store.get(s.image.digest))
    manifest = out_dir / "plan.json"
    payload = json.dumps(bundle_to_dict(bundle), sort_keys=True, indent=2,
                         ensure_ascii=False) + "\n"
    tmp = manifest.with_suffix(f".tmp.{os.getpid()}")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, manifest)
    return manifest


def load_bundle(manifest: Path | str) -> PlanBundle:
    """Load and fully validate a bundle manifest; never returns a partial bundle.

    Unknown manifest fields are ignored for forward compatibility.
    """
    manifest = Path(manifest)
    try:
        raw = manifest.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read manifest: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from exc
    bundle = bundle_from_dict(data)
    validate_bundle(bundle, ImageStore(manifest.parent / "blobs"))
    return bundle


def open_bundle(bundle_dir: Path | str) -> tuple[PlanBundle, ImageStore]:
    """Load a saved bundle together with the store holding its blobs."""
    bundle_dir = Path(bundle_dir)
    return load_bundle(bundle_dir / "plan.json"), ImageStore(bundle_dir / "blobs")
