"""Corpus ingestion, statistics, image-edit triplets, and the task split.

Dump layout: `<dump>/<task_id>/meta.json` plus `steps/<k>.txt` and optional
`images/<k>.png` per step. Ingestion normalizes into the reference schema,
strips author identity, and logs a reason for every skipped task. All
outputs are deterministic: records merge in task-id order and the split is
a seeded shuffle.
"""

from __future__ import annotations

import json
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyCorpus, TooFewTasks, ValidationError
from .plan_model import (CATEGORIES, ImageRef, ImageStore, ReferencePlan,
                         ReferenceStep, TaskGoal, decode_png, sha256_hex)

log = logging.getLogger(__name__)

LICENSE_BY_SOURCE = {
    "instructables": "cc-by-nc-sa-3",
    "wikihow": "cc-by-nc-sa-4",
    "synthetic": "other",
}
LICENSES = ("cc-by-nc-sa-3", "cc-by-nc-sa-4", "other")

_STEP_FILE_RE = re.compile(r"^(\d+)\.txt$")


@dataclass(frozen=True)
class CorpusRecord:
    """One ingested task: its reference plan plus provenance metadata."""

    reference: ReferencePlan
    raw_source_id: str
    license_tag: str

    def __post_init__(self):
        if self.license_tag not in LICENSES:
            raise ValidationError(f"unknown license tag {self.license_tag!r}")


@dataclass(frozen=True)
class Triplet:
    """An image-edit training sample: previous image, step text, next image."""

    prev_image: ImageRef
    step_text: str
    next_image: ImageRef


@dataclass(frozen=True)
class SplitManifest:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    ratios: tuple[float, float, float]
    seed: int


@dataclass(frozen=True)
class CorpusStats:
    task_count: int
    category_count: int
    mean_steps_per_task: float
    mean_words_per_step: float


def anonymize_url(url: str, source: str) -> str:
    """Replace a source URL with a content-hash form carrying no author path."""
    if not url:
        return ""
    return f"anon://{source}/{sha256_hex(url.encode('utf-8'))[:12]}"


def _first_step_image(images_dir: Path, k: int) -> Path | None:
    # A step may carry several images; the first (lowest suffix) represents it.
    candidates = sorted(images_dir.glob(f"{k}.png")) + sorted(images_dir.glob(f"{k}_*.png"))
    return candidates[0] if candidates else None


def ingest(dump_dir: Path | str, source: str, store: ImageStore | None = None,
           workers: int = 8) -> list[CorpusRecord]:
    """Read a local dump into normalized records; malformed tasks are skipped.

    Author names, personal notes, and raw URLs never reach the records.
    Task documents are processed in parallel but merged in task-id order, so
    re-ingesting the same dump yields an identical record list.
    """
    dump_dir = Path(dump_dir)
    if source not in LICENSE_BY_SOURCE:
        raise ValidationError(f"unknown source {source!r}")
    if not dump_dir.is_dir():
        raise OSError(f"dump directory {dump_dir} does not exist")

    task_dirs = sorted((p for p in dump_dir.iterdir() if p.is_dir()),
                       key=lambda p: p.name)
    if workers > 1 and len(task_dirs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            maybe = list(pool.map(lambda d: _ingest_task(d, source, store),
                                  task_dirs))
    else:
        maybe = [_ingest_task(d, source, store) for d in task_dirs]
    records = [r for r in maybe if r is not None]
    if not records:
        raise EmptyCorpus(f"no usable tasks under {dump_dir}")
    return records


def _ingest_task(task_dir: Path, source: str,
                 store: ImageStore | None) -> CorpusRecord | None:
    task_id = task_dir.name
    meta_path = task_dir / "meta.json"
    if not meta_path.exists():
        log.warning("skipping %s: no meta.json", task_id)
        return None
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except (ValueError, OSError) as exc:
        log.warning("skipping %s: unreadable meta.json (%s)", task_id, exc)
        return None
    goal_text = (meta.get("goal_text") or meta.get("title") or "").strip()
    if not goal_text:
        log.warning("skipping %s: no goal text", task_id)
        return None

    steps_dir = task_dir / "steps"
    images_dir = task_dir / "images"
    indexed: list[tuple[int, Path]] = []
    if steps_dir.is_dir():
        for path in steps_dir.iterdir():
            m = _STEP_FILE_RE.match(path.name)
            if m:
                indexed.append((int(m.group(1)), path))
    if not indexed:
        log.warning("skipping %s: no steps", task_id)
        return None
    indexed.sort()

    steps: list[ReferenceStep] = []
    for k, path in indexed:
        text = path.read_text(encoding="utf-8").strip()
        if not text:
            continue
        image_ref = None
        image_path = _first_step_image(images_dir, k) if images_dir.is_dir() else None
        if image_path is not None:
            data = image_path.read_bytes()
            image_ref = store.put(data) if store is not None else decode_png(data)
        steps.append(ReferenceStep(text=text, image=image_ref))
    if not steps:
        log.warning("skipping %s: no non-empty steps", task_id)
        return None

    category = meta.get("category", "other")
    if category not in CATEGORIES:
        category = "other"
    goal = TaskGoal(
        id=task_id,
        goal_text=goal_text,
        category=category,
        source=source,
        complexity=meta.get("complexity", "unknown"),
    )
    reference = ReferencePlan(
        goal=goal,
        steps=tuple(steps),
        source_url_anonymized=anonymize_url(meta.get("url", ""), source),
    )
    return CorpusRecord(reference=reference, raw_source_id=task_id,
                        license_tag=LICENSE_BY_SOURCE[source])


def corpus_stats(records: list[CorpusRecord]) -> CorpusStats:
    """Task/category counts and per-task / per-step means over the corpus."""
    if not records:
        raise EmptyCorpus("no records")
    total_steps = 0
    total_words = 0
    categories = set()
    for rec in records:
        categories.add(rec.reference.goal.category)
        for step in rec.reference.steps:
            total_steps += 1
            total_words += len(step.text.split())
    return CorpusStats(
        task_count=len(records),
        category_count=len(categories),
        mean_steps_per_task=total_steps / len(records),
        mean_words_per_step=total_words / total_steps,
    )


def build_triplets(records: list[CorpusRecord]) -> list[Triplet]:
    """Pair consecutive imaged steps; the text comes from the later step.

    Steps without images break the chain: a plan with images at {1,2,4,5}
    yields the pairs (1,2) and (4,5) only.
    """
    triplets: list[Triplet] = []
    for rec in records:
        prev: ReferenceStep | None = None
        for step in rec.reference.steps:
            if step.image is None:
                prev = None
                continue
            if prev is not None:
                triplets.append(Triplet(prev_image=prev.image,
                                        step_text=step.text,
                                        next_image=step.image))
            prev = step
    return triplets


def split_tasks(task_ids: list[str],
                ratios: tuple[float, float, float] = (0.9, 0.05, 0.05),
                seed: int = 0) -> SplitManifest:
    """Deterministic by-task split: floor val/test sizes, remainder to train."""
    if len(task_ids) < 20:
        raise TooFewTasks(f"need at least 20 tasks, got {len(task_ids)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError("split ratios must sum to 1")
    ids = sorted(task_ids)
    if len(set(ids)) != len(ids):
        raise ValidationError("task ids must be unique")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    return SplitManifest(
        train=tuple(ids[:n_train]),
        val=tuple(ids[n_train:n_train + n_val]),
        test=tuple(ids[n_train + n_val:]),
        ratios=ratios,
        seed=seed,
    )


def sample_by_category(records: list[CorpusRecord], n: int,
                       seed: int = 0) -> list[CorpusRecord]:
    """Seeded uniform sample within each category, proportional to its size."""
    if n >= len(records):
        return list(records)
    by_cat: dict[str, list[CorpusRecord]] = {}
    for rec in records:
        by_cat.setdefault(rec.reference.goal.category, []).append(rec)
    rng = random.Random(seed)
    picked: list[CorpusRecord] = []
    remaining = n
    cats = sorted(by_cat)
    for i, cat in enumerate(cats):
        bucket = sorted(by_cat[cat], key=lambda r: r.reference.goal.id)
        share = round(n * len(bucket) / len(records)) if i < len(cats) - 1 else remaining
        share = max(0, min(share, len(bucket), remaining))
        picked.extend(rng.sample(bucket, share))
        remaining -= share
    return sorted(picked, key=lambda r: r.reference.goal.id)


# --- persistence ---

def _sanitize_tsv(text: str) -> str:
    # Tabs and newlines are the TSV structure; flatten them inside fields.
    return re.sub(r"[\t\r\n]+", " ", text).strip()


def write_triplets_tsv(triplets: list[Triplet], path: Path | str) -> Path:
    path = Path(path)
    lines = [f"{t.prev_image.digest}\t{_sanitize_tsv(t.step_text)}\t{t.next_image.digest}"
             for t in triplets]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def read_triplets_tsv(path: Path | str) -> list[tuple[str, str, str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            prev, text, nxt = line.split("\t")
            rows.append((prev, text, nxt))
    return rows


def save_split(manifest: SplitManifest, path: Path | str) -> Path:
    path = Path(path)
    payload = {
        "seed": manifest.seed,
        "ratios": list(manifest.ratios),
        "train": list(manifest.train),
        "val": list(manifest.val),
        "test": list(manifest.test),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def load_split(path: Path | str) -> SplitManifest:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return SplitManifest(
        train=tuple(data["train"]), val=tuple(data["val"]), test=tuple(data["test"]),
        ratios=tuple(data["ratios"]), seed=data["seed"])


def record_to_dict(rec: CorpusRecord) -> dict:
    from .plan_model import reference_to_dict
    return {
        "reference": reference_to_dict(rec.reference),
        "raw_source_id": rec.raw_source_id,
        "license_tag": rec.license_tag,
    }


def record_from_dict(d: dict) -> CorpusRecord:
    from .plan_model import reference_from_dict
    return CorpusRecord(
        reference=reference_from_dict(d["reference"]),
        raw_source_id=d["raw_source_id"],
        license_tag=d["license_tag"],
    )


def write_records(records: list[CorpusRecord], path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), sort_keys=True) + "\n")
    return path


def load_records(path: Path | str) -> list[CorpusRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(record_from_dict(json.loads(line)))
    if not records:
        raise EmptyCorpus(f"no records in {path}")
    return records
