"""Blinded pairwise annotation records, storage, and agreement reporting.

Annotators compare two candidate plans per session across three aspects
(textual quality, visual coherence, text-image alignment) with win/tie/lose
verdicts. Sides are blinded per session by a seed; verdicts are stored as
submitted (relative to the displayed candidate 1) together with that seed,
so un-blinding is a pure recomputation and never mutates records.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MPlanError, UnevenRatings, ValidationError
from .metrics import cohen_kappa, fleiss_kappa
from .plan_model import utc_now_iso
from .report import JUDGE_TEXT_CRITERIA

ASPECTS = ("text", "image", "t_i")
VERDICTS = ("win", "tie", "lose")
REASONS = JUDGE_TEXT_CRITERIA


class DuplicateAnnotation(MPlanError):
    """The (annotator, session, aspect) triple was already recorded."""


@dataclass(frozen=True)
class PairingSession:
    """One blinded comparison unit; candidate A is conventionally `ours`."""

    session_id: str
    task_id: str
    bundle_a: str
    bundle_b: str
    blind_seed: int

    @property
    def swapped(self) -> bool:
        # Left/right order is a pure function of the seed.
        return self.blind_seed % 2 == 1


@dataclass(frozen=True)
class AnnotationRecord:
    """One verdict for one (session, aspect) by one annotator."""

    session_id: str
    task_id: str
    aspect: str
    verdict: str
    annotator_id: str
    blind_seed: int
    reasons: tuple[str, ...] = ()
    free_text: str = ""
    created_at: str = field(default_factory=utc_now_iso)

    def __post_init__(self):
        if self.aspect not in ASPECTS:
            raise ValidationError(f"unknown aspect {self.aspect!r}")
        if self.verdict not in VERDICTS:
            raise ValidationError(f"unknown verdict {self.verdict!r}")
        if not self.annotator_id:
            raise ValidationError("annotator_id must be non-empty")
        for reason in self.reasons:
            if reason not in REASONS:
                raise ValidationError(f"unknown reason {reason!r}")
        if self.reasons and (self.aspect != "text" or self.verdict == "tie"):
            raise ValidationError(
                "reasons are only allowed for aspect=text with a non-tie verdict")


def record_to_dict(rec: AnnotationRecord) -> dict:
    return {
        "session_id": rec.session_id,
        "task_id": rec.task_id,
        "aspect": rec.aspect,
        "verdict": rec.verdict,
        "annotator_id": rec.annotator_id,
        "blind_seed": rec.blind_seed,
        "reasons": list(rec.reasons),
        "free_text": rec.free_text,
        "created_at": rec.created_at,
    }


def record_from_dict(d: dict) -> AnnotationRecord:
    return AnnotationRecord(
        session_id=d["session_id"],
        task_id=d["task_id"],
        aspect=d["aspect"],
        verdict=d["verdict"],
        annotator_id=d["annotator_id"],
        blind_seed=d["blind_seed"],
        reasons=tuple(d.get("reasons", ())),
        free_text=d.get("free_text", ""),
        created_at=d.get("created_at", utc_now_iso()),
    )


class AnnotationStore:
    """Append-only line-delimited store with duplicate rejection."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: list[AnnotationRecord] = []
        self._seen: set[tuple[str, str, str]] = set()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = record_from_dict(json.loads(line))
                    self._records.append(rec)
                    self._seen.add(self._key(rec))

    @staticmethod
    def _key(rec: AnnotationRecord) -> tuple[str, str, str]:
        return (rec.annotator_id, rec.session_id, rec.aspect)

    def append(self, rec: AnnotationRecord) -> None:
        with self._lock:
            if self._key(rec) in self._seen:
                raise DuplicateAnnotation(
                    f"{rec.annotator_id} already annotated "
                    f"{rec.session_id}/{rec.aspect}")
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record_to_dict(rec), sort_keys=True) + "\n")
            self._records.append(rec)
            self._seen.add(self._key(rec))

    def records(self) -> tuple[AnnotationRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def has(self, annotator_id: str, session_id: str, aspect: str) -> bool:
        with self._lock:
            return (annotator_id, session_id, aspect) in self._seen


def unblinded_verdict(rec: AnnotationRecord) -> str:
    """Verdict relative to candidate A (win/lose flip when sides were swapped)."""
    if rec.blind_seed % 2 == 0 or rec.verdict == "tie":
        return rec.verdict
    return {"win": "lose", "lose": "win"}[rec.verdict]


def tallies_by_aspect(records: tuple[AnnotationRecord, ...] | list[AnnotationRecord],
                      ) -> dict[str, dict[str, int]]:
    out = {aspect: {v: 0 for v in VERDICTS} for aspect in ASPECTS}
    for rec in records:
        out[rec.aspect][unblinded_verdict(rec)] += 1
    return out


def kappa_by_aspect(records, session_ids: list[str], raters: int = 3,
                    ) -> dict[str, float | None]:
    """Fleiss kappa per aspect, available once every item has `raters` ratings."""
    out: dict[str, float | None] = {}
    for aspect in ASPECTS:
        counts = []
        complete = True
        for sid in session_ids:
            verdicts = [unblinded_verdict(r) for r in records
                        if r.aspect == aspect and r.session_id == sid]
            if len(verdicts) != raters:
                complete = False
                break
            counts.append([verdicts.count(v) for v in VERDICTS])
        if not complete or not counts:
            out[aspect] = None
            continue
        try:
            out[aspect] = fleiss_kappa(counts)
        except UnevenRatings:
            out[aspect] = None
    return out


def pairwise_cohen_by_aspect(records, session_ids: list[str],
                             ) -> dict[str, dict[str, float]]:
    """Secondary agreement view: Cohen kappa for each annotator pair, per
    aspect, over the sessions both annotators rated."""
    out: dict[str, dict[str, float]] = {}
    for aspect in ASPECTS:
        by_annotator: dict[str, dict[str, str]] = {}
        for rec in records:
            if rec.aspect == aspect:
                by_annotator.setdefault(rec.annotator_id, {})[rec.session_id] = \
                    unblinded_verdict(rec)
        pairs: dict[str, float] = {}
        annotators = sorted(by_annotator)
        for i, a in enumerate(annotators):
            for b in annotators[i + 1:]:
                shared = [sid for sid in session_ids
                          if sid in by_annotator[a] and sid in by_annotator[b]]
                if not shared:
                    continue
                pairs[f"{a}|{b}"] = cohen_kappa(
                    [by_annotator[a][sid] for sid in shared],
                    [by_annotator[b][sid] for sid in shared])
        out[aspect] = pairs
    return out
