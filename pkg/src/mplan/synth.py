"""Deterministic synthetic goals, corpus dumps, and reference plans.

Used by the test suite and the demo scripts so that end-to-end runs need no
external data. The two table corpora reproduce the published per-source
statistics exactly: 100 tasks / 7.20 steps / ~9.76 words per step for the
instructables profile, and 20 tasks / 33.30 steps / ~45.84 words per step
for the wikihow profile (same step/word means at a bundled-fixture scale).
"""

from __future__ import annotations

import io
import json
import random
from pathlib import Path

import numpy as np
from PIL import Image

from .plan_model import (CATEGORIES, ReferencePlan, ReferenceStep, TaskGoal,
                         goal_from_dict, goal_to_dict, reference_from_dict,
                         reference_to_dict)

_GOAL_VERBS = ("make", "build", "clean", "plant", "organize", "repair",
               "prepare", "paint", "assemble", "grow")
_GOAL_NOUNS = ("herb garden", "bird feeder", "bookshelf", "pasta dinner",
               "storage crate", "picture frame", "compost bin", "kite",
               "window planter", "wooden stool", "fruit salad", "lantern")
_ADJ = ("simple", "small", "sturdy", "colorful", "portable", "rustic")
_FILLER = ("gently", "slowly", "firmly", "evenly", "carefully", "neatly",
           "twice", "again", "together", "apart", "aside", "ready", "fresh",
           "loose", "tight", "flat", "level", "spare", "extra", "clean")
_STEP_VERBS = ("gather", "measure", "cut", "attach", "place", "mix", "fold",
               "secure", "rinse", "sand", "mark", "trim", "check", "press")
_STEP_NOUNS = ("board", "jar", "cloth", "bracket", "panel", "bowl", "handle",
               "frame", "strip", "corner", "edge", "surface", "batch", "layer")


def make_goals(n: int, seed: int = 0, source: str = "synthetic") -> list[TaskGoal]:
    rng = random.Random(seed)
    goals = []
    for i in range(n):
        verb = rng.choice(_GOAL_VERBS)
        adj = rng.choice(_ADJ)
        noun = rng.choice(_GOAL_NOUNS)
        goals.append(TaskGoal(
            id=f"{source}-{seed:02d}-{i:04d}",
            goal_text=f"{verb} a {adj} {noun}",
            category=rng.choice(CATEGORIES[:-1]),
            source=source,
            complexity=rng.choice(("high", "medium", "low")),
        ))
    return goals


def write_goals_file(goals: list[TaskGoal], path: Path | str) -> Path:
    path = Path(path)
    path.write_text(json.dumps([goal_to_dict(g) for g in goals], indent=2,
                               sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_goals_file(path: Path | str) -> list[TaskGoal]:
    return [goal_from_dict(d)
            for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def _sentence(rng: random.Random, n_words: int) -> str:
    words = [rng.choice(_STEP_VERBS), "the", rng.choice(_STEP_NOUNS)]
    while len(words) < n_words:
        words.append(rng.choice(_FILLER))
    return " ".join(words[:n_words])


def make_png(seed: int, size: int = 4) -> bytes:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# Per-source corpus profiles chosen so the means come out exactly on target:
#   instructables: 720 steps over 100 tasks (7.20), 7027 words (9.7597 ~ 9.76)
#   wikihow: 666 steps over 20 tasks (33.30), 30529 words (45.8393 ~ 45.84)
_TABLE_PROFILES = {
    "instructables": {
        "tasks": 100, "short_steps": 80, "short": 7, "long": 8,
        "rich_steps": 547, "rich_words": 10, "lean_words": 9,
        "categories": ("cooking",),
    },
    "wikihow": {
        "tasks": 20, "short_steps": 14, "short": 33, "long": 34,
        "rich_steps": 559, "rich_words": 46, "lean_words": 45,
        "categories": tuple(c for c in CATEGORIES if c not in ("cooking", "other")),
    },
}


def make_table_corpus(root: Path | str, source: str, seed: int = 0) -> Path:
    """Write a dump whose ingested statistics match the source's published means."""
    profile = _TABLE_PROFILES[source]
    root = Path(root)
    rng = random.Random(seed)
    step_counts = ([profile["short"]] * profile["short_steps"]
                   + [profile["long"]] * (profile["tasks"] - profile["short_steps"]))
    rng.shuffle(step_counts)
    total_steps = sum(step_counts)
    word_counts = ([profile["rich_words"]] * profile["rich_steps"]
                   + [profile["lean_words"]] * (total_steps - profile["rich_steps"]))
    rng.shuffle(word_counts)

    cursor = 0
    categories = profile["categories"]
    for i, n_steps in enumerate(step_counts):
        task_id = f"{source}-{i:04d}"
        task_dir = root / task_id
        steps_dir = task_dir / "steps"
        steps_dir.mkdir(parents=True, exist_ok=True)
        goal_noun = rng.choice(_GOAL_NOUNS)
        meta = {
            "title": f"{rng.choice(_GOAL_VERBS)} a {rng.choice(_ADJ)} {goal_noun}",
            "category": categories[i % len(categories)],
            "url": f"https://example.org/{source}/{task_id}",
            "author": f"member-{rng.randrange(10_000)}",
            "complexity": rng.choice(("high", "medium", "low")),
        }
        (task_dir / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
        for k in range(1, n_steps + 1):
            (steps_dir / f"{k}.txt").write_text(
                _sentence(rng, word_counts[cursor]), encoding="utf-8")
            cursor += 1
    return root


def make_image_dump(root: Path | str, n_tasks: int, seed: int = 0,
                    steps_per_task: int = 4,
                    imaged_steps=None, image_size: int = 4) -> Path:
    """A small dump with per-step PNGs (for triplet and ingest tests).

    `imaged_steps(task_index, n_steps)` returns the set of 1-based step
    indices that carry an image; by default all of them do.
    """
    root = Path(root)
    rng = random.Random(seed)
    for i in range(n_tasks):
        task_id = f"imgtask-{i:04d}"
        task_dir = root / task_id
        (task_dir / "steps").mkdir(parents=True, exist_ok=True)
        (task_dir / "images").mkdir(parents=True, exist_ok=True)
        meta = {
            "title": f"{rng.choice(_GOAL_VERBS)} a {rng.choice(_GOAL_NOUNS)}",
            "category": "other",
            "url": f"https://example.org/img/{task_id}",
        }
        (task_dir / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
        with_images = (set(range(1, steps_per_task + 1)) if imaged_steps is None
                       else set(imaged_steps(i, steps_per_task)))
        for k in range(1, steps_per_task + 1):
            (task_dir / "steps" / f"{k}.txt").write_text(
                _sentence(rng, 6), encoding="utf-8")
            if k in with_images:
                (task_dir / "images" / f"{k}.png").write_bytes(
                    make_png(seed * 10_000 + i * 100 + k, size=image_size))
    return root


def make_reference(goal: TaskGoal, seed: int = 0, n_steps: int | None = None,
                   ) -> ReferencePlan:
    rng = random.Random(f"{goal.id}:{seed}")
    n = n_steps or rng.randint(3, 6)
    goal_words = goal.goal_text.split()
    steps = []
    for k in range(n):
        base = _sentence(rng, rng.randint(6, 10))
        steps.append(ReferenceStep(text=f"{base} for the {goal_words[-1]}"))
    return ReferencePlan(goal=goal, steps=tuple(steps),
                         source_url_anonymized=f"anon://{goal.source}/{goal.id}")


def write_references_file(references: list[ReferencePlan], path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for ref in references:
            fh.write(json.dumps(reference_to_dict(ref), sort_keys=True) + "\n")
    return path


def load_references_file(path: Path | str) -> dict[str, ReferencePlan]:
    refs = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            ref = reference_from_dict(json.loads(line))
            refs[ref.goal.id] = ref
    return refs
