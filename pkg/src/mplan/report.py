"""Judge orchestration and aggregation into the main results table shape.

One row per (method, corpus): six automatic columns and six judge columns.
Judge scores are means over steps within a task, then over tasks; missing
judge answers are excluded from means and surfaced through coverage counts
rather than fabricated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends.base import BackendSuite
from .errors import FewerThanTwoImages, MissingReference, ValidationError
from .metrics import (bertscore_f1, plan_clip_score, rouge_l, rouge_n,
                      visual_coherence_ppl)
from .plan_model import ImageStore, PlanBundle, ReferencePlan, utc_now_iso
from .prompting import parse_judge_scores, render_prompt

METRIC_COLUMNS = ("BertScore", "R-1", "R-2", "R-L", "CLIP", "PPL",
                  "Corr.", "Exec.", "Coh.", "Info.", "T-I", "I-I")
JUDGE_TEXT_CRITERIA = ("correctness", "executability", "coherence",
                       "informativeness")
JUDGE_KEYS = JUDGE_TEXT_CRITERIA + ("t_i", "i_i")


def plan_as_text(steps: list[str] | tuple[str, ...]) -> str:
    return "\n".join(f"STEP {i}: {t}" for i, t in enumerate(steps, start=1))


def judge_plan(bundle: PlanBundle, reference: ReferencePlan, store: ImageStore,
               suite: BackendSuite, template_dir: Path | None = None,
               ) -> tuple[dict[str, float | None], dict[str, tuple[int, int]]]:
    """Run the three judges over one plan.

    The textual judge runs once (four criteria in one response); the
    text-image judge once per step; the image-pair judge once per
    consecutive image pair with the later step's text. Returns per-criterion
    means plus (answered, expected) coverage counts.
    """
    scores: dict[str, list[int]] = {k: [] for k in JUDGE_KEYS}
    expected: dict[str, int] = {k: 0 for k in JUDGE_KEYS}

    prompt = render_prompt("judge_text", {
        "goal": bundle.goal.goal_text,
        "reference_plan": plan_as_text([s.text for s in reference.steps]),
        "candidate_plan": plan_as_text([s.final_text for s in bundle.steps]),
    }, template_dir)
    raw = suite.text_generator.complete_text(prompt, stage="judge_text")
    parsed = parse_judge_scores(raw, JUDGE_TEXT_CRITERIA)
    for name in JUDGE_TEXT_CRITERIA:
        expected[name] = 1
        if parsed[name] is not None:
            scores[name].append(parsed[name])

    imaged = [s for s in bundle.steps if s.image is not None]
    for step in imaged:
        expected["t_i"] += 1
        prompt = render_prompt("judge_text_image", {"step_text": step.final_text},
                               template_dir)
        raw = suite.vision_interpreter.interpret_image(
            store.get(step.image.digest), prompt, stage="judge_text_image")
        value = parse_judge_scores(raw, ("score",))["score"]
        if value is not None:
            scores["t_i"].append(value)

    for prev, cur in zip(imaged, imaged[1:]):
        expected["i_i"] += 1
        prompt = render_prompt("judge_image_pair", {"step_text": cur.final_text},
                               template_dir)
        raw = suite.vision_interpreter.interpret_image(
            store.get(prev.image.digest), prompt,
            extra_images=(store.get(cur.image.digest),),
            stage="judge_image_pair")
        value = parse_judge_scores(raw, ("score",))["score"]
        if value is not None:
            scores["i_i"].append(value)

    means = {k: (float(np.mean(v)) if v else None) for k, v in scores.items()}
    coverage = {k: (len(scores[k]), expected[k]) for k in JUDGE_KEYS}
    return means, coverage


@dataclass
class TaskMetrics:
    """All per-task metric values for one bundle."""

    task_id: str
    method: str
    corpus: str
    bertscore: float
    rouge1: float
    rouge2: float
    rouge_l: float
    clip: float
    ppl: float | None
    judge: dict[str, float | None]
    judge_coverage: dict[str, tuple[int, int]]


def evaluate_bundle(bundle: PlanBundle, reference: ReferencePlan,
                    store: ImageStore, suite: BackendSuite,
                    clip_rectified: bool = True,
                    template_dir: Path | None = None) -> TaskMetrics:
    candidate = "\n".join(s.final_text for s in bundle.steps)
    ref_text = "\n".join(s.text for s in reference.steps)
    try:
        ppl = visual_coherence_ppl(bundle, store, suite.vision_interpreter,
                                   suite.token_scorer, template_dir)
    except FewerThanTwoImages:
        ppl = None
    judge, coverage = judge_plan(bundle, reference, store, suite, template_dir)
    return TaskMetrics(
        task_id=bundle.goal.id,
        method=bundle.method,
        corpus=bundle.goal.source,
        bertscore=bertscore_f1(candidate, ref_text, suite.embedder),
        rouge1=rouge_n(candidate, ref_text, 1),
        rouge2=rouge_n(candidate, ref_text, 2),
        rouge_l=rouge_l(candidate, ref_text),
        clip=plan_clip_score(bundle, store, suite.embedder, clip_rectified),
        ppl=ppl,
        judge=judge,
        judge_coverage=coverage,
    )


@dataclass
class MetricRow:
    """One aggregated (method, corpus) row with the twelve metric columns."""

    method: str
    corpus: str
    n_tasks: int
    bertscore: float
    rouge1: float
    rouge2: float
    rouge_l: float
    clip: float
    ppl: float | None
    judge: dict[str, float | None]
    coverage: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in (("rouge1", self.rouge1), ("rouge2", self.rouge2),
                            ("rouge_l", self.rouge_l)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} {value} outside [0, 1]")
        if not 0.0 <= self.clip <= 100.0:
            raise ValidationError(f"clip {self.clip} outside [0, 100]")
        if self.ppl is not None and self.ppl <= 0.0:
            raise ValidationError(f"ppl {self.ppl} must be positive")
        for key, value in self.judge.items():
            if value is not None and not 0.0 <= value <= 5.0:
                raise ValidationError(f"judge {key} {value} outside [0, 5]")

    def values_in_column_order(self) -> list[float | None]:
        return [self.bertscore, self.rouge1, self.rouge2, self.rouge_l,
                self.clip, self.ppl] + [self.judge.get(k) for k in JUDGE_KEYS]


@dataclass
class EvalReport:
    rows: list[MetricRow]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "columns": list(METRIC_COLUMNS),
            "rows": [
                {
                    "method": r.method,
                    "corpus": r.corpus,
                    "n_tasks": r.n_tasks,
                    "bertscore": r.bertscore,
                    "rouge1": r.rouge1,
                    "rouge2": r.rouge2,
                    "rouge_l": r.rouge_l,
                    "clip": r.clip,
                    "ppl": r.ppl,
                    "judge": r.judge,
                    "coverage": r.coverage,
                }
                for r in self.rows
            ],
        }

    def render_text(self) -> str:
        """Aligned plain-text table; ROUGE columns are reported x100."""
        header = ["Method", "Corpus", "N", *METRIC_COLUMNS]

        def fmt(row: MetricRow) -> list[str]:
            def cell(value: float | None, scale: float = 1.0, digits: int = 2) -> str:
                return "-" if value is None else f"{value * scale:.{digits}f}"

            return [
                row.method, row.corpus, str(row.n_tasks),
                cell(row.bertscore, digits=3),
                cell(row.rouge1, 100, 1), cell(row.rouge2, 100, 1),
                cell(row.rouge_l, 100, 1),
                cell(row.clip), cell(row.ppl),
                *[cell(row.judge.get(k)) for k in JUDGE_KEYS],
            ]

        table = [header] + [fmt(r) for r in self.rows]
        widths = [max(len(line[i]) for line in table) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip()
            for line in table)


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def load_external_rows(path: Path | str) -> list[MetricRow]:
    """Rows produced outside this harness (e.g. prior-work results) that a
    report should carry alongside its own; one JSON object per row with the
    same field names as `EvalReport.to_dict()` rows."""
    rows = []
    for d in json.loads(Path(path).read_text(encoding="utf-8")):
        judge = {k: d.get("judge", {}).get(k) for k in JUDGE_KEYS}
        rows.append(MetricRow(
            method=d["method"],
            corpus=d["corpus"],
            n_tasks=int(d.get("n_tasks", 0)),
            bertscore=float(d["bertscore"]),
            rouge1=float(d["rouge1"]),
            rouge2=float(d["rouge2"]),
            rouge_l=float(d["rouge_l"]),
            clip=float(d["clip"]),
            ppl=float(d["ppl"]) if d.get("ppl") is not None else None,
            judge=judge,
            coverage={"external": 1},
        ))
    return rows


def aggregate_report(bundles: list[tuple[PlanBundle, ImageStore]],
                     references: dict[str, ReferencePlan],
                     suite: BackendSuite,
                     clip_rectified: bool = True,
                     template_dir: Path | None = None) -> EvalReport:
    """Per-task metrics averaged into one row per (method, corpus)."""
    per_task: list[TaskMetrics] = []
    for bundle, store in bundles:
        if bundle.goal.id not in references:
            raise MissingReference(bundle.goal.id)
        per_task.append(evaluate_bundle(bundle, references[bundle.goal.id],
                                        store, suite, clip_rectified,
                                        template_dir))

    groups: dict[tuple[str, str], list[TaskMetrics]] = {}
    for tm in per_task:
        groups.setdefault((tm.method, tm.corpus), []).append(tm)

    rows = []
    for (method, corpus), tms in sorted(groups.items()):
        ppls = [tm.ppl for tm in tms if tm.ppl is not None]
        judge_means = {}
        for key in JUDGE_KEYS:
            values = [tm.judge[key] for tm in tms if tm.judge[key] is not None]
            judge_means[key] = _mean_or_none(values)
        rows.append(MetricRow(
            method=method,
            corpus=corpus,
            n_tasks=len(tms),
            bertscore=float(np.mean([tm.bertscore for tm in tms])),
            rouge1=float(np.mean([tm.rouge1 for tm in tms])),
            rouge2=float(np.mean([tm.rouge2 for tm in tms])),
            rouge_l=float(np.mean([tm.rouge_l for tm in tms])),
            clip=float(np.mean([tm.clip for tm in tms])),
            ppl=_mean_or_none(ppls),
            judge=judge_means,
            coverage={"ppl_tasks": len(ppls)},
        ))
    metadata = {
        "created_at": utc_now_iso(),
        "backend_fingerprint": suite.fingerprint,
        "bertscore_variant": "greedy-cosine, no idf, no baseline rescaling",
        "clip_rectified": clip_rectified,
        "rouge_scale_in_text_table": 100,
    }
    return EvalReport(rows=rows, metadata=metadata)
