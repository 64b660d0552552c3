"""The autoregressive generation loop and its baseline/ablation variants.

Each iteration of the main method runs four stages: draft the next textual
step from the goal and history, synthesize the step image conditioned on the
previous image, extract structured visual information from that image, and
refine the draft with it. The refined text and new image feed the next
iteration. Variant methods rewire or drop stages; each produces a distinct
(role, stage) call-trace signature so runs can be audited from provenance
alone.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .backends.base import BackendSuite, ProvenanceLog
from .errors import MissingSection, MPlanError, NoStepHeader, TaskFailed, ValidationError
from .plan_model import (ImageRef, ImageStore, METHODS, PlanBundle, PlanStep,
                         TaskGoal, utc_now_iso)
from .ppddl import PPDDLRecord, parse_ppddl, serialize_ppddl
from .prompting import (DraftParse, build_history, parse_draft_response,
                        parse_plan_response, render_prompt, render_template)

FORMAT_REMINDER = (
    "\n\nReminder: respond exactly in the format STEP [k]: [Step Title] "
    "[step descriptions], then YES or NO on its own line.")

# Expected per-step (role, stage) call signatures, used by trace audits.
VARIANT_STEP_TRACE = {
    "ours": (("text_generator", "draft"), ("image_synthesizer", "synthesize"),
             ("vision_interpreter", "extract"), ("text_generator", "refine")),
    "vanilla": (("image_synthesizer", "synthesize"),),
    "sd_first": (("image_synthesizer", "synthesize"),
                 ("vision_interpreter", "describe")),
    "w_des": (("text_generator", "draft"), ("image_synthesizer", "synthesize"),
              ("vision_interpreter", "describe"), ("text_generator", "refine")),
    "w_img": (("text_generator", "draft"), ("image_synthesizer", "synthesize"),
              ("vision_interpreter", "refine_with_image")),
    "ppddl_to_nl": (("text_generator", "draft_ppddl"),
                    ("image_synthesizer", "synthesize"),
                    ("vision_interpreter", "describe"),
                    ("text_generator", "translate")),
}
VARIANT_PREFIX_TRACE = {
    "vanilla": (("text_generator", "draft_plan"),),
}


def expected_trace(method: str, n_steps: int) -> tuple[tuple[str, str], ...]:
    """The full (role, stage) sequence a clean n-step run must produce."""
    return (VARIANT_PREFIX_TRACE.get(method, ())
            + VARIANT_STEP_TRACE[method] * n_steps)


@dataclass(frozen=True)
class MethodConfig:
    """Which variant to run and how the loop terminates."""

    method: str = "ours"
    max_steps: int = 12
    min_steps: int = 1
    seed: int = 0
    image_at_first_step: bool = True
    template_dir: Path | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if not (1 <= self.min_steps <= self.max_steps <= 50):
            raise ValidationError("need 1 <= min_steps <= max_steps <= 50")


# --- individual stages ---

def draft_step(goal: TaskGoal, history: list[str], suite: BackendSuite, k: int,
               template_dir: Path | None = None, template: str = "draft",
               stage: str = "draft") -> DraftParse:
    """Stage 1: draft step k from the goal and the k-1 prior final texts."""
    if len(history) != k - 1:
        raise ValidationError(f"history length {len(history)} != k-1 for k={k}")
    ctx = {"goal": goal.goal_text, "history": build_history(history), "k": k}
    prompt = render_template(template, ctx, template_dir)
    raw = suite.text_generator.complete_text(prompt, stage=stage)
    try:
        return parse_draft_response(raw, expected_k=k)
    except NoStepHeader:
        raw = suite.text_generator.complete_text(prompt + FORMAT_REMINDER, stage=stage)
        return parse_draft_response(raw, expected_k=k)


def synthesize_step_image(draft_text: str, prev_image: str | None,
                          suite: BackendSuite, store: ImageStore,
                          template_dir: Path | None = None) -> ImageRef:
    """Stage 2: synthesize the step image, conditioned on the previous one."""
    prompt = render_prompt("image_synthesis", {"draft": draft_text}, template_dir)
    base = store.get(prev_image) if prev_image is not None else None
    data = suite.image_synthesizer.synthesize_image(prompt, base=base,
                                                    stage="synthesize")
    return store.put(data)


def extract_visual_info(image: ImageRef, goal: TaskGoal, suite: BackendSuite,
                        store: ImageStore, template_dir: Path | None = None,
                        ) -> tuple[PPDDLRecord, bool]:
    """Stage 3: structured extraction; degrades to an empty record on failure."""
    prompt = render_prompt("visual_extraction", {"goal": goal.goal_text},
                           template_dir)
    data = store.get(image.digest)
    for attempt in range(2):
        raw = suite.vision_interpreter.interpret_image(data, prompt, stage="extract")
        try:
            return parse_ppddl(raw), False
        except MissingSection:
            if attempt == 0:
                continue
    return PPDDLRecord(goal=goal.goal_text), True


def refine_step(draft_text: str, visual_info: str, goal: TaskGoal,
                suite: BackendSuite, template_dir: Path | None = None,
                template: str = "refinement", stage: str = "refine",
                ) -> tuple[str, bool]:
    """Stage 4: rewrite the draft with the extracted visual information.

    An empty response keeps the draft and flags the step instead of failing.
    """
    ctx = {"goal": goal.goal_text, "draft": draft_text, "visual_info": visual_info}
    prompt = render_template(template, ctx, template_dir)
    raw = suite.text_generator.complete_text(prompt, stage=stage).strip()
    if not raw:
        return draft_text, True
    return raw, False


def describe_image(image: ImageRef, goal: TaskGoal, suite: BackendSuite,
                   store: ImageStore, template_dir: Path | None = None) -> str:
    """Free-prose image description (ablations and the coherence metric)."""
    prompt = render_template("describe", {"goal": goal.goal_text}, template_dir)
    return suite.vision_interpreter.interpret_image(store.get(image.digest), prompt,
                                                    stage="describe")


# --- method variants ---

def _finish_bundle(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
                   steps: list[PlanStep], terminated: bool) -> PlanBundle:
    flags = () if terminated else ("unterminated",)
    return PlanBundle(
        goal=goal,
        method=cfg.method,
        steps=tuple(steps),
        backend_fingerprint=suite.fingerprint,
        seed=cfg.seed,
        created_at=utc_now_iso(),
        flags=flags,
    )


def run_task(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
             store: ImageStore) -> PlanBundle:
    """The main iterative method: stages 1→2→3→4 per step, feeding forward."""
    log = ProvenanceLog()
    scoped = suite.with_log(log)
    steps: list[PlanStep] = []
    history: list[str] = []
    prev_digest: str | None = None
    terminated = False
    tdir = cfg.template_dir
    for k in range(1, cfg.max_steps + 1):
        mark = log.mark()
        skip_image = k == 1 and not cfg.image_at_first_step
        try:
            draft = draft_step(goal, history, scoped, k, tdir)
            if skip_image:
                image, record, degraded = None, PPDDLRecord(goal=goal.goal_text), False
            else:
                image = synthesize_step_image(draft.body, prev_digest, scoped,
                                              store, tdir)
                record, degraded = extract_visual_info(image, goal, scoped, store, tdir)
            final, noop = refine_step(draft.body, serialize_ppddl(record), goal,
                                      scoped, tdir)
        except MPlanError as exc:
            raise TaskFailed(k, exc) from exc
        flags = tuple(f for f, on in (("no_first_image", skip_image),
                                      ("extraction_degraded", degraded),
                                      ("refinement_noop", noop)) if on)
        steps.append(PlanStep(
            index=k, draft_text=draft.body, final_text=final, visual_info=record,
            image=image, provenance=log.since(mark),
            goal_achieved_flag=draft.goal_achieved, flags=flags))
        history.append(final)
        prev_digest = image.digest if image is not None else prev_digest
        if draft.goal_achieved and k >= cfg.min_steps:
            terminated = True
            break
    return _finish_bundle(goal, cfg, suite, steps, terminated)


def _run_vanilla(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
                 store: ImageStore) -> PlanBundle:
    # One-shot textual plan, then unconditioned text-to-image per parsed step.
    log = ProvenanceLog()
    scoped = suite.with_log(log)
    tdir = cfg.template_dir
    prompt = render_template("draft_full_plan", {"goal": goal.goal_text}, tdir)
    try:
        raw = scoped.text_generator.complete_text(prompt, stage="draft_plan")
        parsed = parse_plan_response(raw)
    except MPlanError as exc:
        raise TaskFailed(1, exc) from exc
    plan_prov = log.entries()
    steps: list[PlanStep] = []
    for k, dp in enumerate(parsed[: cfg.max_steps], start=1):
        mark = log.mark()
        try:
            image = synthesize_step_image(dp.body, None, scoped, store, tdir)
        except MPlanError as exc:
            raise TaskFailed(k, exc) from exc
        prov = log.since(mark)
        if k == 1:
            prov = plan_prov + prov
        steps.append(PlanStep(index=k, draft_text=dp.body, final_text=dp.body,
                              image=image, provenance=prov))
    return _finish_bundle(goal, cfg, suite, steps, terminated=True)


def _run_sd_first(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
                  store: ImageStore) -> PlanBundle:
    # Image-only generation from the goal each turn; the interpreter then
    # narrates each image to form the textual plan. No drafting calls.
    log = ProvenanceLog()
    scoped = suite.with_log(log)
    tdir = cfg.template_dir
    steps: list[PlanStep] = []
    for k in range(1, cfg.max_steps + 1):
        mark = log.mark()
        try:
            image = synthesize_step_image(f"{goal.goal_text} (step {k})", None,
                                          scoped, store, tdir)
            text = describe_image(image, goal, scoped, store, tdir).strip()
        except MPlanError as exc:
            raise TaskFailed(k, exc) from exc
        steps.append(PlanStep(index=k, draft_text="", final_text=text or f"Step {k}.",
                              image=image, provenance=log.since(mark)))
    return _finish_bundle(goal, cfg, suite, steps, terminated=True)


def _run_ablation(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
                  store: ImageStore) -> PlanBundle:
    # Shared chassis for the three stage-rewiring ablations.
    log = ProvenanceLog()
    scoped = suite.with_log(log)
    tdir = cfg.template_dir
    steps: list[PlanStep] = []
    history: list[str] = []
    prev_digest: str | None = None
    terminated = False
    draft_template = "draft_ppddl" if cfg.method == "ppddl_to_nl" else "draft"
    draft_stage = "draft_ppddl" if cfg.method == "ppddl_to_nl" else "draft"
    for k in range(1, cfg.max_steps + 1):
        mark = log.mark()
        flags: tuple[str, ...] = ()
        try:
            draft = draft_step(goal, history, scoped, k, tdir,
                               template=draft_template, stage=draft_stage)
            image = synthesize_step_image(draft.body, prev_digest, scoped, store, tdir)
            if cfg.method == "w_img":
                prompt = render_template(
                    "refine_with_image",
                    {"goal": goal.goal_text, "draft": draft.body}, tdir)
                final = scoped.vision_interpreter.interpret_image(
                    store.get(image.digest), prompt,
                    stage="refine_with_image").strip()
                if not final:
                    final, flags = draft.body, ("refinement_noop",)
            else:
                description = describe_image(image, goal, scoped, store, tdir)
                template = ("translate_to_nl" if cfg.method == "ppddl_to_nl"
                            else "refinement")
                stage = "translate" if cfg.method == "ppddl_to_nl" else "refine"
                final, noop = refine_step(draft.body, description, goal, scoped,
                                          tdir, template=template, stage=stage)
                if noop:
                    flags = ("refinement_noop",)
        except MPlanError as exc:
            raise TaskFailed(k, exc) from exc
        steps.append(PlanStep(
            index=k, draft_text=draft.body, final_text=final, visual_info=None,
            image=image, provenance=log.since(mark),
            goal_achieved_flag=draft.goal_achieved, flags=flags))
        history.append(final)
        prev_digest = image.digest
        if draft.goal_achieved and k >= cfg.min_steps:
            terminated = True
            break
    return _finish_bundle(goal, cfg, suite, steps, terminated)


def run_variant(goal: TaskGoal, cfg: MethodConfig, suite: BackendSuite,
                store: ImageStore) -> PlanBundle:
    """Dispatch over the six method variants."""
    if cfg.method == "ours":
        return run_task(goal, cfg, suite, store)
    if cfg.method == "vanilla":
        return _run_vanilla(goal, cfg, suite, store)
    if cfg.method == "sd_first":
        return _run_sd_first(goal, cfg, suite, store)
    return _run_ablation(goal, cfg, suite, store)


def run_batch(goals: list[TaskGoal], cfg: MethodConfig, suite: BackendSuite,
              store: ImageStore, workers: int = 4,
              ) -> list[tuple[TaskGoal, PlanBundle | Exception]]:
    """Run many tasks in parallel; the per-task loop itself stays sequential."""

    def one(goal: TaskGoal):
        try:
            return goal, run_variant(goal, cfg, suite, store)
        except Exception as exc:
            return goal, exc

    if workers <= 1:
        return [one(g) for g in goals]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, goals))
