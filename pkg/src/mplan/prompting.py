"""Prompt rendering for every pipeline stage and judge, plus response parsers.

Templates live as text assets under `mplan/templates/` with `{{name}}`
placeholders, so backbone-specific wording tweaks are configuration rather
than code changes. Rendering is byte-deterministic given (template, context).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MissingPlaceholder, NoStepHeader, ValidationError

# The seven canonical prompt kinds: four pipeline stages plus three judges.
PROMPT_KINDS = (
    "draft",
    "image_synthesis",
    "visual_extraction",
    "refinement",
    "judge_text",
    "judge_image_pair",
    "judge_text_image",
)

# Additional assets used by baselines, ablations, and the coherence metric.
AUX_TEMPLATES = (
    "describe",
    "draft_full_plan",
    "draft_ppddl",
    "refine_with_image",
    "translate_to_nl",
)

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")
_TEMPLATE_CACHE: dict[str, str] = {}


def _load_template(name: str, template_dir: Path | None = None) -> str:
    if template_dir is not None:
        return (template_dir / f"{name}.txt").read_text(encoding="utf-8")
    if name not in _TEMPLATE_CACHE:
        ref = resources.files("mplan").joinpath("templates", f"{name}.txt")
        _TEMPLATE_CACHE[name] = ref.read_text(encoding="utf-8")
    return _TEMPLATE_CACHE[name]


def render_template(name: str, ctx: dict[str, object],
                    template_dir: Path | None = None) -> str:
    """Substitute {{placeholders}} in the named template asset."""
    template = _load_template(name, template_dir)

    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key not in ctx:
            raise MissingPlaceholder(key)
        return str(ctx[key])

    return _PLACEHOLDER_RE.sub(sub, template).rstrip("\n")


def render_prompt(kind: str, ctx: dict[str, object],
                  template_dir: Path | None = None) -> str:
    """Render one of the seven canonical prompt kinds."""
    if kind not in PROMPT_KINDS:
        raise ValidationError(f"unknown prompt kind {kind!r}")
    return render_template(kind, ctx, template_dir)


def build_history(prior_texts: list[str] | tuple[str, ...]) -> str:
    """Concatenate prior final step texts as "STEP i: <text>" lines."""
    return "\n".join(f"STEP {i}: {t}" for i, t in enumerate(prior_texts, start=1))


# --- response parsing ---

@dataclass(frozen=True)
class DraftParse:
    """Structured view of a drafting response."""

    step_index: int
    title: str
    body: str
    goal_achieved: bool

    def __post_init__(self):
        if self.step_index < 1:
            raise ValidationError("step index must be >= 1")
        if not self.body.strip():
            raise ValidationError("draft body must be non-empty")


_STEP_HEADER_RE = re.compile(r"^\s*(?:\*\*|#+\s*)?STEP\s*\[?\s*(\d+)\s*\]?\s*[:.]\s*(.*)$",
                             re.IGNORECASE)
_ACHIEVED_RE = re.compile(
    r"^\s*(?:goal\s+achieved\s*[:\-]?\s*)?\[?\s*(yes|no)\s*\]?\s*[.!]?\s*$",
    re.IGNORECASE)
_BRACKET_TITLE_RE = re.compile(r"^\[([^\]]*)\]\s*(.*)$")


def _split_header_remainder(remainder: str) -> tuple[str, str]:
    # "[Step Title] [descriptions]" on one line, or a bare title.
    m = _BRACKET_TITLE_RE.match(remainder.strip())
    if m:
        title = m.group(1).strip()
        inline = m.group(2).strip()
        if inline.startswith("[") and inline.endswith("]"):
            inline = inline[1:-1].strip()
        return title, inline
    return remainder.strip(), ""


def parse_draft_response(text: str, expected_k: int) -> DraftParse:
    """Parse a "STEP [k]: title / body / YES|NO" drafting response.

    Tolerates missing brackets and an index that disagrees with expected_k
    (the stated index is recorded). goal_achieved is true iff a standalone
    YES marker appears after the body; absent markers default to false.
    """
    lines = text.splitlines()
    header_at = None
    stated_index = expected_k
    title = ""
    inline_body = ""
    for i, line in enumerate(lines):
        m = _STEP_HEADER_RE.match(line)
        if m:
            header_at = i
            stated_index = int(m.group(1))
            title, inline_body = _split_header_remainder(m.group(2))
            break
    if header_at is None:
        raise NoStepHeader(f"no STEP header in response ({text[:60]!r}...)")

    body_lines = [inline_body] if inline_body else []
    achieved = False
    for line in lines[header_at + 1:]:
        m = _ACHIEVED_RE.match(line)
        if m:
            achieved = m.group(1).lower() == "yes"
            break
        if line.strip():
            body_lines.append(line.strip())
    body = "\n".join(body_lines).strip()
    if not body:
        body = title
    return DraftParse(step_index=max(stated_index, 1), title=title, body=body,
                      goal_achieved=achieved)


def parse_plan_response(text: str) -> list[DraftParse]:
    """Parse a one-shot whole-plan response into its ordered steps."""
    lines = text.splitlines()
    headers: list[tuple[int, int, str]] = []
    for i, line in enumerate(lines):
        m = _STEP_HEADER_RE.match(line)
        if m:
            headers.append((i, int(m.group(1)), m.group(2)))
    if not headers:
        raise NoStepHeader("no STEP headers in plan response")
    steps = []
    for pos, (line_no, _, remainder) in enumerate(headers):
        end = headers[pos + 1][0] if pos + 1 < len(headers) else len(lines)
        title, inline_body = _split_header_remainder(remainder)
        body_lines = [inline_body] if inline_body else []
        for line in lines[line_no + 1:end]:
            if _ACHIEVED_RE.match(line):
                continue
            if line.strip():
                body_lines.append(line.strip())
        body = "\n".join(body_lines).strip() or title
        steps.append(DraftParse(step_index=pos + 1, title=title, body=body,
                                goal_achieved=False))
    return steps


_INT_RE = re.compile(r"\d+")


def parse_judge_scores(text: str, expected_criteria: list[str] | tuple[str, ...],
                       ) -> dict[str, int | None]:
    """Extract one 1..5 integer per criterion from a judge response.

    For each criterion, the first integer in range on or after the line that
    names it wins. Criteria that never yield an in-range integer map to None;
    returned scores never leave 1..5.
    """
    if not expected_criteria:
        raise ValidationError("expected_criteria must be non-empty")
    lines = text.splitlines()
    lowered = [line.lower() for line in lines]
    result: dict[str, int | None] = {}
    for criterion in expected_criteria:
        needle = criterion.lower()
        score: int | None = None
        start = offset = None
        for i, line in enumerate(lowered):
            pos = line.find(needle)
            if pos >= 0:
                start = i
                offset = pos + len(needle)
                break
        if start is not None:
            for i, line in enumerate(lines[start:]):
                # On the naming line itself, only integers after the name count
                # (skips enumeration markers like "1. Correctness: 5").
                haystack = line[offset:] if i == 0 else line
                for m in _INT_RE.finditer(haystack):
                    value = int(m.group(0))
                    if 1 <= value <= 5:
                        score = value
                        break
                if score is not None:
                    break
        result[criterion] = score
    return result
