"""Parser, serializer, and validator for the structured visual-information format.

A record has four labeled sections (OBJECTS, TOOLS, ACTIONS, GOAL). The three
list sections hold noun/verb phrases; GOAL is a single sentence. The surface
format is what vision models are prompted to emit, so the parser tolerates the
usual drift: case differences, bullets, bracket echoes, semicolons, stray
blank lines, and extra unlabeled prose before or between sections.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MissingSection, ValidationError

SECTION_NAMES = ("OBJECTS", "TOOLS", "ACTIONS", "GOAL")

_HEADER_RE = re.compile(
    r"^\s*(?:[-*•]\s*|\d+[.)]\s*)?(?:\*\*)?(objects|tools|actions|goal)"
    r"(?:\*\*)?\s*:\s*(.*)$",
    re.IGNORECASE,
)
# Unknown sections ("CONFIDENCE: high") end the current section instead of
# being absorbed into it: a short word-run followed by a colon looks like a
# label, not like list or goal content.
_UNKNOWN_HEADER_RE = re.compile(r"^\s*(?:\*\*)?[A-Za-z][A-Za-z_\- ]{0,24}(?:\*\*)?:\s*")
_BULLET_RE = re.compile(r"^(?:[-*•]+|\d+[.)])\s+")
_WS_RE = re.compile(r"\s+")


def _strip_wrap(text: str) -> str:
    # Drop one "[...]" wrap when the opening bracket closes at the very end,
    # as in models echoing the prompt's "[object list]" placeholders.
    while len(text) >= 2 and text[0] == "[" and text[-1] == "]":
        depth = 0
        for i, ch in enumerate(text):
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    break
        if i != len(text) - 1:
            return text
        text = text[1:-1].strip()
    return text


def _normalize(phrase: str) -> str:
    phrase = _WS_RE.sub(" ", phrase).strip()
    while True:
        stripped = _strip_wrap(_BULLET_RE.sub("", phrase)).strip()
        if stripped == phrase:
            return phrase
        phrase = stripped


@dataclass(frozen=True)
class PPDDLRecord:
    """Structured visual information extracted from one generated image.

    Elements are whitespace-normalized at construction. Commas and semicolons
    are the list delimiters of the surface format, so list elements may not
    contain them; the literal "none" is reserved for empty lists.
    """

    objects: tuple[str, ...] = ()
    tools: tuple[str, ...] = ()
    actions: tuple[str, ...] = ()
    goal: str = ""

    def __post_init__(self):
        goal = _normalize(self.goal)
        if not goal:
            raise ValidationError("ppddl record requires a non-empty goal")
        object.__setattr__(self, "goal", goal)
        for name in ("objects", "tools", "actions"):
            normalized = []
            for item in getattr(self, name):
                item = _normalize(item)
                if not item:
                    raise ValidationError(f"{name} contains an empty element")
                if "," in item or ";" in item or "\n" in item:
                    raise ValidationError(
                        f"{name} element {item!r} contains a list delimiter")
                if item.lower() == "none":
                    raise ValidationError(f"{name} may not contain the literal 'none'")
                normalized.append(item)
            object.__setattr__(self, name, tuple(normalized))


def _split_list(raw: str) -> tuple[str, ...]:
    # Semicolons and newline bullets are normalized to commas before splitting.
    text = _strip_wrap(raw.strip()).replace(";", ",").replace("\n", ",")
    items = []
    for part in text.split(","):
        part = _normalize(part)
        if part and part.lower() != "none":
            items.append(part)
    return tuple(items)


def parse_ppddl(text: str) -> PPDDLRecord:
    """Extract the four labeled sections from a raw model response.

    Headers match case-insensitively; sections absent from the response
    default to empty lists. List sections split on commas (with semicolons
    and bullet lines normalized first) and a literal "none" yields an empty
    list. Raises MissingSection("GOAL") when no goal can be recovered.
    """
    sections: dict[str, list[str]] = {}
    current: str | None = None
    found_any = False
    for line in text.splitlines():
        m = _HEADER_RE.match(line)
        if m:
            current = m.group(1).upper()
            found_any = True
            sections.setdefault(current, [])
            rest = m.group(2).strip()
            if rest:
                sections[current].append(rest)
                if current == "GOAL":
                    # The goal is one statement; later prose is chatter.
                    current = None
        elif _UNKNOWN_HEADER_RE.match(line):
            current = None
        elif current is not None and line.strip():
            sections[current].append(line.strip())
            if current == "GOAL":
                current = None

    if not found_any:
        raise MissingSection("GOAL")
    goal = _normalize(" ".join(sections.get("GOAL", ())))
    if not goal:
        raise MissingSection("GOAL")

    def listed(name: str) -> tuple[str, ...]:
        return _split_list("\n".join(sections.get(name, ())))

    return PPDDLRecord(
        objects=listed("OBJECTS"),
        tools=listed("TOOLS"),
        actions=listed("ACTIONS"),
        goal=goal,
    )


def serialize_ppddl(rec: PPDDLRecord) -> str:
    """Emit the canonical four-section text form.

    Sections appear in OBJECTS, TOOLS, ACTIONS, GOAL order; empty lists
    serialize as "none". parse_ppddl(serialize_ppddl(r)) == r for every
    constructible record, and equal records produce byte-equal text.
    """
    if not rec.goal.strip():
        raise ValidationError("cannot serialize a record with an empty goal")

    def joined(items: tuple[str, ...]) -> str:
        return ", ".join(items) if items else "none"

    return (
        f"OBJECTS: {joined(rec.objects)}\n"
        f"TOOLS: {joined(rec.tools)}\n"
        f"ACTIONS: {joined(rec.actions)}\n"
        f"GOAL: {rec.goal}"
    )
