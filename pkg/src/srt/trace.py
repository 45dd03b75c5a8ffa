"""Grammar, validation, and extraction for <HIS>-tagged reasoning traces.

The grammar is a single tag pair. A trace is reasoning text in which any
number of ``<HIS>...</HIS>`` regions quote historical turns; a region is
split into citations at marker boundaries (``Qk:``, ``Ak:``, ``Turn n:``).
The final answer follows the last answer delimiter (default ``Answer:``)
found outside any tag region; the delimiter must start a line or follow
whitespace, so it never matches inside a word.

``validate_format`` is total: any text, including adversarial tag soup,
yields a verdict rather than an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .core import Citation, Marker, ReasoningTrace
from .errors import MalformedAnnotation, PreconditionViolated

OPEN_TAG = "<HIS>"
CLOSE_TAG = "</HIS>"
DEFAULT_ANSWER_DELIMITER = "Answer:"

_TAG_RE = re.compile(r"</?HIS>")
# Marker at a segment start: start-of-content or preceded by whitespace.
_MARKER_RE = re.compile(r"(?:^|(?<=\s))(?:(?P<qa>[QA])(?P<qak>\d+)|Turn (?P<turnk>\d+)):")


class ViolationCode(str, Enum):
    UNCLOSED_TAG = "UNCLOSED_TAG"
    UNOPENED_CLOSE = "UNOPENED_CLOSE"
    NESTED_TAG = "NESTED_TAG"
    EMPTY_CITATION = "EMPTY_CITATION"
    TAG_IN_ANSWER = "TAG_IN_ANSWER"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    span: tuple[int, int]


@dataclass(frozen=True)
class FormatVerdict:
    valid: bool
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class _Region:
    """A well-formed tag pair: absolute offsets of the tags and the content between them."""

    open_start: int
    content_start: int
    content_end: int
    close_end: int


def _answer_pattern(answer_delimiter: str) -> re.Pattern:
    return re.compile(r"(?:^|(?<=\s))" + re.escape(answer_delimiter))


def _scan(raw: str, answer_delimiter: str):
    """Single pass over the text: well-formed regions, violations, answer span.

    Returns (regions, violations, answer_span) where answer_span is the
    (start, end) of the last delimiter occurrence outside any region, or None.
    """
    regions: list[_Region] = []
    violations: list[Violation] = []
    open_start: int | None = None

    for m in _TAG_RE.finditer(raw):
        if m.group() == OPEN_TAG:
            if open_start is None:
                open_start = m.start()
            else:
                violations.append(Violation(ViolationCode.NESTED_TAG, (m.start(), m.end())))
        else:
            if open_start is None:
                violations.append(Violation(ViolationCode.UNOPENED_CLOSE, (m.start(), m.end())))
            else:
                content_start = open_start + len(OPEN_TAG)
                if not raw[content_start : m.start()].strip():
                    violations.append(
                        Violation(ViolationCode.EMPTY_CITATION, (open_start, m.end()))
                    )
                regions.append(_Region(open_start, content_start, m.start(), m.end()))
                open_start = None
    if open_start is not None:
        violations.append(
            Violation(ViolationCode.UNCLOSED_TAG, (open_start, open_start + len(OPEN_TAG)))
        )

    answer_span: tuple[int, int] | None = None
    for m in _answer_pattern(answer_delimiter).finditer(raw):
        inside = any(r.content_start <= m.start() < r.content_end for r in regions)
        if not inside:
            answer_span = (m.start(), m.end())

    if answer_span is not None:
        for m in _TAG_RE.finditer(raw, answer_span[1]):
            violations.append(Violation(ViolationCode.TAG_IN_ANSWER, (m.start(), m.end())))

    return regions, violations, answer_span


def validate_format(raw: str, answer_delimiter: str = DEFAULT_ANSWER_DELIMITER) -> FormatVerdict:
    """Check structural validity of a trace. Never raises."""
    _, violations, _ = _scan(raw, answer_delimiter)
    return FormatVerdict(valid=not violations, violations=tuple(violations))


def _region_citations(raw: str, region: _Region) -> list[Citation]:
    content = raw[region.content_start : region.content_end]
    matches = list(_MARKER_RE.finditer(content))
    base = region.content_start
    citations: list[Citation] = []

    if not matches:
        quoted = content.strip()
        if quoted:
            citations.append(
                Citation(quoted_text=quoted, span=(region.content_start, region.content_end))
            )
        return citations

    lead = content[: matches[0].start()]
    if lead.strip():
        citations.append(
            Citation(quoted_text=lead.strip(), span=(base, base + matches[0].start()))
        )
    for i, m in enumerate(matches):
        seg_end = matches[i + 1].start() if i + 1 < len(matches) else len(content)
        if m.group("qa"):
            marker = Marker(kind=m.group("qa"), k=int(m.group("qak")))
        else:
            marker = Marker(kind="TURN", k=int(m.group("turnk")))
        citations.append(
            Citation(
                quoted_text=content[m.end() : seg_end].strip(),
                span=(base + m.start(), base + seg_end),
                marker=marker,
            )
        )
    return citations


def _extract(raw: str, regions: list[_Region], answer_span) -> ReasoningTrace:
    if answer_span is not None:
        answer = raw[answer_span[1] :].strip()
        reasoning_end = answer_span[0]
    else:
        answer = ""
        reasoning_end = len(raw)

    citations: list[Citation] = []
    steps: list[str] = []
    cursor = 0
    for region in regions:
        if region.open_start >= reasoning_end:
            continue
        gap = raw[cursor : region.open_start].strip()
        if gap:
            steps.append(gap)
        citations.extend(_region_citations(raw, region))
        cursor = region.close_end
    tail = raw[cursor:reasoning_end].strip()
    if tail:
        steps.append(tail)

    return ReasoningTrace(
        raw=raw, steps=tuple(steps), citations=tuple(citations), answer=answer
    )


def parse_trace(raw: str, answer_delimiter: str = DEFAULT_ANSWER_DELIMITER) -> ReasoningTrace:
    """Parse a structurally valid trace into steps, citations, and answer.

    Citations come out in textual order of their tag openings. Raises
    PreconditionViolated when the trace fails validate_format.
    """
    regions, violations, answer_span = _scan(raw, answer_delimiter)
    if violations:
        codes = sorted({v.code.value for v in violations})
        raise PreconditionViolated(f"trace is not format-valid: {', '.join(codes)}")
    return _extract(raw, regions, answer_span)


def parse_trace_lenient(
    raw: str, answer_delimiter: str = DEFAULT_ANSWER_DELIMITER
) -> ReasoningTrace:
    """Best-effort parse of arbitrary text: malformed regions are ignored.

    Stray opens/closes and regions after the answer delimiter contribute no
    citations; well-formed regions are extracted as usual.
    """
    regions, _, answer_span = _scan(raw, answer_delimiter)
    return _extract(raw, regions, answer_span)


# --- Teacher annotations -----------------------------------------------------
# The teacher replies in three sections; recall lines name turns by flat index:
#
#   RECALL:
#   Turn 2: 'the order number is 118'
#   REASONING:
#   ... <HIS>Turn 2: 'the order number is 118'</HIS> ...
#   ANSWER:
#   118

SECTION_HEADERS = ("RECALL:", "REASONING:", "ANSWER:")
_RECALL_LINE_RE = re.compile(r"Turn (\d+): '(.*)'\s*$")


@dataclass(frozen=True)
class AnnotationTriplet:
    """Gold recall set, <HIS>-tagged reasoning, and reference answer for one query turn."""

    gold_recall: frozenset[int]
    reasoning: str
    answer: str


def _split_sections(raw: str) -> dict[str, str]:
    lines = raw.splitlines()
    starts: dict[str, tuple[int, str]] = {}
    for i, line in enumerate(lines):
        stripped = line.strip()
        for header in SECTION_HEADERS:
            if stripped.startswith(header) and header not in starts:
                starts[header] = (i, stripped[len(header) :].strip())
    for header in SECTION_HEADERS:
        if header not in starts:
            raise MalformedAnnotation(f"missing section {header!r}")
    order = sorted(starts, key=lambda h: starts[h][0])
    if order != list(SECTION_HEADERS):
        raise MalformedAnnotation(f"sections out of order: {order}")

    sections: dict[str, str] = {}
    boundaries = [starts[h][0] for h in SECTION_HEADERS] + [len(lines)]
    for pos, header in enumerate(SECTION_HEADERS):
        body = lines[boundaries[pos] + 1 : boundaries[pos + 1]]
        inline = starts[header][1]
        parts = ([inline] if inline else []) + body
        sections[header] = "\n".join(parts).strip()
    return sections


def parse_teacher_annotation(raw: str) -> AnnotationTriplet:
    """Parse a sectioned teacher response into an AnnotationTriplet.

    Raises MalformedAnnotation naming the first offense: a missing or
    out-of-order section, a recall line that fails ``Turn X: 'content'``,
    or reasoning that fails the trace grammar.
    """
    sections = _split_sections(raw)

    indices: list[int] = []
    for line in sections["RECALL:"].splitlines():
        line = line.strip()
        if not line:
            continue
        m = _RECALL_LINE_RE.match(line)
        if not m or int(m.group(1)) < 1:
            raise MalformedAnnotation(f"bad recall line: {line!r}")
        indices.append(int(m.group(1)))

    reasoning = sections["REASONING:"]
    verdict = validate_format(reasoning)
    if not verdict.valid:
        codes = sorted({v.code.value for v in verdict.violations})
        raise MalformedAnnotation(f"reasoning fails the trace grammar: {', '.join(codes)}")

    return AnnotationTriplet(
        gold_recall=frozenset(indices),
        reasoning=reasoning,
        answer=sections["ANSWER:"],
    )


# --- JSONL record codecs -----------------------------------------------------
# Trace record: {"dialogue_id": str, "t": int, "raw": str}
# Annotation record: {"dialogue_id": str, "t": int, "gold_recall": [int],
#                     "reasoning": str, "answer": str}


def annotation_from_record(record: dict) -> tuple[str, int, AnnotationTriplet]:
    triplet = AnnotationTriplet(
        gold_recall=frozenset(int(i) for i in record["gold_recall"]),
        reasoning=str(record["reasoning"]),
        answer=str(record["answer"]),
    )
    return str(record["dialogue_id"]), int(record["t"]), triplet


def annotation_to_record(dialogue_id: str, t: int, triplet: AnnotationTriplet) -> dict:
    return {
        "dialogue_id": dialogue_id,
        "t": t,
        "gold_recall": sorted(triplet.gold_recall),
        "reasoning": triplet.reasoning,
        "answer": triplet.answer,
    }
