"""Map parsed citations to history turns, producing the predicted recall set.

A citation with a marker that resolves under the round mapping is pinned to
that turn regardless of its text. Otherwise the citation text is matched
against every history turn by maximal normalized overlap (token Jaccard),
accepted only when the best score clears the match threshold; ties break
toward the earliest turn.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Citation, ReasoningTrace, Turn, normalize_text, resolve_marker, tokenize


@dataclass(frozen=True)
class CitationAlignment:
    citation_ordinal: int  # 1-based position of the recall action in the trace
    resolved: int | None
    score: float


@dataclass(frozen=True)
class AlignmentResult:
    per_citation: tuple[CitationAlignment, ...]
    predicted: frozenset[int]


def overlap_score(cited: str, utterance: str) -> float:
    """Token-set Jaccard over normalized texts; both-empty counts as 0."""
    a = set(tokenize(normalize_text(cited)))
    b = set(tokenize(normalize_text(utterance)))
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def _check_threshold(tau_match: float) -> None:
    if not 0.0 < tau_match <= 1.0:
        raise ValueError(f"tau_match must be in (0, 1], got {tau_match}")


def _best_match(quoted: str, history) -> tuple[int | None, float]:
    best_index: int | None = None
    best_score = -1.0
    for turn in history:
        score = overlap_score(quoted, turn.text)
        if score > best_score:  # strict: earliest turn wins ties
            best_index, best_score = turn.index, score
    return best_index, max(best_score, 0.0)


def align_citation(citation: Citation, history, tau_match: float = 0.3) -> int | None:
    """Resolve one citation to a history turn index, or None."""
    _check_threshold(tau_match)
    pinned = resolve_marker(citation.marker, history)
    if pinned is not None:
        return pinned
    index, score = _best_match(citation.quoted_text, history)
    return index if index is not None and score >= tau_match else None


def predicted_recall_set(
    trace: ReasoningTrace, history, tau_match: float = 0.3
) -> AlignmentResult:
    """Align every citation in order; the predicted set is the union of resolutions."""
    _check_threshold(tau_match)
    text_by_index = {turn.index: turn.text for turn in history}
    per_citation: list[CitationAlignment] = []
    resolved_indices: set[int] = set()

    for ordinal, citation in enumerate(trace.citations, start=1):
        pinned = resolve_marker(citation.marker, history)
        if pinned is not None:
            score = overlap_score(citation.quoted_text, text_by_index[pinned])
            entry = CitationAlignment(ordinal, pinned, score)
        else:
            index, score = _best_match(citation.quoted_text, history)
            if index is not None and score >= tau_match:
                entry = CitationAlignment(ordinal, index, score)
            else:
                entry = CitationAlignment(ordinal, None, score)
        per_citation.append(entry)
        if entry.resolved is not None:
            resolved_indices.add(entry.resolved)

    return AlignmentResult(
        per_citation=tuple(per_citation), predicted=frozenset(resolved_indices)
    )
