"""Dataset construction: dedup, turn filters, dependency scoring, dialogue
selection, history pruning, triplet verification, and SFT instance rendering.

Everything is deterministic given the embedding provider, and embarrassingly
parallel over dialogues as long as results are emitted in input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from hashlib import blake2b

from .align import predicted_recall_set
from .core import (
    Dialogue,
    QueryContext,
    Turn,
    USER,
    normalize_text,
    query_line,
    tokenize,
    turn_line,
)
from .embedding import EmbeddingProvider, cosine
from .errors import GoldOutOfRange
from .trace import AnnotationTriplet, parse_trace, validate_format

MODE_PRUNED = "pruned"
MODE_FULL = "full"

# Kept turns around the query even when nothing scores above threshold.
TRAILING_CONTEXT_TURNS = 2

SFT_SYSTEM_LINE = (
    "You are a dialogue assistant. Before answering, quote every past turn you rely on "
    "verbatim inside <HIS>...</HIS>, then give the final answer after 'Answer:'."
)


@dataclass(frozen=True)
class DependencyScoreParams:
    """Weights for the dual-dimensional turn dependency score."""

    w_sem: float = 0.6
    w_dist: float = 0.4
    decay: float = 0.15
    threshold: float = 0.6

    def __post_init__(self) -> None:
        if self.decay <= 0:
            raise ValueError("decay must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


DEFAULT_PARAMS = DependencyScoreParams()


def dependency_score(
    sim: float, gap: int, params: DependencyScoreParams = DEFAULT_PARAMS
) -> float:
    """Blend of semantic similarity and exponential turn-distance decay."""
    return params.w_sem * sim + params.w_dist * math.exp(-params.decay * gap)


def turn_dependency_score(
    u: Turn, q: QueryContext, sim: float, params: DependencyScoreParams = DEFAULT_PARAMS
) -> float:
    if u.index >= q.t:
        raise ValueError(f"turn {u.index} does not precede query turn {q.t}")
    return dependency_score(sim, q.t - u.index, params)


def _fingerprint(dialogue: Dialogue) -> tuple[int, ...]:
    return tuple(_hash64(normalize_text(t.text)) for t in dialogue.turns)


def _hash64(text: str) -> int:
    return int.from_bytes(blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def _near(a: tuple[int, ...], b: tuple[int, ...], fraction: float) -> bool:
    if len(a) != len(b):
        return False
    diff = sum(1 for x, y in zip(a, b) if x != y)
    return diff < fraction * len(a)


def dedup(dialogues: list[Dialogue], near_fraction: float | None = None) -> list[Dialogue]:
    """Collapse dialogues with identical turn-hash fingerprints to the first occurrence.

    When near_fraction is given, equal-length dialogues whose fingerprints
    differ in fewer than that fraction of positions also collapse. Input
    order is preserved among survivors; the pass is idempotent.
    """
    survivors: list[Dialogue] = []
    seen: set[tuple[int, ...]] = set()
    kept: list[tuple[int, ...]] = []
    for dialogue in dialogues:
        fp = _fingerprint(dialogue)
        if fp in seen:
            continue
        if near_fraction is not None and any(_near(fp, other, near_fraction) for other in kept):
            continue
        seen.add(fp)
        kept.append(fp)
        survivors.append(dialogue)
    return survivors


def filter_turn_count(dialogue: Dialogue, min_turns: int, max_turns: int) -> bool:
    if min_turns > max_turns:
        raise ValueError(f"min_turns {min_turns} > max_turns {max_turns}")
    return min_turns <= len(dialogue.turns) <= max_turns


def select_dialogue(
    dialogue: Dialogue,
    params: DependencyScoreParams,
    provider: EmbeddingProvider,
) -> bool:
    """True iff some (history turn, query turn) pair scores above threshold.

    Query positions range over user turns; any earlier turn (either speaker)
    may be the dependency. Similarity is embedding cosine clamped to [0, 1].
    """
    vectors = [provider.embed(t.text) for t in dialogue.turns]
    for qi, query_turn in enumerate(dialogue.turns):
        if query_turn.speaker != USER or qi == 0:
            continue
        for hi in range(qi):
            sim = max(0.0, cosine(vectors[hi], vectors[qi]))
            if dependency_score(sim, query_turn.index - dialogue.turns[hi].index, params) > params.threshold:
                return True
    return False


def prune_history(
    q: QueryContext,
    gold: frozenset[int],
    params: DependencyScoreParams,
    provider: EmbeddingProvider,
) -> tuple[Turn, ...]:
    """Compact the history: turns scoring above threshold, all gold turns, and
    the final trailing turns, in original order. Gold turns are always kept."""
    history_indices = {t.index for t in q.history}
    for index in gold:
        if index not in history_indices:
            raise GoldOutOfRange(f"gold turn {index} not in history of query turn {q.t}")

    keep = set(gold)
    keep.update(t.index for t in q.history[-TRAILING_CONTEXT_TURNS:])
    query_vec = provider.embed(q.query)
    for turn in q.history:
        if turn.index in keep:
            continue
        sim = max(0.0, cosine(provider.embed(turn.text), query_vec))
        if dependency_score(sim, q.t - turn.index, params) > params.threshold:
            keep.add(turn.index)
    return tuple(t for t in q.history if t.index in keep)


# --- Triplet verification ---------------------------------------------------

CONSISTENCY = "CONSISTENCY"
HALLUCINATION = "HALLUCINATION"

# Answer tokens that must be grounded in the evidence: anything carrying a
# digit, plus any token of at least this length.
GROUNDED_TOKEN_MIN_LEN = 4


@dataclass(frozen=True)
class VerificationIssue:
    code: str
    detail: str


@dataclass(frozen=True)
class VerificationResult:
    passed: bool
    issues: tuple[VerificationIssue, ...]


def verify_triplet(
    a: AnnotationTriplet, q: QueryContext, tau_match: float = 0.3
) -> VerificationResult:
    """Check reasoning/recall consistency and answer-evidence grounding.

    Consistency: the reasoning's citations must align exactly onto the gold
    recall set (no unresolved citations, no extras, no uncited gold turns).
    Grounding: every digit-bearing or long answer token must appear in the
    normalized gold turns or the query.
    """
    issues: list[VerificationIssue] = []

    trace = parse_trace(a.reasoning)
    alignment = predicted_recall_set(trace, q.history, tau_match)
    for entry in alignment.per_citation:
        if entry.resolved is None:
            issues.append(
                VerificationIssue(
                    CONSISTENCY, f"citation {entry.citation_ordinal} aligns to no history turn"
                )
            )
    for index in sorted(alignment.predicted - a.gold_recall):
        issues.append(VerificationIssue(CONSISTENCY, f"cites turn {index} outside the gold set"))
    history_indices = {t.index for t in q.history}
    for index in sorted(a.gold_recall):
        if index not in history_indices:
            issues.append(VerificationIssue(CONSISTENCY, f"gold turn {index} not in history"))
        elif index not in alignment.predicted:
            issues.append(VerificationIssue(CONSISTENCY, f"gold turn {index} never cited"))

    text_by_index = {t.index: t.text for t in q.history}
    evidence = " ".join(
        [text_by_index[i] for i in sorted(a.gold_recall) if i in text_by_index] + [q.query]
    )
    evidence_tokens = set(tokenize(normalize_text(evidence)))
    for token in tokenize(normalize_text(a.answer)):
        needs_grounding = any(ch.isdigit() for ch in token) or len(token) >= GROUNDED_TOKEN_MIN_LEN
        if needs_grounding and token not in evidence_tokens:
            issues.append(
                VerificationIssue(HALLUCINATION, f"answer token {token!r} absent from evidence")
            )

    return VerificationResult(passed=not issues, issues=tuple(issues))


# --- SFT instance rendering ---------------------------------------------------


@dataclass(frozen=True)
class SftInstance:
    prompt: str
    target_reasoning: str
    target_answer: str
    mode: str

    @property
    def target(self) -> str:
        return f"{self.target_reasoning}\nAnswer: {self.target_answer}"


def build_sft_instance(
    q: QueryContext, context: tuple[Turn, ...], a: AnnotationTriplet, mode: str
) -> SftInstance:
    """Render the prompt bit-exactly: system line, one line per context turn, query line."""
    if mode not in (MODE_PRUNED, MODE_FULL):
        raise ValueError(f"mode must be {MODE_PRUNED!r} or {MODE_FULL!r}, got {mode!r}")
    if not validate_format(a.reasoning).valid:
        raise ValueError("target reasoning fails the trace grammar")
    lines = [SFT_SYSTEM_LINE]
    lines.extend(turn_line(turn) for turn in context)
    lines.append(query_line(q.t, q.query))
    return SftInstance(
        prompt="\n".join(lines),
        target_reasoning=a.reasoning,
        target_answer=a.answer,
        mode=mode,
    )
