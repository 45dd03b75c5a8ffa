"""Rule-based composite reward for a generated trace.

Three verifiable components, summed: binary format validity, scaled-Jaccard
recall quality in [-1.25, 1.25], and embedding-cosine answer quality in
[-1, 1]. Totals therefore live in [-2.25, 3.25]. Component weights default
to (1, 1, 1) and are config-exposed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .align import AlignmentResult, predicted_recall_set
from .core import QueryContext
from .embedding import EmbeddingProvider, cosine
from .trace import AnnotationTriplet, DEFAULT_ANSWER_DELIMITER, parse_trace_lenient, validate_format

RECALL_SCALE = 2.5
RECALL_OFFSET = 1.25


@dataclass(frozen=True)
class RewardWeights:
    format: float = 1.0
    recall: float = 1.0
    answer: float = 1.0


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class RewardBreakdown:
    format: int
    recall: float
    answer: float
    total: float


@dataclass(frozen=True)
class TraceScore:
    """A reward breakdown together with the alignment it was computed from."""

    breakdown: RewardBreakdown
    alignment: AlignmentResult


def format_reward(raw: str, answer_delimiter: str = DEFAULT_ANSWER_DELIMITER) -> int:
    """1 iff the trace is structurally valid; citations are not required."""
    return 1 if validate_format(raw, answer_delimiter).valid else 0


def recall_reward(predicted, gold) -> float:
    """Scaled Jaccard of predicted vs gold recall sets.

    Both-empty counts as Jaccard 1 (nothing needed, nothing cited), so the
    reward hits the +1.25 endpoint; disjoint nonempty sets hit -1.25.
    """
    p, g = frozenset(predicted), frozenset(gold)
    if not p and not g:
        return RECALL_OFFSET
    jaccard = len(p & g) / len(p | g)
    return RECALL_SCALE * jaccard - RECALL_OFFSET


def answer_reward(predicted: str, gold: str, provider: EmbeddingProvider) -> float:
    """Cosine similarity of the answer embeddings; 0 when either embeds to zero."""
    return cosine(provider.embed(predicted), provider.embed(gold))


def score_trace(
    raw_trace: str,
    q: QueryContext,
    gold: AnnotationTriplet,
    provider: EmbeddingProvider,
    tau_match: float = 0.3,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    answer_delimiter: str = DEFAULT_ANSWER_DELIMITER,
) -> TraceScore:
    """Score one raw trace against its gold annotation.

    An invalid format zeroes only the format component: recall and answer are
    still computed on a best-effort parse that ignores malformed regions.
    """
    fmt = format_reward(raw_trace, answer_delimiter)
    trace = parse_trace_lenient(raw_trace, answer_delimiter)
    alignment = predicted_recall_set(trace, q.history, tau_match)
    rec = recall_reward(alignment.predicted, gold.gold_recall)
    ans = answer_reward(trace.answer, gold.answer, provider)
    total = weights.format * fmt + weights.recall * rec + weights.answer * ans
    return TraceScore(
        breakdown=RewardBreakdown(format=fmt, recall=rec, answer=ans, total=total),
        alignment=alignment,
    )


def composite_reward(
    raw_trace: str,
    q: QueryContext,
    gold: AnnotationTriplet,
    provider: EmbeddingProvider,
    tau_match: float = 0.3,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    answer_delimiter: str = DEFAULT_ANSWER_DELIMITER,
) -> RewardBreakdown:
    return score_trace(
        raw_trace, q, gold, provider, tau_match, weights, answer_delimiter
    ).breakdown
