"""Answer metrics, turn-bucket aggregation, the recall error taxonomy, and
deterministic report emission."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .align import overlap_score
from .core import normalize_text, tokenize
from .errors import NotABadCase

BUCKETS = (8, 12, 16, 20, 24, 28, 32)

# A bad case misses exact match and falls below this token F1.
DEFAULT_BAD_CASE_F1 = 0.5


class ErrorType(str, Enum):
    MISSING_RECALL = "missing"
    OVER_RECALL = "over"
    WRONG_RECALL = "wrong"
    FAILURE_ANSWER = "failure_answer"


@dataclass(frozen=True)
class EvalRecord:
    dialogue_id: str
    t: int
    f1: float
    exact: int
    latency_ms: float
    predicted_recall: frozenset[int]
    gold_recall: frozenset[int]
    error: ErrorType | None = None
    note: str | None = None  # e.g. transport failure detail


def token_f1(predicted: str, gold: str) -> float:
    """Multiset token F1 over normalized texts; both-empty is 1, one-empty is 0."""
    p = tokenize(normalize_text(predicted))
    g = tokenize(normalize_text(gold))
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    same = sum((Counter(p) & Counter(g)).values())
    if same == 0:
        return 0.0
    return 2 * same / (len(p) + len(g))


def exact_match(predicted: str, gold: str) -> int:
    return int(normalize_text(predicted) == normalize_text(gold))


def is_bad_case(f1: float, exact: int, bad_case_f1: float = DEFAULT_BAD_CASE_F1) -> bool:
    return exact == 0 and f1 < bad_case_f1


def classify_error(
    predicted: frozenset[int],
    gold: frozenset[int],
    answer_correct: bool,
    history,
    tau_sub: float = 0.3,
) -> ErrorType:
    """Assign one error type to a bad case, by precedence.

    WrongRecall needs a substitution pairing: an extra turn that lexically
    resembles a missing one (a false match between similar turns). Pure
    extras are OverRecall, pure misses MissingRecall, and a correct recall
    set with a wrong answer is FailureAnswer.
    """
    if answer_correct:
        raise NotABadCase("the answer was correct; error taxonomy covers bad cases only")
    predicted, gold = frozenset(predicted), frozenset(gold)
    extras = predicted - gold
    missing = gold - predicted
    text_by_index = {t.index: t.text for t in history}
    if extras and missing:
        for e in sorted(extras):
            for m in sorted(missing):
                if overlap_score(text_by_index.get(e, ""), text_by_index.get(m, "")) >= tau_sub:
                    return ErrorType.WRONG_RECALL
    if extras and not missing:
        return ErrorType.OVER_RECALL
    if missing:
        return ErrorType.MISSING_RECALL
    return ErrorType.FAILURE_ANSWER


def bucketize(turn_count: int) -> int:
    """Greatest bucket <= turn_count, clamped to the bucket range."""
    if turn_count < 1:
        raise ValueError(f"turn_count must be >= 1, got {turn_count}")
    label = BUCKETS[0]
    for b in BUCKETS:
        if b <= turn_count:
            label = b
    return label


def evaluate_item(
    dialogue_id: str,
    t: int,
    predicted_answer: str,
    gold_answer: str,
    predicted_recall: frozenset[int],
    gold_recall: frozenset[int],
    history,
    latency_ms: float = 0.0,
    tau_sub: float = 0.3,
    bad_case_f1: float = DEFAULT_BAD_CASE_F1,
    note: str | None = None,
) -> EvalRecord:
    """Score one prediction and classify it when it is a bad case."""
    f1 = token_f1(predicted_answer, gold_answer)
    exact = exact_match(predicted_answer, gold_answer)
    error = None
    if is_bad_case(f1, exact, bad_case_f1):
        error = classify_error(predicted_recall, gold_recall, False, history, tau_sub)
    return EvalRecord(
        dialogue_id=dialogue_id,
        t=t,
        f1=f1,
        exact=exact,
        latency_ms=max(latency_ms, 0.0),
        predicted_recall=frozenset(predicted_recall),
        gold_recall=frozenset(gold_recall),
        error=error,
        note=note,
    )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _distribution(errors: list[ErrorType]) -> dict[str, float]:
    if not errors:
        return {}
    counts = Counter(errors)
    return {
        kind.value: round(100.0 * counts.get(kind, 0) / len(errors), 6) for kind in ErrorType
    }


def build_report(records: list[EvalRecord]) -> dict:
    """Aggregate records into the report document.

    Per-bucket rows cover non-empty buckets only; the error distribution is
    emitted both pooled and per bucket (percentages over bad cases).
    """
    per_bucket = []
    by_bucket: dict[int, list[EvalRecord]] = {}
    for record in records:
        by_bucket.setdefault(bucketize(record.t), []).append(record)
    bucket_distributions: dict[str, dict[str, float]] = {}
    for k in BUCKETS:
        group = by_bucket.get(k)
        if not group:
            continue
        errors = [r.error for r in group if r.error is not None]
        per_bucket.append(
            {
                "k": k,
                "n": len(group),
                "f1": round(_mean([r.f1 for r in group]), 6),
                "exact": round(_mean([float(r.exact) for r in group]), 6),
                "latency_ms": round(_mean([r.latency_ms for r in group]), 6),
                "errors": {e.value: c for e, c in sorted(Counter(errors).items())},
            }
        )
        if errors:
            bucket_distributions[str(k)] = _distribution(errors)

    all_errors = [r.error for r in records if r.error is not None]
    return {
        "overall": {
            "n": len(records),
            "f1": round(_mean([r.f1 for r in records]), 6),
            "exact": round(_mean([float(r.exact) for r in records]), 6),
            "latency_ms": round(_mean([r.latency_ms for r in records]), 6),
            "bad_cases": len(all_errors),
            "transport_errors": sum(1 for r in records if r.note is not None),
        },
        "per_bucket": per_bucket,
        "error_distribution": _distribution(all_errors),
        "error_distribution_by_bucket": bucket_distributions,
    }


def render_report(report: dict) -> str:
    """Canonical JSON rendering: stable key order, so byte-identical across runs."""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit_report(records: list[EvalRecord]) -> str:
    return render_report(build_report(records))


def record_to_json(record: EvalRecord) -> dict:
    out: dict = {
        "dialogue_id": record.dialogue_id,
        "t": record.t,
        "f1": round(record.f1, 6),
        "exact": record.exact,
        "latency_ms": round(record.latency_ms, 6),
        "predicted_recall": sorted(record.predicted_recall),
        "gold_recall": sorted(record.gold_recall),
        "bucket": bucketize(record.t),
    }
    if record.error is not None:
        out["error"] = record.error.value
    if record.note is not None:
        out["note"] = record.note
    return out
