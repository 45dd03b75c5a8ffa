"""Dialogue domain types and the shared text normalization.

All types are immutable after construction and all functions are pure, so
everything here is safe for unrestricted concurrent use.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass, field

USER = "user"
ASSISTANT = "assistant"
SPEAKERS = (USER, ASSISTANT)

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})


def normalize_text(raw: str) -> str:
    """Canonical lowercase form used by every string-matching check.

    Unicode NFC, lowercased, punctuation replaced by spaces, whitespace runs
    collapsed, and the articles a/an/the dropped as whole tokens.
    """
    s = unicodedata.normalize("NFC", raw).lower()
    s = s.translate(_PUNCT_TABLE)
    return " ".join(tok for tok in s.split() if tok not in _ARTICLES)


def tokenize(normalized: str) -> list[str]:
    """Split an already-normalized string into tokens; duplicates preserved."""
    return normalized.split()


@dataclass(frozen=True)
class Turn:
    """One utterance at a 1-based flat position in a dialogue."""

    index: int
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"turn index must be >= 1, got {self.index}")
        if self.speaker not in SPEAKERS:
            raise ValueError(f"unknown speaker {self.speaker!r}")
        if not self.text.strip():
            raise ValueError(f"turn {self.index} has empty text")


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Turn, ...]
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        indices = [t.index for t in self.turns]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError(f"dialogue {self.id!r}: turn indices must be exactly 1..n")


@dataclass(frozen=True)
class QueryContext:
    """A query at turn ``t`` together with every turn that precedes it."""

    dialogue_id: str
    t: int
    query: str
    history: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"query turn position must be >= 1, got {self.t}")
        for turn in self.history:
            if turn.index >= self.t:
                raise ValueError(f"history turn {turn.index} not before query turn {self.t}")


def query_context(dialogue: Dialogue, t: int) -> QueryContext:
    """Cut ``dialogue`` at turn ``t``: that turn becomes the query, earlier turns the history."""
    if not 1 <= t <= len(dialogue.turns):
        raise ValueError(f"dialogue {dialogue.id!r} has no turn {t}")
    return QueryContext(
        dialogue_id=dialogue.id,
        t=t,
        query=dialogue.turns[t - 1].text,
        history=dialogue.turns[: t - 1],
    )


def recall_set(indices) -> frozenset[int]:
    """Validate and freeze a set of flat turn indices."""
    out = frozenset(int(i) for i in indices)
    for i in out:
        if i < 1:
            raise ValueError(f"recall index must be >= 1, got {i}")
    return out


@dataclass(frozen=True)
class Marker:
    """A turn reference inside a citation: Qk (k-th user turn), Ak (k-th
    assistant turn), or Turn n (flat index n)."""

    kind: str  # "Q" | "A" | "TURN"
    k: int

    def __post_init__(self) -> None:
        if self.kind not in ("Q", "A", "TURN"):
            raise ValueError(f"unknown marker kind {self.kind!r}")
        if self.k < 1:
            raise ValueError(f"marker ordinal must be >= 1, got {self.k}")


@dataclass(frozen=True)
class Citation:
    """One recall action: a quoted stretch of history, optionally marker-tagged."""

    quoted_text: str
    span: tuple[int, int]
    marker: Marker | None = None


@dataclass(frozen=True)
class ReasoningTrace:
    """A parsed chain of thought: reasoning steps, ordered recall actions, final answer."""

    raw: str
    steps: tuple[str, ...]
    citations: tuple[Citation, ...]
    answer: str


def resolve_marker(marker: Marker | None, history: tuple[Turn, ...] | list[Turn]) -> int | None:
    """Map a marker to the flat index of the history turn it names, if any.

    Qk resolves iff the history holds at least k user turns, Ak likewise for
    assistant turns, and Turn n iff flat index n is present.
    """
    if marker is None:
        return None
    if marker.kind == "TURN":
        return marker.k if any(t.index == marker.k for t in history) else None
    speaker = USER if marker.kind == "Q" else ASSISTANT
    seen = 0
    for turn in history:
        if turn.speaker == speaker:
            seen += 1
            if seen == marker.k:
                return turn.index
    return None


def turn_line(turn: Turn) -> str:
    """Render one history turn the way prompts present it."""
    return f"Turn {turn.index} ({turn.speaker}): {turn.text}"


def query_line(t: int, query: str) -> str:
    return f"Current query (turn {t}): {query}"


# --- JSONL record codecs ---------------------------------------------------
# Dialogue record: {"id": str, "turns": [{"index", "speaker", "text"}], "meta"?}
# Unknown fields are ignored on read.


def dialogue_from_record(record: dict) -> Dialogue:
    turns = tuple(
        Turn(index=int(t["index"]), speaker=str(t["speaker"]), text=str(t["text"]))
        for t in record["turns"]
    )
    meta = record.get("meta")
    return Dialogue(id=str(record["id"]), turns=turns, meta=meta)


def dialogue_to_record(dialogue: Dialogue) -> dict:
    record: dict = {
        "id": dialogue.id,
        "turns": [
            {"index": t.index, "speaker": t.speaker, "text": t.text} for t in dialogue.turns
        ],
    }
    if dialogue.meta is not None:
        record["meta"] = dialogue.meta
    return record
