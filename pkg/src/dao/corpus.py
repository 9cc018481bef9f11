"""Annotated reference corpus and the embedded index searched by retrieval.

Corpus rows are JSONL: `{"id", "text", "split", "events": [{"type",
"trigger", "arguments": [{"role", "content"}]}]}`. Polarity is always
derived from the events list, never read from the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .backends import EmbeddingBackend
from .errors import DimensionMismatch, FormatError, SpanNotInSentence, ZeroVector


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class Sentence:
    id: str
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, sentence_id: str, text: str) -> "Sentence":
        """Build a sentence with canonical whitespace tokenization.

        Tokens joined by single spaces must reconstruct the text, so
        inputs must already be single-spaced.
        """
        if not text:
            raise ValueError(f"{sentence_id}: text must be non-empty")
        tokens = tuple(text.split())
        if " ".join(tokens) != text:
            raise ValueError(
                f"{sentence_id}: text is not single-spaced; tokens do not reconstruct it"
            )
        return cls(id=sentence_id, text=text, tokens=tokens)


@dataclass(frozen=True)
class EventMention:
    event_type: str
    trigger: str
    arguments: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class GoldAnnotation:
    sentence_id: str
    events: tuple[EventMention, ...] = ()


@dataclass(frozen=True)
class ReferenceEntry:
    sentence: Sentence
    annotation: GoldAnnotation
    polarity: Polarity
    split: str = "train"


@dataclass(frozen=True)
class EmbeddedIndex:
    """Reference entries plus one unit-norm vector per entry."""

    entries: tuple[ReferenceEntry, ...]
    vectors: np.ndarray  # shape (n, dimension), rows L2-normalized
    dimension: int

    def __len__(self) -> int:
        return len(self.entries)


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Return the unit-norm copy of `vector`; zero vectors are an error."""
    vector = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return vector / norm


def _check_span(sentence: Sentence, span: str, what: str) -> None:
    if span not in sentence.text:
        raise SpanNotInSentence(f"{sentence.id}: {what} {span!r} not found in sentence text")


def load_corpus(path: str | Path) -> list[ReferenceEntry]:
    """Load reference entries from a JSONL corpus file.

    Every trigger and argument content must occur verbatim in the
    sentence text. Rows without events are negative examples.
    """
    entries: list[ReferenceEntry] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(line_no, f"invalid JSON: {exc}") from None
            if not isinstance(record, dict):
                raise FormatError(line_no, "record is not a JSON object")
            try:
                sentence = Sentence.from_text(record["id"], record["text"])
                events = []
                for event in record.get("events", ()):
                    arguments = tuple(
                        (arg["role"], arg["content"]) for arg in event.get("arguments", ())
                    )
                    events.append(
                        EventMention(
                            event_type=event["type"],
                            trigger=event["trigger"],
                            arguments=arguments,
                        )
                    )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(line_no, str(exc)) from None
            for event in events:
                _check_span(sentence, event.trigger, "trigger")
                for _, content in event.arguments:
                    _check_span(sentence, content, "argument content")
            polarity = Polarity.POSITIVE if events else Polarity.NEGATIVE
            entries.append(
                ReferenceEntry(
                    sentence=sentence,
                    annotation=GoldAnnotation(sentence.id, tuple(events)),
                    polarity=polarity,
                    split=record.get("split", "train"),
                )
            )
    return entries


def build_index(entries: list[ReferenceEntry], embedder: EmbeddingBackend) -> EmbeddedIndex:
    """Embed every entry's sentence and L2-normalize the vectors.

    Normalization happens here regardless of what the backend returns;
    vector order matches entry order. Deterministic embedders therefore
    yield bitwise-identical indexes across builds.
    """
    dim = embedder.dimension()
    if not entries:
        return EmbeddedIndex(entries=(), vectors=np.zeros((0, dim)), dimension=dim)
    rows = []
    for entry in entries:
        vector = np.asarray(embedder.embed(entry.sentence.text), dtype=np.float64)
        if vector.ndim != 1 or vector.shape[0] != dim:
            raise DimensionMismatch(
                f"{entry.sentence.id}: embedding has shape {vector.shape}, expected ({dim},)"
            )
        rows.append(l2_normalize(vector))
    return EmbeddedIndex(entries=tuple(entries), vectors=np.vstack(rows), dimension=dim)
