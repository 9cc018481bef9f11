"""Scoring of predictions against gold annotations.

Three metrics: exact-match trigger F1, argument head F1 (heads via a
pluggable extractor with a documented heuristic default), and a
span-overlap metric for corpora scored by type overlap. The overlap rule
is a stand-in for that corpus family's official definition and reports
label it as such.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .corpus import Sentence
from .errors import SpanNotInSentence

logger = logging.getLogger(__name__)

_TRAILING_PUNCT = ".,;:!?'\""
_PREPOSITIONS = (" of ", " in ", " at ", " from ")

# (sentence_id, event_type, trigger)
TriggerItem = tuple[str, str, str]
# (sentence_id, event_type, role, content)
ArgumentItem = tuple[str, str, str, str]

HeadExtractor = Callable[[Sentence, str], str]


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


def _prf(tp: int, fp: int, fn: int) -> PRF:
    # Corpus-level 0/0 scores 1.0 only when both sides are empty.
    if tp == 0 and fp == 0 and fn == 0:
        return PRF(1.0, 1.0, 1.0, 0, 0, 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn)


def _counter_match(preds: Sequence[tuple], golds: Sequence[tuple]) -> PRF:
    pred_counts, gold_counts = Counter(preds), Counter(golds)
    tp = sum(min(count, gold_counts[key]) for key, count in pred_counts.items())
    return _prf(tp, len(preds) - tp, len(golds) - tp)


def trigger_f1(preds: Sequence[TriggerItem], golds: Sequence[TriggerItem]) -> PRF:
    """Exact-match F1 on (sentence, type, trigger) with one-to-one matching."""
    return _counter_match(list(preds), list(golds))


def _head_from_span(span: str) -> str:
    """Heuristic head: token before the first preposition, else last token."""
    text = span.strip().rstrip(_TRAILING_PUNCT).strip()
    positions = [text.find(prep) for prep in _PREPOSITIONS]
    hits = [pos for pos in positions if pos != -1]
    if hits:
        text = text[: min(hits)]
    tokens = text.split()
    if not tokens:
        return text
    return tokens[-1].strip(_TRAILING_PUNCT)


def head_of_span(sentence: Sentence, span: str) -> str:
    """Head token of an argument span that occurs in the sentence."""
    if span not in sentence.text:
        raise SpanNotInSentence(f"{sentence.id}: span {span!r} not in sentence")
    return _head_from_span(span)


def lenient_head_of_span(sentence: Sentence, span: str) -> str:
    """Like head_of_span, but tolerates spans absent from the sentence."""
    if span not in sentence.text:
        logger.warning("%s: span %r not in sentence; head taken from span text", sentence.id, span)
    return _head_from_span(span)


def argument_head_f1(
    preds: Sequence[ArgumentItem],
    golds: Sequence[ArgumentItem],
    sentences: Mapping[str, Sentence],
    head_extractor: HeadExtractor = head_of_span,
) -> PRF:
    """F1 on (sentence, type, role, head-of-content), one-to-one matching."""

    def keyed(items: Sequence[ArgumentItem]) -> list[tuple]:
        result = []
        for sentence_id, event_type, role, content in items:
            sentence = sentences.get(sentence_id)
            if sentence is None:
                logger.warning("no sentence %r; head taken from span text", sentence_id)
                head = _head_from_span(content)
            else:
                head = head_extractor(sentence, content)
            result.append((sentence_id, event_type, role, head))
        return result

    return _counter_match(keyed(preds), keyed(golds))


def _locate(texts: Mapping[str, str], sentence_id: str, span: str) -> tuple[int, int] | None:
    text = texts.get(sentence_id)
    if text is None:
        return None
    start = text.find(span)
    if start == -1:
        return None
    return start, start + len(span)


def type_overlap_f1(
    preds: Sequence[TriggerItem],
    golds: Sequence[TriggerItem],
    texts: Mapping[str, str],
) -> PRF:
    """F1 where a pair matches when types agree and spans overlap by at
    least one character (first occurrence in the sentence), matched
    greedily longest-overlap-first, one-to-one."""
    pred_spans = [(item, _locate(texts, item[0], item[2])) for item in preds]
    gold_spans = [(item, _locate(texts, item[0], item[2])) for item in golds]
    pairs: list[tuple[int, int, int]] = []  # (-overlap, pred_idx, gold_idx)
    for pi, (pred, ps) in enumerate(pred_spans):
        if ps is None:
            continue
        for gi, (gold, gs) in enumerate(gold_spans):
            if gs is None or pred[0] != gold[0] or pred[1] != gold[1]:
                continue
            overlap = min(ps[1], gs[1]) - max(ps[0], gs[0])
            if overlap >= 1:
                pairs.append((-overlap, pi, gi))
    pairs.sort()
    matched_preds: set[int] = set()
    matched_golds: set[int] = set()
    for _, pi, gi in pairs:
        if pi in matched_preds or gi in matched_golds:
            continue
        matched_preds.add(pi)
        matched_golds.add(gi)
    tp = len(matched_preds)
    return _prf(tp, len(preds) - tp, len(golds) - tp)
