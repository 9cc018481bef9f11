"""Diversity-constrained retrieval over the embedded reference index.

Candidates nearest to the query are grouped by greedy leader clustering
under a radius that shrinks every round, and at most one entry per
cluster is selected, balancing positive and negative examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .corpus import EmbeddedIndex, Polarity, ReferenceEntry
from .errors import DimensionMismatch
from .ontology import EventDefinition, EventOntology, EventTypeId


@dataclass(frozen=True)
class DragConfig:
    top_k: int = 128
    max_examples: int = 10
    initial_radius: float = 1.35
    radius_decay: float = 0.9
    # When set, the top-K candidate list is computed once per debate and
    # only re-clustered at the decayed radius in later rounds.
    freeze_topk: bool = False

    def __post_init__(self):
        if self.top_k < 1 or self.max_examples < 1:
            raise ValueError("top_k and max_examples must be positive")
        if self.max_examples > self.top_k:
            raise ValueError("max_examples cannot exceed top_k")
        if self.initial_radius <= 0:
            raise ValueError("initial_radius must be positive")
        if not 0.0 < self.radius_decay <= 1.0:
            raise ValueError("radius_decay must be in (0, 1]")

    @property
    def positive_quota(self) -> int:
        return math.ceil(self.max_examples / 2)

    @property
    def negative_quota(self) -> int:
        return self.max_examples // 2


@dataclass(frozen=True)
class Candidate:
    entry: ReferenceEntry
    distance: float
    vector: np.ndarray


@dataclass
class Cluster:
    leader: Candidate
    members: list[Candidate]


@dataclass(frozen=True)
class RetrievalResult:
    examples: tuple[ReferenceEntry, ...]
    definitions: tuple[EventDefinition, ...]
    radius_used: float
    unknown_types: tuple[str, ...] = ()


class Opinion(Protocol):
    """Anything carrying an event type mention (possibly None)."""

    event_type: str | None


class RetrievalState(Protocol):
    """The slice of debate state the retriever reads and caches into."""

    query_vector: np.ndarray
    radius: float
    cached_candidates: list[Candidate] | None


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - u.v for unit vectors; ranges over [0, 2]."""
    return 1.0 - float(np.dot(u, v))


def retrieve_topk(index: EmbeddedIndex, query: np.ndarray, k: int) -> list[Candidate]:
    """The min(k, |index|) entries nearest to the unit query vector.

    Sorted by cosine distance ascending, ties broken by entry id.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != index.dimension:
        raise DimensionMismatch(
            f"query has shape {query.shape}, index dimension is {index.dimension}"
        )
    if not index.entries:
        return []
    distances = 1.0 - index.vectors @ query
    order = sorted(range(len(index)), key=lambda i: (distances[i], index.entries[i].sentence.id))
    return [
        Candidate(entry=index.entries[i], distance=float(distances[i]), vector=index.vectors[i])
        for i in order[: min(k, len(order))]
    ]


def cluster_candidates(candidates: Sequence[Candidate], radius: float) -> list[Cluster]:
    """Greedy leader clustering over candidates sorted by query distance.

    Scanning in order, a candidate joins the first cluster whose leader
    lies within `radius` (cosine distance <= radius) and otherwise founds
    a new cluster. Leaders are therefore pairwise more than `radius`
    apart, and each leader is its cluster's closest member to the query.
    """
    clusters: list[Cluster] = []
    for candidate in candidates:
        for cluster in clusters:
            if cosine_distance(candidate.vector, cluster.leader.vector) <= radius:
                cluster.members.append(candidate)
                break
        else:
            clusters.append(Cluster(leader=candidate, members=[candidate]))
    return clusters


def select_diverse(
    clusters: Sequence[Cluster],
    m: int,
    polarity_quota: tuple[int, int],
) -> list[ReferenceEntry]:
    """Pick at most `m` entries, one per cluster, balancing polarity.

    Walks clusters by leader distance ascending and takes each cluster's
    closest member whose polarity quota is still open; if one polarity is
    exhausted in the corpus, remaining slots are backfilled with the
    other from clusters not yet used. The result is sorted by distance to
    the query.
    """
    pos_quota, neg_quota = polarity_quota
    if pos_quota + neg_quota != m:
        raise ValueError(f"polarity quota {polarity_quota} does not sum to m={m}")
    remaining = {Polarity.POSITIVE: pos_quota, Polarity.NEGATIVE: neg_quota}
    picked: list[Candidate] = []
    used: set[int] = set()
    for i, cluster in enumerate(clusters):
        if len(picked) == m:
            break
        for member in sorted(cluster.members, key=lambda c: (c.distance, c.entry.sentence.id)):
            if remaining[member.entry.polarity] > 0:
                remaining[member.entry.polarity] -= 1
                picked.append(member)
                used.add(i)
                break
    if len(picked) < m:
        for i, cluster in enumerate(clusters):
            if len(picked) == m:
                break
            if i in used:
                continue
            members = sorted(cluster.members, key=lambda c: (c.distance, c.entry.sentence.id))
            picked.append(members[0])
            used.add(i)
    picked.sort(key=lambda c: (c.distance, c.entry.sentence.id))
    return [candidate.entry for candidate in picked]


def decay_radius(radius: float, decay: float) -> float:
    """The next round's cluster radius: decay * radius."""
    if not 0.0 < decay <= 1.0:
        raise ValueError(f"decay must be in (0, 1], got {decay}")
    return decay * radius


def _entry_mentions_type(entry: ReferenceEntry, event_type: EventTypeId) -> bool:
    return any(event.event_type == event_type for event in entry.annotation.events)


def gather_event_info(
    opinions: Sequence[Opinion],
    ontology: EventOntology,
    index: EmbeddedIndex,
    state: RetrievalState,
    config: DragConfig,
    event_type_filter: EventTypeId | None = None,
) -> RetrievalResult:
    """Assemble the per-round retrieval packet.

    Definitions cover every distinct event type mentioned in the current
    opinions (unknown types are recorded, not fatal). Examples come from
    top-K retrieval, leader clustering at the state's current radius, and
    diversity selection. During argument extraction, `event_type_filter`
    narrows candidates to entries mentioning the identified type before
    clustering; if that leaves nothing, the unfiltered list is used.
    """
    definitions: list[EventDefinition] = []
    unknown: list[str] = []
    seen: set[str] = set()
    for opinion in opinions:
        type_id = opinion.event_type
        if type_id is None or type_id in seen:
            continue
        seen.add(type_id)
        if type_id in ontology:
            definitions.append(ontology.lookup(type_id))
        else:
            unknown.append(type_id)

    if config.freeze_topk and state.cached_candidates is not None:
        candidates = state.cached_candidates
    else:
        candidates = retrieve_topk(index, state.query_vector, config.top_k)
        if config.freeze_topk:
            state.cached_candidates = candidates
    if event_type_filter is not None:
        filtered = [c for c in candidates if _entry_mentions_type(c.entry, event_type_filter)]
        if filtered:
            candidates = filtered
    clusters = cluster_candidates(candidates, state.radius)
    examples = select_diverse(
        clusters,
        config.max_examples,
        (config.positive_quota, config.negative_quota),
    )
    return RetrievalResult(
        examples=tuple(examples),
        definitions=tuple(definitions),
        radius_used=state.radius,
        unknown_types=tuple(unknown),
    )
