"""Scripted replay bundles: canned agent replies plus scorer keys.

A bundle makes a full extraction run hermetic: chat backends replay
per-session scripts, scoring uses the keyed deterministic scorer, and
embeddings come from the trigram hash embedder. Bundle JSON shape:

    {
      "embedder": {"dimension": 64},
      "scorer": {"keys": [["<matcher>", "<key phrase>"], ...],
                 "match_cost": 0.05, "miss_cost": 1.0, "scale": 1.0},
      "default": {"debaters": [[["*", "reply"], ...], ...],
                  "critic": [...], "judge": [...], "summarizer": [...]},
      "sessions": {"<sentence id>": {...same shape as default...}}
    }

Scripts are ordered (matcher, reply) pairs as consumed by the scripted
chat backend; a session uses its own entry under `sessions`, falling
back to `default`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .backends import HashEmbedder, KeyedScorer, hash_embedder, scripted_chat
from .debate import AgentTeam, DebaterBinding
from .errors import FormatError

_DEBATER_NAMES = "ABCDEFGH"


def _as_script(raw: object) -> list[tuple[str, str]]:
    if not isinstance(raw, list):
        raise ValueError(f"script must be a list, got {type(raw).__name__}")
    return [(str(matcher), str(reply)) for matcher, reply in raw]


@dataclass
class ReplayBundle:
    dimension: int
    scorer_keys: list[tuple[str, str]]
    match_cost: float
    miss_cost: float
    scale: float
    default_agents: dict | None
    sessions: dict[str, dict]

    @classmethod
    def load(cls, path: str | Path) -> "ReplayBundle":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(exc.lineno, f"replay bundle is not valid JSON: {exc}") from None
        scorer = data.get("scorer", {})
        return cls(
            dimension=int(data.get("embedder", {}).get("dimension", 64)),
            scorer_keys=[(str(m), str(k)) for m, k in scorer.get("keys", [])],
            match_cost=float(scorer.get("match_cost", 0.05)),
            miss_cost=float(scorer.get("miss_cost", 1.0)),
            scale=float(scorer.get("scale", 1.0)),
            default_agents=data.get("default"),
            sessions=dict(data.get("sessions", {})),
        )

    def embedder(self) -> HashEmbedder:
        return hash_embedder(self.dimension)

    def scorer(self) -> KeyedScorer:
        return KeyedScorer(
            keys=list(self.scorer_keys),
            match_cost=self.match_cost,
            miss_cost=self.miss_cost,
            scale=self.scale,
        )

    def team_for(self, sentence_id: str) -> AgentTeam:
        """Fresh scripted backends for one session."""
        agents = self.sessions.get(sentence_id, self.default_agents)
        if agents is None:
            raise KeyError(f"replay bundle has no scripts for sentence {sentence_id!r}")
        debater_scripts = [_as_script(script) for script in agents.get("debaters", [])]
        if len(debater_scripts) < 2:
            raise ValueError(f"replay scripts for {sentence_id!r} need at least two debaters")
        debaters = tuple(
            DebaterBinding(name=_DEBATER_NAMES[i], backend=scripted_chat(script))
            for i, script in enumerate(debater_scripts)
        )
        summarizer_script = agents.get("summarizer")
        return AgentTeam(
            debaters=debaters,
            critic=scripted_chat(_as_script(agents.get("critic", []))),
            judge=scripted_chat(_as_script(agents.get("judge", []))),
            summarizer=scripted_chat(_as_script(summarizer_script))
            if summarizer_script is not None
            else None,
        )
