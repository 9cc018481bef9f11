"""The debate state machine.

A session runs a trigger-detection debate first and, on agreement,
chains one argument-extraction debate per agreed (type, trigger). Each
round renders opinions, broadcasts a retrieval packet to debaters and
critic (never the judge), gates answers through the conformal threshold,
runs cross-examination, and asks the judge for a verdict; the retrieval
radius and the acceptance threshold tighten after every round.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .adacp import AdaCPConfig, RiskThreshold, accept, decay_threshold, risk_score
from .backends import ChatBackend, ChatMessage, EmbeddingBackend, ScoringBackend
from .corpus import EmbeddedIndex, ReferenceEntry, Sentence, l2_normalize
from .drag import Candidate, DragConfig, RetrievalResult, decay_radius, gather_event_info
from .errors import BackendError, ParseFailure
from .ontology import EventOntology
from .prompts import render_prompt

logger = logging.getLogger(__name__)

ED_JUDGE_HEADER = ("event type", "event trigger")
EAE_HEADER = ("event type", "argument role", "argument content")


# ---------------------------------------------------------------------------
# Structured answers


@dataclass(frozen=True)
class TriggerAnswer:
    """A detection answer: (type, trigger), or (None, None) for no event."""

    event_type: str | None = None
    trigger: str | None = None

    def __post_init__(self):
        if (self.event_type is None) != (self.trigger is None):
            raise ValueError("event_type and trigger must both be set or both be None")

    @property
    def is_no_event(self) -> bool:
        return self.event_type is None


@dataclass(frozen=True)
class ArgumentAnswer:
    """An argument-extraction answer: one (role, content) row per role."""

    event_type: str
    rows: tuple[tuple[str, str | None], ...] = ()

    @property
    def is_empty(self) -> bool:
        return all(content is None for _, content in self.rows)


def serialize_trigger_answer(answer: TriggerAnswer | None) -> str:
    if answer is None or answer.is_no_event:
        return "[]"
    return f'["{answer.event_type}", "{answer.trigger}"]'


def serialize_argument_table(event_type: str, rows: Sequence[tuple[str, str | None]]) -> str:
    lines = ["| event type | argument role | argument content |", "| --- | --- | --- |"]
    for role, content in rows:
        lines.append(f"| {event_type} | {role} | {content if content is not None else 'None'} |")
    return "\n".join(lines)


def canonical_argument_rows(
    roles: Sequence[str], filled: Mapping[str, str | None]
) -> tuple[tuple[str, str | None], ...]:
    """All roles in ontology order, None where nothing was extracted."""
    return tuple((role, filled.get(role)) for role in roles)


# ---------------------------------------------------------------------------
# Parsing agent output

_ANSWER_PAIR = re.compile(r'\[\s*"([^"\[\]]+)"\s*,\s*"([^"\[\]]+)"\s*\]')
_ANSWER_EMPTY = re.compile(r"\[\s*\]")


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def parse_debater_ed(text: str) -> TriggerAnswer:
    """Parse a detection answer out of free-form debater text.

    The last well-formed two-element quoted list wins; a later bare `[]`
    means no event. Role prefixes and surrounding prose are tolerated.
    """
    best_pos = -1
    best: TriggerAnswer | None = None
    for match in _ANSWER_PAIR.finditer(text):
        best_pos, best = match.start(), TriggerAnswer(
            match.group(1).strip(), match.group(2).strip()
        )
    for match in _ANSWER_EMPTY.finditer(text):
        if match.start() > best_pos:
            best_pos, best = match.start(), TriggerAnswer()
    if best is None:
        raise ParseFailure(f"no answer pattern in reply sha256:{_digest(text)}")
    return best


def _strip_emphasis(cell: str) -> str:
    return cell.strip().strip("*`").strip()


_SEPARATOR_CELL = re.compile(r":?-+:?")


def _find_pipe_tables(text: str) -> list[list[list[str]]]:
    """Consecutive pipe-delimited lines, split into cell lists."""
    tables: list[list[list[str]]] = []
    current: list[list[str]] = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.count("|") >= 2:
            inner = stripped.strip("|")
            current.append([_strip_emphasis(cell) for cell in inner.split("|")])
        elif current:
            tables.append(current)
            current = []
    if current:
        tables.append(current)
    return tables


def parse_table(text: str, expected_header: Sequence[str]) -> list[tuple[str | None, ...]]:
    """Body rows of the first pipe table whose header matches.

    Header comparison is case-insensitive on trimmed cells. Separator
    rows are skipped, rows of the wrong width are dropped with a warning,
    and a cell spelled "None" becomes None.
    """
    from .errors import HeaderMismatch, NoTableFound

    tables = _find_pipe_tables(text)
    if not tables:
        raise NoTableFound(f"no pipe-delimited table in reply sha256:{_digest(text)}")
    wanted = [header.strip().lower() for header in expected_header]
    for table in tables:
        header = [cell.lower() for cell in table[0]]
        if header != wanted:
            continue
        rows: list[tuple[str | None, ...]] = []
        for cells in table[1:]:
            if all(_SEPARATOR_CELL.fullmatch(cell) for cell in cells if cell) and any(
                "-" in cell for cell in cells
            ):
                continue
            if len(cells) != len(wanted):
                logger.warning("dropping table row with %d cells, expected %d", len(cells), len(wanted))
                continue
            rows.append(tuple(None if cell.lower() == "none" else cell for cell in cells))
        return rows
    raise HeaderMismatch(f"no table with header {list(expected_header)!r}")


class VerdictKind(Enum):
    AGREEMENT = "agreement"
    CONTINUE = "continue"
    NO_EVENT = "no_event"


@dataclass(frozen=True)
class JudgeVerdict:
    kind: VerdictKind
    trigger_answers: tuple[TriggerAnswer, ...] = ()
    argument_rows: tuple[tuple[str, str | None], ...] = ()


def parse_judge(text: str, task: str) -> JudgeVerdict:
    """Interpret the judge's reply; sentinels take precedence over tables.

    Unparseable replies degrade to a "continue" verdict with a warning
    rather than aborting the session.
    """
    lowered = text.lower()
    if "no agreement" in lowered or "disagreement observed" in lowered:
        return JudgeVerdict(VerdictKind.CONTINUE)
    if "no event" in lowered:
        return JudgeVerdict(VerdictKind.NO_EVENT)
    try:
        if task == "ed":
            rows = parse_table(text, ED_JUDGE_HEADER)
            answers: list[TriggerAnswer] = []
            for event_type, trigger in dict.fromkeys(rows):
                if event_type is None or trigger is None:
                    logger.warning("judge table row with empty cell skipped")
                    continue
                answers.append(TriggerAnswer(event_type, trigger))
            if not answers:
                raise ParseFailure("judge agreement table had no usable rows")
            return JudgeVerdict(VerdictKind.AGREEMENT, trigger_answers=tuple(answers))
        rows = parse_table(text, EAE_HEADER)
        argument_rows = tuple(
            (role, content) for _, role, content in rows if role is not None
        )
        return JudgeVerdict(VerdictKind.AGREEMENT, argument_rows=argument_rows)
    except ParseFailure as exc:
        logger.warning("judge reply unparseable (%s); debate continues", exc)
        return JudgeVerdict(VerdictKind.CONTINUE)


# ---------------------------------------------------------------------------
# Session wiring


@dataclass
class DebaterBinding:
    name: str
    backend: ChatBackend
    temperature: float = 0.0


@dataclass
class AgentTeam:
    debaters: tuple[DebaterBinding, ...]
    critic: ChatBackend
    judge: ChatBackend
    summarizer: ChatBackend | None = None

    def __post_init__(self):
        if len(self.debaters) < 2:
            raise ValueError("a debate needs at least two debaters")


@dataclass
class SessionConfig:
    team: AgentTeam
    scorer: ScoringBackend
    embedder: EmbeddingBackend
    drag: DragConfig = field(default_factory=DragConfig)
    adacp: AdaCPConfig = field(default_factory=AdaCPConfig)
    max_rounds: int = 3
    use_llm_summarizer: bool = False


@dataclass(frozen=True)
class TranscriptEntry:
    round_index: int
    stage: str
    role: str
    prompt: str
    text: str


@dataclass(frozen=True)
class RiskRecord:
    task: str
    round_index: int
    debater: str
    answer_text: str
    risk: float
    accepted: bool


@dataclass
class DebateState:
    """Mutable per-debate state; one instance per task per session."""

    task: str
    query_vector: np.ndarray
    radius: float
    threshold: RiskThreshold
    max_rounds: int = 3
    round_index: int = 0
    live_opinions: dict[int, TriggerAnswer | ArgumentAnswer | None] = field(default_factory=dict)
    gated_out: set[int] = field(default_factory=set)
    transcript: list[TranscriptEntry] = field(default_factory=list)
    risk_log: list[RiskRecord] = field(default_factory=list)
    cached_candidates: list[Candidate] | None = None


@dataclass(frozen=True)
class TaskContext:
    task: str  # "ed" or "eae"
    event_type: str | None = None
    trigger: str | None = None
    roles: tuple[str, ...] = ()


@dataclass(frozen=True)
class EventRecord:
    sentence_id: str
    event_type: str
    trigger: str
    arguments: tuple[tuple[str, str], ...] = ()


@dataclass
class SessionResult:
    sentence: Sentence
    records: list[EventRecord]
    transcript: list[TranscriptEntry]
    risk_log: list[RiskRecord]


@dataclass
class _DebateOutcome:
    kind: str  # "agreement" | "no_event"
    trigger_answers: tuple[TriggerAnswer, ...] = ()
    argument_rows: tuple[tuple[str, str | None], ...] = ()


def detection_risk_input(
    sentence: Sentence, ontology: EventOntology, role_label: str = "Debater"
) -> str:
    """The detection-task prompt; also the scoring context for detection
    answers, so calibration and in-debate risks share one anchor."""
    type_list = "Event type list: " + ", ".join(ontology.type_ids()) + "."
    rendered = render_prompt("debater_ed", {"SENT": sentence.text, "ROLE": role_label})
    return f"{type_list}\n\n{rendered}"


def argument_risk_input(
    sentence: Sentence, event_type: str, trigger: str, roles: Sequence[str]
) -> str:
    """The argument-extraction prompt; also the scoring context for
    argument answers."""
    return render_prompt(
        "debater_eae",
        {
            "SENT": sentence.text,
            "event type": event_type,
            "trigger": trigger,
            "role list": ", ".join(roles),
        },
    )


def render_packet(result: RetrievalResult, ctx: TaskContext, ontology: EventOntology) -> str:
    """Render the retrieval packet broadcast to debaters and the critic."""
    lines = ["Reference information:"]
    if result.definitions:
        lines.append("Event definitions:")
        for definition in result.definitions:
            triggers = ", ".join(definition.typical_triggers) or "(none listed)"
            roles = ", ".join(definition.roles) or "(none)"
            lines.append(
                f"- {definition.type_id}: {definition.definition_text} "
                f"Typical triggers: {triggers}. Argument roles: {roles}."
            )
    if result.examples:
        lines.append("Examples:")
        for entry in result.examples:
            lines.append(f'- Sentence: "{entry.sentence.text}" Answer: {_example_answer(entry, ctx)}')
    return "\n".join(lines)


def _example_answer(entry: ReferenceEntry, ctx: TaskContext) -> str:
    events = entry.annotation.events
    if ctx.task == "ed":
        if not events:
            return "[]"
        return "; ".join(f'["{e.event_type}", "{e.trigger}"]' for e in events)
    for event in events:
        if event.event_type == ctx.event_type:
            filled = {role: content for role, content in event.arguments}
            return "\n" + serialize_argument_table(event.event_type, tuple(filled.items()) or ())
    return "[]"


class _Session:
    """Holds the immutable context of one sentence's debates."""

    def __init__(
        self,
        sentence: Sentence,
        ontology: EventOntology,
        index: EmbeddedIndex,
        config: SessionConfig,
    ):
        self.sentence = sentence
        self.ontology = ontology
        self.index = index
        self.config = config
        self.transcript: list[TranscriptEntry] = []
        self.risk_log: list[RiskRecord] = []

    # -- transcript helpers

    def _note(self, round_index: int, stage: str, role: str, text: str, prompt: str = "") -> None:
        self.transcript.append(TranscriptEntry(round_index, stage, role, prompt, text))

    def _chat(
        self,
        backend: ChatBackend,
        round_index: int,
        stage: str,
        role: str,
        prompt: str,
        temperature: float = 0.0,
    ) -> str:
        reply = backend.complete([ChatMessage("user", prompt)], temperature=temperature)
        self._note(round_index, stage, role, reply, prompt=prompt)
        return reply

    # -- prompt assembly

    def _base_prompt(self, ctx: TaskContext, role_label: str = "Debater") -> str:
        if ctx.task == "ed":
            return detection_risk_input(self.sentence, self.ontology, role_label)
        return argument_risk_input(
            self.sentence, ctx.event_type or "", ctx.trigger or "", ctx.roles
        )

    def _format_reminder(self, ctx: TaskContext, name: str) -> str:
        if ctx.task == "ed":
            return (
                f'State your final answer in the format **{name}: ["event type", '
                f'"trigger token"]**, or **{name}: []**.'
            )
        return (
            "State your final answer as a table. The header of the table is "
            "| event type | argument role | argument content |."
        )

    def _serialize(self, ctx: TaskContext, answer: TriggerAnswer | ArgumentAnswer | None) -> str:
        if ctx.task == "ed":
            return serialize_trigger_answer(answer)  # type: ignore[arg-type]
        if answer is None:
            return serialize_argument_table(ctx.event_type or "", canonical_argument_rows(ctx.roles, {}))
        assert isinstance(answer, ArgumentAnswer)
        filled = dict(answer.rows)
        return serialize_argument_table(answer.event_type, canonical_argument_rows(ctx.roles, filled))

    def _ce_prompt(
        self,
        ctx: TaskContext,
        binding: DebaterBinding,
        index: int,
        answers: dict[int, TriggerAnswer | ArgumentAnswer | None],
        packet_text: str,
        gated: bool,
    ) -> str:
        parts = [self._base_prompt(ctx, binding.name)]
        own = self._serialize(ctx, answers.get(index))
        parts.append(f"Your current answer: {own}")
        for j, other in enumerate(self.config.team.debaters):
            if j != index:
                parts.append(
                    f"Debater {other.name}'s current answer: {self._serialize(ctx, answers.get(j))}"
                )
        parts.append(packet_text)
        parts.append(render_prompt("debater_revise" if gated else "debater_ce", {}))
        parts.append(self._format_reminder(ctx, binding.name))
        return "\n\n".join(parts)

    def _critic_prompt(
        self,
        ctx: TaskContext,
        answers: dict[int, TriggerAnswer | ArgumentAnswer | None],
        packet_text: str,
    ) -> str:
        template = "critic_ed" if ctx.task == "ed" else "critic_eae"
        parts = [render_prompt(template, {"SENT": self.sentence.text})]
        for j, binding in enumerate(self.config.team.debaters):
            parts.append(
                f"Debater {binding.name}'s current answer: {self._serialize(ctx, answers.get(j))}"
            )
        parts.append(packet_text)
        return "\n\n".join(parts)

    def _judge_prompt(self, ctx: TaskContext, statements: dict[int, str], critic_text: str) -> str:
        parts = []
        for j, binding in enumerate(self.config.team.debaters):
            if j in statements:
                parts.append(f"Debater {binding.name}'s statement: {statements[j]}")
        parts.append(f"Critic's assessment: {critic_text}")
        parts.append(render_prompt("judge_ed" if ctx.task == "ed" else "judge_eae", {}))
        return "\n\n".join(parts)

    # -- answer parsing

    def _parse_answer(
        self, ctx: TaskContext, text: str
    ) -> TriggerAnswer | ArgumentAnswer | None:
        """Parse a debater reply; returns None when nothing parseable."""
        try:
            if ctx.task == "ed":
                return parse_debater_ed(text)
            rows = parse_table(text, EAE_HEADER)
            cleaned = self._clean_argument_rows(
                [(role, content) for _, role, content in rows], ctx.roles
            )
            return ArgumentAnswer(event_type=ctx.event_type or "", rows=cleaned)
        except ParseFailure as exc:
            logger.warning("debater reply unparseable: %s", exc)
            return None

    @staticmethod
    def _clean_argument_rows(
        rows: Sequence[tuple[str | None, str | None]], roles: Sequence[str]
    ) -> tuple[tuple[str, str | None], ...]:
        """Keep the first row per known role; unknown roles are dropped."""
        known = set(roles)
        seen: dict[str, str | None] = {}
        for role, content in rows:
            if role is None or role not in known:
                if role is not None:
                    logger.warning("dropping row for unknown argument role %r", role)
                continue
            if role not in seen:
                seen[role] = content
        return tuple((role, seen[role]) for role in roles if role in seen)

    @staticmethod
    def _is_exempt(ctx: TaskContext, answer: TriggerAnswer | ArgumentAnswer | None) -> bool:
        """Abstentions and no-event answers bypass the gate."""
        if answer is None:
            return True
        if ctx.task == "ed":
            return answer.is_no_event  # type: ignore[union-attr]
        return answer.is_empty  # type: ignore[union-attr]

    # -- the round state machine

    def run_round(self, state: DebateState, ctx: TaskContext) -> JudgeVerdict:
        """One debate round; advances round counter, radius, and threshold."""
        team = self.config.team
        rnd = state.round_index
        stage = lambda name: f"{ctx.task}.{name}"  # noqa: E731

        # (1) Opinions: rendered fresh in the first round, carried from the
        # previous cross-examination afterwards.
        if rnd == 0:
            for i, binding in enumerate(team.debaters):
                prompt = self._base_prompt(ctx, binding.name)
                reply = self._chat(
                    binding.backend,
                    rnd,
                    stage("opinion"),
                    f"debater_{binding.name}",
                    prompt,
                    binding.temperature,
                )
                answer = self._parse_answer(ctx, reply)
                if answer is None:
                    self._note(
                        rnd,
                        stage("opinion"),
                        "engine",
                        f"debater_{binding.name} reply unparseable; treated as abstention",
                    )
                state.live_opinions[i] = answer

        # (2) Retrieval, broadcast to debaters and critic but never the judge.
        opinions = [a for a in state.live_opinions.values() if a is not None]
        packet = gather_event_info(
            opinions,
            self.ontology,
            self.index,
            state,
            self.config.drag,
            event_type_filter=ctx.event_type if ctx.task == "eae" else None,
        )
        packet_text = render_packet(packet, ctx, self.ontology)
        self._note(rnd, stage("retrieval"), "engine", packet_text)
        self._note(
            rnd,
            stage("retrieval"),
            "engine",
            f"retrieved {len(packet.examples)} example(s) at radius {state.radius!r}",
        )
        if packet.unknown_types:
            self._note(
                rnd,
                stage("retrieval"),
                "engine",
                "no definition for: " + ", ".join(packet.unknown_types),
            )

        # (3) Gate every extraction answer against the current threshold.
        risk_base = self._base_prompt(ctx)
        state.gated_out = set()
        for i, binding in enumerate(team.debaters):
            answer = state.live_opinions.get(i)
            if self._is_exempt(ctx, answer):
                continue
            if not self._gate(state, ctx, rnd, binding, answer, risk_base, packet_text):
                state.gated_out.add(i)

        # (4) Cross-examination: survivors defend or update, gated debaters
        # revise; revised answers are re-gated before they may reach the judge.
        statements: dict[int, str] = {}
        for i, binding in enumerate(team.debaters):
            gated = i in state.gated_out
            prompt = self._ce_prompt(ctx, binding, i, state.live_opinions, packet_text, gated)
            reply = self._chat(
                binding.backend,
                rnd,
                stage("cross_examination"),
                f"debater_{binding.name}",
                prompt,
                binding.temperature,
            )
            revised = self._parse_answer(ctx, reply)
            if revised is None:
                self._note(
                    rnd,
                    stage("cross_examination"),
                    "engine",
                    f"debater_{binding.name} statement restates no parseable answer; "
                    "previous answer kept",
                )
                revised = state.live_opinions.get(i)
            state.live_opinions[i] = revised
            if not gated:
                statements[i] = reply
            elif self._is_exempt(ctx, revised) or self._gate(
                state, ctx, rnd, binding, revised, risk_base, packet_text
            ):
                state.gated_out.discard(i)
                statements[i] = reply
        critic_reply = self._chat(
            team.critic,
            rnd,
            stage("cross_examination"),
            "critic",
            self._critic_prompt(ctx, state.live_opinions, packet_text),
        )

        # (5) Judgement on this round's admissible statements only.
        if statements:
            verdict_text = self._chat(
                team.judge,
                rnd,
                stage("judgement"),
                "judge",
                self._judge_prompt(ctx, statements, critic_reply),
            )
            verdict = parse_judge(verdict_text, ctx.task)
        else:
            self._note(
                rnd, stage("judgement"), "engine", "no admissible statements; debate continues"
            )
            verdict = JudgeVerdict(VerdictKind.CONTINUE)

        state.round_index += 1
        state.radius = decay_radius(state.radius, self.config.drag.radius_decay)
        state.threshold = decay_threshold(state.threshold, self.config.adacp.beta)
        return verdict

    def _gate(
        self,
        state: DebateState,
        ctx: TaskContext,
        rnd: int,
        binding: DebaterBinding,
        answer: TriggerAnswer | ArgumentAnswer | None,
        risk_base: str,
        packet_text: str,
    ) -> bool:
        serialized = self._serialize(ctx, answer)
        risk = risk_score(self.config.scorer, risk_base, packet_text, serialized)
        ok = accept(risk, state.threshold)
        record = RiskRecord(ctx.task, rnd, binding.name, serialized, risk, ok)
        state.risk_log.append(record)
        self.risk_log.append(record)
        self._note(
            rnd,
            f"{ctx.task}.gate",
            "scorer",
            f"debater_{binding.name} answer {serialized!r} risk={risk:.6f} "
            f"threshold={state.threshold.value:.6f} accepted={ok}",
            prompt=f"{risk_base}\n\n{packet_text}" if packet_text else risk_base,
        )
        return ok

    def run_debate(self, ctx: TaskContext, query_vector: np.ndarray) -> _DebateOutcome:
        """Run one task's debate to verdict or to the round cap."""
        threshold0 = self.config.adacp.initial_threshold.get(ctx.task)
        if threshold0 is None:
            raise ValueError(
                f"no initial acceptance threshold for task {ctx.task!r}; calibrate first"
            )
        state = DebateState(
            task=ctx.task,
            query_vector=query_vector,
            radius=self.config.drag.initial_radius,
            threshold=RiskThreshold(value=float(threshold0), round_index=0),
            max_rounds=self.config.max_rounds,
            transcript=self.transcript,
        )
        last_threshold = state.threshold
        verdict = JudgeVerdict(VerdictKind.CONTINUE)
        while state.round_index < state.max_rounds:
            last_threshold = state.threshold
            verdict = self.run_round(state, ctx)
            if verdict.kind is not VerdictKind.CONTINUE:
                break
        if verdict.kind is VerdictKind.NO_EVENT:
            return _DebateOutcome("no_event")
        if verdict.kind is VerdictKind.AGREEMENT:
            if ctx.task == "ed":
                return _DebateOutcome("agreement", trigger_answers=verdict.trigger_answers)
            cleaned = self._clean_argument_rows(verdict.argument_rows, ctx.roles)
            return _DebateOutcome("agreement", argument_rows=cleaned)
        return self._adjudicate(state, ctx, last_threshold)

    def _adjudicate(
        self, state: DebateState, ctx: TaskContext, threshold: RiskThreshold
    ) -> _DebateOutcome:
        """Round cap reached without agreement: adopt the lowest-risk answer
        that passes the final round's gate, otherwise fail closed."""
        rnd = state.round_index
        best: tuple[float, int] | None = None
        packet_entries = [
            e for e in self.transcript if e.stage == f"{ctx.task}.retrieval" and e.role == "engine"
        ]
        packet_text = packet_entries[-1].text if packet_entries else ""
        risk_base = self._base_prompt(ctx)
        for i, binding in enumerate(self.config.team.debaters):
            answer = state.live_opinions.get(i)
            if self._is_exempt(ctx, answer):
                continue
            serialized = self._serialize(ctx, answer)
            risk = risk_score(self.config.scorer, risk_base, packet_text, serialized)
            ok = accept(risk, threshold)
            self._note(
                rnd,
                f"{ctx.task}.adjudication",
                "scorer",
                f"debater_{binding.name} answer {serialized!r} risk={risk:.6f} "
                f"threshold={threshold.value:.6f} accepted={ok}",
            )
            if ok and (best is None or risk < best[0]):
                best = (risk, i)
        if best is None:
            self._note(
                rnd,
                f"{ctx.task}.adjudication",
                "engine",
                "round cap reached with no acceptable answer; emitting empty result",
            )
            return _DebateOutcome("no_event")
        answer = state.live_opinions[best[1]]
        self._note(
            rnd,
            f"{ctx.task}.adjudication",
            "engine",
            f"round cap reached; adopting lowest-risk answer {self._serialize(ctx, answer)!r}",
        )
        if ctx.task == "ed":
            assert isinstance(answer, TriggerAnswer)
            return _DebateOutcome("agreement", trigger_answers=(answer,))
        assert isinstance(answer, ArgumentAnswer)
        return _DebateOutcome("agreement", argument_rows=answer.rows)

    # -- summarization

    def _summarize(
        self,
        ed_answer: TriggerAnswer,
        argument_rows: tuple[tuple[str, str | None], ...],
    ) -> EventRecord:
        record = EventRecord(
            sentence_id=self.sentence.id,
            event_type=ed_answer.event_type or "",
            trigger=ed_answer.trigger or "",
            arguments=tuple(
                (role, content) for role, content in argument_rows if content is not None
            ),
        )
        if self.config.use_llm_summarizer and self.config.team.summarizer is not None:
            record = self._llm_summarize(ed_answer, argument_rows, record)
        self._note(
            0,
            "session.summary",
            "summarizer",
            serialize_argument_table(record.event_type, record.arguments)
            + f"\ntrigger: {record.trigger}",
        )
        return record

    def _llm_summarize(
        self,
        ed_answer: TriggerAnswer,
        argument_rows: tuple[tuple[str, str | None], ...],
        fallback: EventRecord,
    ) -> EventRecord:
        agreed = (
            f"Detection answer: {serialize_trigger_answer(ed_answer)}\n"
            + serialize_argument_table(ed_answer.event_type or "", argument_rows)
        )
        reply = self._chat(
            self.config.team.summarizer,  # type: ignore[arg-type]
            0,
            "session.summary",
            "summarizer",
            render_prompt("summarizer", {"agreed": agreed}),
        )
        try:
            rows = parse_table(reply, EAE_HEADER)
        except ParseFailure:
            logger.warning("summarizer reply unparseable; using deterministic merge")
            return fallback
        return EventRecord(
            sentence_id=fallback.sentence_id,
            event_type=fallback.event_type,
            trigger=fallback.trigger,
            arguments=tuple(
                (role, content)
                for _, role, content in rows
                if role is not None and content is not None
            ),
        )


def run_session(
    sentence: Sentence,
    ontology: EventOntology,
    index: EmbeddedIndex,
    config: SessionConfig,
) -> SessionResult:
    """Run detection and, when an event is found, argument extraction.

    Only the sentence text ever enters a prompt; gold annotations are
    never available to this code path. A no-event outcome skips argument
    extraction entirely.
    """
    session = _Session(sentence, ontology, index, config)
    try:
        query_vector = l2_normalize(np.asarray(config.embedder.embed(sentence.text)))
        session._note(
            0,
            "session.embed",
            "embedder",
            f"query embedded, dim={config.embedder.dimension()}",
            prompt=sentence.text,
        )
        ed_outcome = session.run_debate(TaskContext(task="ed"), query_vector)
        records: list[EventRecord] = []
        if ed_outcome.kind == "agreement":
            for answer in ed_outcome.trigger_answers:
                if answer.event_type not in ontology:
                    session._note(
                        0,
                        "session.summary",
                        "engine",
                        f"agreed type {answer.event_type!r} unknown to the ontology; "
                        "emitting record without arguments",
                    )
                    records.append(session._summarize(answer, ()))
                    continue
                roles = ontology.lookup(answer.event_type or "").roles
                if not roles:
                    records.append(session._summarize(answer, ()))
                    continue
                eae_ctx = TaskContext(
                    task="eae",
                    event_type=answer.event_type,
                    trigger=answer.trigger,
                    roles=roles,
                )
                eae_outcome = session.run_debate(eae_ctx, query_vector)
                rows = eae_outcome.argument_rows if eae_outcome.kind == "agreement" else ()
                records.append(session._summarize(answer, rows))
    except BackendError as exc:
        # Abort the session but keep everything recorded so far inspectable.
        exc.transcript = session.transcript  # type: ignore[attr-defined]
        exc.sentence_id = sentence.id  # type: ignore[attr-defined]
        raise
    return SessionResult(
        sentence=sentence,
        records=records,
        transcript=session.transcript,
        risk_log=session.risk_log,
    )
