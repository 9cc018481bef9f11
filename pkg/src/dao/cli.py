"""Operator entry point: calibrate thresholds, run extraction, evaluate.

Usage:
    dao calibrate -c config.json [--corpus ref.jsonl]
    dao run -c config.json --input test.jsonl --out runs/exp1/ [--replay b.json]
    dao eval --pred p.jsonl --gold g.jsonl --task ed|eae|ee --metric exact|head|types

Exit codes: 0 ok, 1 usage error, 2 runtime (backend or I/O) failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .adacp import AdaCPConfig, CalibrationSet, calibrate, risk_score
from .backends import (
    EmbeddingBackend,
    HttpChatBackend,
    HttpEmbeddingBackend,
    HttpScoringBackend,
    ScoringBackend,
)
from .corpus import ReferenceEntry, Sentence, build_index, load_corpus
from .debate import (
    AgentTeam,
    DebaterBinding,
    SessionConfig,
    SessionResult,
    TriggerAnswer,
    canonical_argument_rows,
    detection_risk_input,
    argument_risk_input,
    serialize_argument_table,
    serialize_trigger_answer,
    run_session,
)
from .drag import DragConfig
from .errors import BackendError, DaoError, EmptyCalibrationSet
from .evalkit import (
    argument_head_f1,
    lenient_head_of_span,
    trigger_f1,
    type_overlap_f1,
    PRF,
)
from .ontology import EventOntology, load_ontology
from .replay import ReplayBundle

logger = logging.getLogger(__name__)

_DEFAULT_BACKENDS = {
    "replay_bundle": None,
    "chat": {
        "endpoint": "",
        "model": "",
        "api_key_env": "DAO_API_KEY",
        "timeout": 30.0,
        "max_attempts": 5,
        "backoff": 0.5,
    },
    "debaters": [
        {"name": "A", "model": "", "temperature": 0.0},
        {"name": "B", "model": "", "temperature": 0.0},
    ],
    "embedding": {"endpoint": "", "model": "", "dimension": 64, "api_key_env": "DAO_API_KEY"},
    "scoring": {"endpoint": ""},
}


@dataclasses.dataclass
class RunConfig:
    """Run settings; every default matches the engine's standard values
    (K=128, M=10, radius 1.35 decaying by 0.9, threshold decay 0.5,
    initial thresholds 1 for detection and 3 for argument extraction,
    three rounds)."""

    seed: int = 0
    max_rounds: int = 3
    workers: int = 1
    use_llm_summarizer: bool = False
    ontology: str = "ontology.jsonl"
    reference_corpus: str = "reference.jsonl"
    reference_split: str = "train"
    drag: DragConfig = dataclasses.field(default_factory=DragConfig)
    adacp: AdaCPConfig = dataclasses.field(default_factory=AdaCPConfig)
    backends: dict = dataclasses.field(default_factory=lambda: json.loads(json.dumps(_DEFAULT_BACKENDS)))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "max_rounds": self.max_rounds,
            "workers": self.workers,
            "use_llm_summarizer": self.use_llm_summarizer,
            "ontology": self.ontology,
            "reference_corpus": self.reference_corpus,
            "reference_split": self.reference_split,
            "drag": {
                "top_k": self.drag.top_k,
                "max_examples": self.drag.max_examples,
                "initial_radius": self.drag.initial_radius,
                "radius_decay": self.drag.radius_decay,
                "freeze_topk": self.drag.freeze_topk,
            },
            "adacp": {
                "delta": self.adacp.delta,
                "beta": self.adacp.beta,
                "initial_threshold": dict(self.adacp.initial_threshold),
            },
            "backends": self.backends,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        drag_data = data.get("drag", {})
        adacp_data = data.get("adacp", {})
        backends = json.loads(json.dumps(_DEFAULT_BACKENDS))
        backends.update(data.get("backends", {}))
        return cls(
            seed=data.get("seed", 0),
            max_rounds=data.get("max_rounds", 3),
            workers=data.get("workers", 1),
            use_llm_summarizer=data.get("use_llm_summarizer", False),
            ontology=data.get("ontology", "ontology.jsonl"),
            reference_corpus=data.get("reference_corpus", "reference.jsonl"),
            reference_split=data.get("reference_split", "train"),
            drag=DragConfig(
                top_k=drag_data.get("top_k", 128),
                max_examples=drag_data.get("max_examples", 10),
                initial_radius=drag_data.get("initial_radius", 1.35),
                radius_decay=drag_data.get("radius_decay", 0.9),
                freeze_topk=drag_data.get("freeze_topk", False),
            ),
            adacp=AdaCPConfig(
                delta=adacp_data.get("delta", 0.1),
                beta=adacp_data.get("beta", 0.5),
                initial_threshold=dict(
                    adacp_data.get("initial_threshold", {"ed": 1.0, "eae": 3.0})
                ),
            ),
            backends=backends,
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclasses.dataclass
class _Runtime:
    """Resolved backends plus loaded ontology and reference index."""

    config: RunConfig
    ontology: EventOntology
    reference_entries: list[ReferenceEntry]
    embedder: EmbeddingBackend
    scorer: ScoringBackend
    bundle: ReplayBundle | None

    def team_for(self, sentence_id: str) -> AgentTeam:
        if self.bundle is not None:
            return self.bundle.team_for(sentence_id)
        chat = self.config.backends["chat"]
        debaters = tuple(
            DebaterBinding(
                name=spec.get("name", "AB"[i] if i < 2 else str(i)),
                backend=HttpChatBackend(
                    endpoint=chat["endpoint"],
                    model=spec.get("model") or chat["model"],
                    api_key_env=chat.get("api_key_env"),
                    timeout=chat.get("timeout", 30.0),
                    max_attempts=chat.get("max_attempts", 5),
                    backoff=chat.get("backoff", 0.5),
                ),
                temperature=spec.get("temperature", 0.0),
            )
            for i, spec in enumerate(self.config.backends.get("debaters", []))
        )
        shared = HttpChatBackend(
            endpoint=chat["endpoint"],
            model=chat["model"],
            api_key_env=chat.get("api_key_env"),
            timeout=chat.get("timeout", 30.0),
            max_attempts=chat.get("max_attempts", 5),
            backoff=chat.get("backoff", 0.5),
        )
        return AgentTeam(debaters=debaters, critic=shared, judge=shared, summarizer=shared)


def _build_runtime(config: RunConfig, replay_path: str | None) -> _Runtime:
    ontology = load_ontology(config.ontology)
    reference_entries = load_corpus(config.reference_corpus)
    bundle_path = replay_path or config.backends.get("replay_bundle")
    if bundle_path:
        bundle = ReplayBundle.load(bundle_path)
        embedder: EmbeddingBackend = bundle.embedder()
        scorer: ScoringBackend = bundle.scorer()
    else:
        bundle = None
        emb = config.backends["embedding"]
        embedder = HttpEmbeddingBackend(
            endpoint=emb["endpoint"],
            model=emb["model"],
            dim=emb["dimension"],
            api_key_env=emb.get("api_key_env"),
        )
        scorer = HttpScoringBackend(endpoint=config.backends["scoring"]["endpoint"])
    return _Runtime(
        config=config,
        ontology=ontology,
        reference_entries=reference_entries,
        embedder=embedder,
        scorer=scorer,
        bundle=bundle,
    )


# ---------------------------------------------------------------------------
# calibrate


def _calibration_pairs(
    task: str, rows: list[ReferenceEntry], ontology: EventOntology
) -> list[tuple[str, str]]:
    """(input, gold answer) pairs for one task over the calib split."""
    pairs: list[tuple[str, str]] = []
    for entry in rows:
        sentence = entry.sentence
        if task == "ed":
            prompt = detection_risk_input(sentence, ontology)
            if entry.annotation.events:
                for event in entry.annotation.events:
                    pairs.append(
                        (prompt, serialize_trigger_answer(TriggerAnswer(event.event_type, event.trigger)))
                    )
            else:
                pairs.append((prompt, "[]"))
        else:
            for event in entry.annotation.events:
                if event.event_type not in ontology:
                    logger.warning(
                        "%s: type %r not in ontology; skipped for calibration",
                        sentence.id,
                        event.event_type,
                    )
                    continue
                roles = ontology.lookup(event.event_type).roles
                prompt = argument_risk_input(sentence, event.event_type, event.trigger, roles)
                filled = {role: content for role, content in event.arguments}
                answer = serialize_argument_table(
                    event.event_type, canonical_argument_rows(roles, filled)
                )
                pairs.append((prompt, answer))
    return pairs


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    runtime = _build_runtime(config, args.replay)
    corpus_path = args.corpus or config.reference_corpus
    rows = [e for e in load_corpus(corpus_path) if e.split == "calib"]
    thresholds = dict(config.adacp.initial_threshold)
    for task in ("ed", "eae"):
        override = thresholds.get(task)
        if override is not None:
            print(f"task={task} threshold fixed at {override} (calibration skipped)")
            continue
        pairs = _calibration_pairs(task, rows, runtime.ontology)
        if not pairs:
            raise EmptyCalibrationSet(
                f"no calibration pairs for task {task!r}; provide a calib split or an override"
            )
        calibration = CalibrationSet(
            pairs=tuple(pairs),
            risks=tuple(
                risk_score(runtime.scorer, prompt, "", answer) for prompt, answer in pairs
            ),
        )
        threshold = calibrate(list(calibration.risks), config.adacp.delta)
        thresholds[task] = threshold.value
        print(
            f"task={task} n={len(calibration.risks)} delta={config.adacp.delta} "
            f"q0={threshold.value}"
        )
    config.adacp = AdaCPConfig(
        delta=config.adacp.delta, beta=config.adacp.beta, initial_threshold=thresholds
    )
    config.save(args.config)
    print(f"thresholds written to {args.config}")
    return 0


# ---------------------------------------------------------------------------
# run


def _prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16] if prompt else ""


def _histograms(results: list[SessionResult], bins: int = 20) -> dict:
    """Per-(task, round) histogram of observed risks: 20 equal-width bins
    over [0, max risk seen in that round]."""
    by_round: dict[tuple[str, int], list[float]] = {}
    for result in results:
        for record in result.risk_log:
            by_round.setdefault((record.task, record.round_index), []).append(record.risk)
    out = []
    for (task, round_index), risks in sorted(by_round.items()):
        top = max(risks)
        if top <= 0.0:
            top = 1.0
        width = top / bins
        counts = [0] * bins
        for risk in risks:
            slot = min(int(risk / width), bins - 1)
            counts[slot] += 1
        out.append(
            {
                "task": task,
                "round": round_index,
                "bin_edges": [width * i for i in range(bins + 1)],
                "counts": counts,
            }
        )
    return {"bins": bins, "rounds": out}


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    for task in ("ed", "eae"):
        if config.adacp.initial_threshold.get(task) is None:
            raise EmptyCalibrationSet(
                f"no initial threshold for task {task!r}; run `dao calibrate` first"
            )
    runtime = _build_runtime(config, args.replay)
    split_entries = [
        e
        for e in runtime.reference_entries
        if config.reference_split in ("all", e.split)
    ]
    index = build_index(split_entries, runtime.embedder)
    inputs = load_corpus(args.input)

    def process(entry: ReferenceEntry) -> SessionResult:
        session_config = SessionConfig(
            team=runtime.team_for(entry.sentence.id),
            scorer=runtime.scorer,
            embedder=runtime.embedder,
            drag=config.drag,
            adacp=config.adacp,
            max_rounds=config.max_rounds,
            use_llm_summarizer=config.use_llm_summarizer,
        )
        return run_session(entry.sentence, runtime.ontology, index, session_config)

    out_dir = Path(args.out)
    try:
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(process, inputs))
        else:
            results = [process(entry) for entry in inputs]
    except BackendError as exc:
        transcript = getattr(exc, "transcript", None)
        if transcript:
            out_dir.mkdir(parents=True, exist_ok=True)
            aborted = out_dir / "aborted_transcript.jsonl"
            with open(aborted, "w", encoding="utf-8") as fh:
                for entry in transcript:
                    fh.write(
                        json.dumps(
                            {
                                "id": getattr(exc, "sentence_id", ""),
                                "round": entry.round_index,
                                "stage": entry.stage,
                                "role": entry.role,
                                "prompt_digest": _prompt_digest(entry.prompt),
                                "text": entry.text,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
            print(f"session aborted; partial transcript written to {aborted}", file=sys.stderr)
        raise

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.dumps(), encoding="utf-8")
    with open(out_dir / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(
                json.dumps(
                    {
                        "id": result.sentence.id,
                        "text": result.sentence.text,
                        "events": [
                            {
                                "type": record.event_type,
                                "trigger": record.trigger,
                                "arguments": [
                                    {"role": role, "content": content}
                                    for role, content in record.arguments
                                ],
                            }
                            for record in result.records
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    with open(out_dir / "transcripts.jsonl", "w", encoding="utf-8") as fh:
        for result in results:
            for entry in result.transcript:
                fh.write(
                    json.dumps(
                        {
                            "id": result.sentence.id,
                            "round": entry.round_index,
                            "stage": entry.stage,
                            "role": entry.role,
                            "prompt_digest": _prompt_digest(entry.prompt),
                            "text": entry.text,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    (out_dir / "risk_histogram.json").write_text(
        json.dumps(_histograms(results), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    extracted = sum(len(result.records) for result in results)
    print(f"processed {len(results)} sentence(s), extracted {extracted} event(s)")
    print(f"outputs written to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _read_predictions(path: str | Path) -> list[dict]:
    """Prediction rows without span validation; predictions may contain
    spans that do not occur in the sentence."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _trigger_items(rows: list[dict]) -> list[tuple[str, str, str]]:
    return [
        (row["id"], event["type"], event["trigger"])
        for row in rows
        for event in row.get("events", [])
    ]


def _argument_items(rows: list[dict]) -> list[tuple[str, str, str, str]]:
    return [
        (row["id"], event["type"], arg["role"], arg["content"])
        for row in rows
        for event in row.get("events", [])
        for arg in event.get("arguments", [])
        if arg.get("content") is not None
    ]


def _argument_overlap_items(rows: list[dict]) -> list[tuple[str, tuple, str]]:
    return [
        (row["id"], (event["type"], arg["role"]), arg["content"])
        for row in rows
        for event in row.get("events", [])
        for arg in event.get("arguments", [])
        if arg.get("content") is not None
    ]


def cmd_eval(args: argparse.Namespace) -> int:
    pred_rows = _read_predictions(args.pred)
    gold_rows = _read_predictions(args.gold)
    sentences: dict[str, Sentence] = {}
    texts: dict[str, str] = {}
    for row in gold_rows + pred_rows:
        texts.setdefault(row["id"], row["text"])
        try:
            sentences.setdefault(row["id"], Sentence.from_text(row["id"], row["text"]))
        except ValueError:
            logger.warning("sentence %s is not single-spaced; kept text-only", row["id"])

    note = None
    if args.task == "ed":
        preds, golds = _trigger_items(pred_rows), _trigger_items(gold_rows)
        if args.metric == "exact":
            score = trigger_f1(preds, golds)
        elif args.metric == "head":
            head_preds = [(s, t, w) for s, t, w in preds]
            score = argument_head_f1(
                [(s, t, "trigger", w) for s, t, w in head_preds],
                [(s, t, "trigger", w) for s, t, w in golds],
                sentences,
                head_extractor=lenient_head_of_span,
            )
        else:
            score = type_overlap_f1(preds, golds, texts)
            note = "span-overlap stand-in metric"
    else:
        if args.metric == "exact":
            score = trigger_f1(
                [(s, (t, r), c) for s, t, r, c in _argument_items(pred_rows)],
                [(s, (t, r), c) for s, t, r, c in _argument_items(gold_rows)],
            )
        elif args.metric == "head":
            score = argument_head_f1(
                _argument_items(pred_rows),
                _argument_items(gold_rows),
                sentences,
                head_extractor=lenient_head_of_span,
            )
        else:
            score = type_overlap_f1(
                _argument_overlap_items(pred_rows), _argument_overlap_items(gold_rows), texts
            )
            note = "span-overlap stand-in metric"

    _print_score(args.task, args.metric, score, note)
    report = {
        "task": args.task,
        "metric": args.metric,
        "precision": score.precision,
        "recall": score.recall,
        "f1": score.f1,
        "tp": score.tp,
        "fp": score.fp,
        "fn": score.fn,
    }
    if note:
        report["note"] = note
    report_path = args.report or f"{args.pred}.scores.json"
    Path(report_path).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"report written to {report_path}")
    return 0


def _print_score(task: str, metric: str, score: PRF, note: str | None) -> None:
    print(f"task={task} metric={metric}" + (f" ({note})" if note else ""))
    print("| metric    | value  |")
    print("|-----------|--------|")
    print(f"| precision | {score.precision:.4f} |")
    print(f"| recall    | {score.recall:.4f} |")
    print(f"| f1        | {score.f1:.4f} |")
    print(f"| tp/fp/fn  | {score.tp}/{score.fp}/{score.fn} |")


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1; runtime failures exit 2 (see main()).
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dao", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cal = sub.add_parser("calibrate", help="compute initial acceptance thresholds")
    p_cal.add_argument("-c", "--config", required=True)
    p_cal.add_argument("--corpus", default=None, help="corpus with a calib split")
    p_cal.add_argument("--replay", default=None, help="replay bundle for offline scoring")
    p_cal.set_defaults(func=cmd_calibrate)

    p_run = sub.add_parser("run", help="run extraction over a corpus")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("--input", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--replay", default=None, help="replay bundle for offline agents")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="score predictions against gold")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--task", required=True, choices=["ed", "eae", "ee"])
    p_eval.add_argument("--metric", default="exact", choices=["exact", "head", "types"])
    p_eval.add_argument("--report", default=None)
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DaoError, OSError) as exc:
        print(f"dao: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
