import re

import pytest

import helpers
from dao.corpus import build_index
from dao.debate import (
    EventRecord,
    SessionConfig,
    TriggerAnswer,
    run_session,
    serialize_trigger_answer,
)
from dao.replay import ReplayBundle


def _run_scenario(seed, ontology, train_index, embedder):
    scenario = helpers.build_scenario(seed, ontology)
    config = scenario.build_config(embedder)
    result = run_session(scenario.sentence, ontology, train_index, config)
    return scenario, config, result


def _retrieval_entries(result, task="ed"):
    return [
        e
        for e in result.transcript
        if e.stage == f"{task}.retrieval" and e.text.startswith("Reference information:")
    ]


def _radius_notes(result, task="ed"):
    values = []
    for entry in result.transcript:
        if entry.stage == f"{task}.retrieval":
            match = re.search(r"at radius (\S+)$", entry.text)
            if match:
                values.append(float(match.group(1)))
    return values


def _gate_thresholds(result, task="ed"):
    values = []
    for entry in result.transcript:
        if entry.stage == f"{task}.gate":
            match = re.search(r"threshold=([0-9.]+)", entry.text)
            if match:
                values.append(float(match.group(1)))
    return values


# -- round flow


def test_immediate_agreement_single_round(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(0, ontology, train_index, embedder)  # immediate_agree
    assert scenario.flow == "immediate_agree"
    assert len(_retrieval_entries(result, "ed")) == 1
    assert len(result.records) == 1
    judge_rounds = [e.round_index for e in result.transcript if e.stage == "ed.judgement"]
    assert judge_rounds == [0]


def test_three_round_disagreement_hits_cap(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(3, ontology, train_index, embedder)  # cap_disagree
    assert scenario.flow == "cap_disagree"
    judge_entries = [e for e in result.transcript if e.stage == "ed.judgement" and e.role == "judge"]
    assert len(judge_entries) == 3
    radii = _radius_notes(result, "ed")
    assert radii[0] == 1.35
    assert radii[1] == 1.215
    assert radii[2] == pytest.approx(1.0935, rel=1e-12)
    assert any(e.stage == "ed.adjudication" for e in result.transcript)
    # Lowest-risk passing answer is adopted, so an event is still emitted.
    assert len(result.records) == 1


def test_threshold_decays_per_round(ontology, train_index, embedder):
    _, _, result = _run_scenario(4, ontology, train_index, embedder)  # all_rejected
    thresholds = sorted(set(_gate_thresholds(result, "ed")), reverse=True)
    assert thresholds == [1.0, 0.5, 0.25]


def test_no_event_skips_argument_extraction(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(2, ontology, train_index, embedder)  # no_event
    assert scenario.flow == "no_event"
    assert result.records == []
    assert not any(e.stage.startswith("eae.") for e in result.transcript)
    for binding in config.team.debaters:
        # Opinion plus one cross-examination; nothing for argument extraction.
        assert len(binding.backend.calls) == 2


def test_all_rejected_fails_closed(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(4, ontology, train_index, embedder)  # all_rejected
    assert scenario.flow == "all_rejected"
    assert result.records == []
    assert all(not record.accepted for record in result.risk_log)
    assert config.team.judge.calls == []


def test_gated_debater_revision_can_pass(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(5, ontology, train_index, embedder)  # gated_then_pass
    assert scenario.flow == "gated_then_pass"
    ed_records = [r for r in result.risk_log if r.task == "ed"]
    assert any(not r.accepted for r in ed_records)
    assert any(r.accepted for r in ed_records if r.debater == "A")
    assert len(result.records) == 1


def test_judge_never_sees_retrieval_text(ontology, train_index, embedder):
    for seed in (0, 1, 3, 5):
        scenario, config, result = _run_scenario(seed, ontology, train_index, embedder)
        packets = [e.text for e in result.transcript if e.text.startswith("Reference information:")]
        judge_prompts = [
            e.prompt for e in result.transcript if e.role == "judge" and e.prompt
        ]
        assert judge_prompts or scenario.flow == "all_rejected"
        for packet in packets:
            for prompt in judge_prompts:
                assert packet not in prompt
        # The critic, by contrast, does receive the packet.
        critic_prompts = [e.prompt for e in result.transcript if e.role == "critic"]
        assert any("Reference information:" in p for p in critic_prompts)


def test_gated_answers_never_reach_judge_in_gating_round(ontology, train_index, embedder):
    for seed in range(12):
        _, _, result = _run_scenario(seed, ontology, train_index, embedder)
        judge_by_round = {}
        for entry in result.transcript:
            if entry.role == "judge" and entry.prompt:
                judge_by_round.setdefault((entry.stage.split(".")[0], entry.round_index), []).append(
                    entry.prompt
                )
        for record in result.risk_log:
            if record.accepted:
                continue
            for prompt in judge_by_round.get((record.task, record.round_index), []):
                assert record.answer_text not in prompt


def test_transcript_contains_every_chat_call_in_order(ontology, train_index, embedder):
    scenario, config, result = _run_scenario(1, ontology, train_index, embedder)
    for i, binding in enumerate(config.team.debaters):
        role = f"debater_{binding.name}"
        transcript_calls = [
            (e.prompt, e.text) for e in result.transcript if e.role == role and e.prompt
        ]
        backend_calls = [(call[0][-1].content, call[1]) for call in binding.backend.calls]
        assert transcript_calls == backend_calls
    judge_transcript = [
        (e.prompt, e.text) for e in result.transcript if e.role == "judge" and e.prompt
    ]
    assert judge_transcript == [(c[0][-1].content, c[1]) for c in config.team.judge.calls]


def test_two_runs_byte_identical(ontology, train_index, embedder):
    outputs = []
    for _ in range(2):
        scenario = helpers.build_scenario(7, ontology)
        config = scenario.build_config(embedder)
        result = run_session(scenario.sentence, ontology, train_index, config)
        outputs.append(helpers.transcript_jsonl(result))
    assert outputs[0] == outputs[1]


def test_round_cap_never_exceeded(ontology, train_index, embedder):
    for seed in range(12):
        _, _, result = _run_scenario(seed, ontology, train_index, embedder)
        for task in ("ed", "eae"):
            rounds = {
                e.round_index
                for e in result.transcript
                if e.stage == f"{task}.judgement" or e.stage == f"{task}.retrieval"
            }
            assert len(rounds) <= 3


# -- replay fixtures


@pytest.fixture()
def replay_3a(ontology, train_entries, sentence_by_id):
    bundle = ReplayBundle.load("tests/fixtures/replay_table3a.json")
    embedder = bundle.embedder()
    index = build_index(train_entries, embedder)
    sentence = sentence_by_id("test-001")
    team = bundle.team_for("test-001")
    config = SessionConfig(team=team, scorer=bundle.scorer(), embedder=embedder)
    result = run_session(sentence, ontology, index, config)
    return team, result


def test_replay_revision_after_retrieval(replay_3a):
    team, result = replay_3a
    assert result.records == [
        EventRecord(
            sentence_id="test-001",
            event_type="Personnel:End-Position",
            trigger="formerly",
            arguments=(
                ("Person", "McCarthy"),
                ("Entity", "the Department of Trade and Industry"),
            ),
        )
    ]
    opinions = [e for e in result.transcript if e.stage == "ed.opinion" and e.role == "debater_A"]
    assert '["Personnel:Start-Position", "holding"]' in opinions[0].text
    revisions = [
        e
        for e in result.transcript
        if e.stage == "ed.cross_examination" and e.role == "debater_A" and e.round_index == 1
    ]
    assert '["Personnel:End-Position", "formerly"]' in revisions[0].text
    packets = [e.text for e in result.transcript if e.text.startswith("Reference information:")]
    assert any("his successor as house majority whip and his former deputy" in p for p in packets)


def test_replay_rejected_answer_kept_from_judge(replay_3a):
    team, result = replay_3a
    gated = serialize_trigger_answer(TriggerAnswer("Personnel:Start-Position", "holding"))
    round0_judge = [
        e.prompt
        for e in result.transcript
        if e.role == "judge" and e.round_index == 0 and e.prompt
    ]
    assert round0_judge
    assert all(gated not in prompt for prompt in round0_judge)


def test_replay_opinion_prompts_free_of_gold_labels(replay_3a):
    team, result = replay_3a
    opinion_prompts = [
        e.prompt for e in result.transcript if e.stage == "ed.opinion" and e.prompt
    ]
    assert opinion_prompts
    for prompt in opinion_prompts:
        assert '"Personnel:End-Position", "formerly"' not in prompt
        assert "Person | McCarthy" not in prompt


def test_replay_calibration_failure_yields_empty_record(ontology, train_entries, sentence_by_id):
    bundle = ReplayBundle.load("tests/fixtures/replay_table3b.json")
    embedder = bundle.embedder()
    index = build_index(train_entries, embedder)
    team = bundle.team_for("test-002")
    config = SessionConfig(team=team, scorer=bundle.scorer(), embedder=embedder)
    result = run_session(sentence_by_id("test-002"), ontology, index, config)
    assert result.records == []
    assert result.risk_log
    assert all(not record.accepted for record in result.risk_log)
    assert {r.round_index for r in result.risk_log} == {0, 1, 2}
    assert team.judge.calls == []
    assert not any(e.stage.startswith("eae.") for e in result.transcript)


def test_full_pipeline_scripted_life_die(ontology, train_index, embedder):
    sentence_text = "Witnesses said the blast killed the mayor instantly ."
    from dao.corpus import Sentence

    sentence = Sentence.from_text("pipeline-1", sentence_text)
    answer = '["Life:Die", "killed"]'
    eae_rows = (("Agent", None), ("Victim", "the mayor"), ("Instrument", "the blast"), ("Place", None))
    table = helpers.eae_table("Life:Die", eae_rows)
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defending {answer} ."), ("*", f"A: {table}"), ("*", f"A: keeping\n{table}")],
            [("*", f"B: {answer}"), ("*", f"B: agreeing {answer} ."), ("*", f"B: {table}"), ("*", f"B: keeping\n{table}")],
        ],
        [("*", "Assessment .")] * 4,
        [("*", helpers.ed_table("Life:Die", "killed")), ("*", table)],
    )
    config = SessionConfig(team=team, scorer=helpers.passthrough_scorer(), embedder=embedder)
    result = run_session(sentence, ontology, train_index, config)
    assert result.records == [
        EventRecord(
            sentence_id="pipeline-1",
            event_type="Life:Die",
            trigger="killed",
            arguments=(("Victim", "the mayor"), ("Instrument", "the blast")),
        )
    ]


def test_llm_summarizer_flag(ontology, train_index, embedder):
    from dao.corpus import Sentence

    sentence = Sentence.from_text("sum-1", "Witnesses said the blast killed the mayor instantly .")
    answer = '["Life:Die", "killed"]'
    eae_rows = (("Agent", None), ("Victim", "the mayor"), ("Instrument", None), ("Place", None))
    table = helpers.eae_table("Life:Die", eae_rows)
    condensed = helpers.eae_table("Life:Die", (("Victim", "the mayor"),))
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defend {answer} ."), ("*", f"A: {table}"), ("*", f"A: keep\n{table}")],
            [("*", f"B: {answer}"), ("*", f"B: agree {answer} ."), ("*", f"B: {table}"), ("*", f"B: keep\n{table}")],
        ],
        [("*", "Assessment .")] * 4,
        [("*", helpers.ed_table("Life:Die", "killed")), ("*", table)],
        summarizer_script=[("*", condensed)],
    )
    config = SessionConfig(
        team=team, scorer=helpers.passthrough_scorer(), embedder=embedder, use_llm_summarizer=True
    )
    result = run_session(sentence, ontology, train_index, config)
    assert result.records[0].arguments == (("Victim", "the mayor"),)
    assert len(team.summarizer.calls) == 1


def test_llm_summarizer_falls_back_on_garbage(ontology, train_index, embedder):
    from dao.corpus import Sentence

    sentence = Sentence.from_text("sum-2", "Witnesses said the blast killed the mayor instantly .")
    answer = '["Life:Die", "killed"]'
    eae_rows = (("Agent", None), ("Victim", "the mayor"), ("Instrument", None), ("Place", None))
    table = helpers.eae_table("Life:Die", eae_rows)
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defend {answer} ."), ("*", f"A: {table}"), ("*", f"A: keep\n{table}")],
            [("*", f"B: {answer}"), ("*", f"B: agree {answer} ."), ("*", f"B: {table}"), ("*", f"B: keep\n{table}")],
        ],
        [("*", "Assessment .")] * 4,
        [("*", helpers.ed_table("Life:Die", "killed")), ("*", table)],
        summarizer_script=[("*", "I cannot produce a table, sorry.")],
    )
    config = SessionConfig(
        team=team, scorer=helpers.passthrough_scorer(), embedder=embedder, use_llm_summarizer=True
    )
    result = run_session(sentence, ontology, train_index, config)
    # Deterministic merge of the agreed rows is kept when the reply is unusable.
    assert result.records[0].arguments == (("Victim", "the mayor"),)


def test_agreed_unknown_type_emits_record_without_arguments(ontology, train_index, embedder):
    from dao.corpus import Sentence

    sentence = Sentence.from_text("unk-1", "Something odd happened downtown yesterday .")
    answer = '["Made:Up", "happened"]'
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defend {answer} .")],
            [("*", f"B: {answer}"), ("*", f"B: agree {answer} .")],
        ],
        [("*", "Assessment .")] * 2,
        [("*", helpers.ed_table("Made:Up", "happened"))],
    )
    config = SessionConfig(team=team, scorer=helpers.passthrough_scorer(), embedder=embedder)
    result = run_session(sentence, ontology, train_index, config)
    assert result.records == [
        EventRecord(sentence_id="unk-1", event_type="Made:Up", trigger="happened", arguments=())
    ]
    assert not any(e.stage.startswith("eae.") for e in result.transcript)


def test_session_runs_on_empty_reference_index(ontology, embedder):
    from dao.corpus import Sentence, build_index

    empty_index = build_index([], embedder)
    sentence = Sentence.from_text("empty-1", "Rebels attacked the town at dawn .")
    answer = '["Conflict:Attack", "attacked"]'
    table = helpers.eae_table("Conflict:Attack", (("Target", "the town"),))
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defending {answer} ."), ("*", f"A: {table}"), ("*", f"A: keep\n{table}")],
            [("*", f"B: {answer}"), ("*", f"B: agreeing {answer} ."), ("*", f"B: {table}"), ("*", f"B: keep\n{table}")],
        ],
        [("*", "Assessment .")] * 4,
        [("*", helpers.ed_table("Conflict:Attack", "attacked")), ("*", table)],
    )
    config = SessionConfig(team=team, scorer=helpers.passthrough_scorer(), embedder=embedder)
    result = run_session(sentence, ontology, empty_index, config)
    assert len(result.records) == 1
    packets = [e.text for e in result.transcript if e.text.startswith("Reference information:")]
    assert packets and all("Examples:" not in p for p in packets)


def test_backend_failure_aborts_with_transcript_preserved(ontology, train_index, embedder):
    from dao.errors import BackendError, ScriptExhausted

    # Debater B's script runs dry during cross-examination.
    team = helpers.make_team(
        [
            [("*", 'A: ["Life:Die", "killed"]'), ("*", "A: I defend my answer .")],
            [("*", 'B: ["Life:Die", "killed"]')],
        ],
        [("*", "Assessment .")] * 2,
        [("*", helpers.ed_table("Life:Die", "killed"))],
    )
    config = SessionConfig(team=team, scorer=helpers.passthrough_scorer(), embedder=embedder)
    from dao.corpus import Sentence

    sentence = Sentence.from_text("abort-1", "The blast killed the mayor .")
    with pytest.raises(ScriptExhausted) as excinfo:
        run_session(sentence, ontology, train_index, config)
    assert isinstance(excinfo.value, BackendError)
    transcript = excinfo.value.transcript
    assert any(e.stage == "ed.opinion" for e in transcript)
    assert any(e.stage == "ed.retrieval" for e in transcript)


def test_multi_row_agreement_runs_one_eae_per_row(ontology, train_index, embedder):
    from dao.corpus import Sentence

    sentence = Sentence.from_text("multi-1", "The war is sure to kill many people .")
    ed_agreement = (
        "| event type | event trigger |\n| --- | --- |\n"
        "| Conflict:Attack | war |\n| Life:Die | kill |"
    )
    attack_rows = (("Attacker", None), ("Target", "many people"), ("Instrument", None), ("Place", None))
    die_rows = (("Agent", None), ("Victim", "many people"), ("Instrument", None), ("Place", None))
    attack_table = helpers.eae_table("Conflict:Attack", attack_rows)
    die_table = helpers.eae_table("Life:Die", die_rows)
    answer = '["Conflict:Attack", "war"]'
    team = helpers.make_team(
        [
            [("*", f"A: {answer}"), ("*", f"A: defending {answer} .")]
            + [("*", f"A: {attack_table}"), ("*", f"A: keep\n{attack_table}")]
            + [("*", f"A: {die_table}"), ("*", f"A: keep\n{die_table}")],
            [("*", f"B: {answer}"), ("*", f"B: agreeing {answer} .")]
            + [("*", f"B: {attack_table}"), ("*", f"B: keep\n{attack_table}")]
            + [("*", f"B: {die_table}"), ("*", f"B: keep\n{die_table}")],
        ],
        [("*", "Assessment .")] * 6,
        [("*", ed_agreement), ("*", attack_table), ("*", die_table)],
    )
    config = SessionConfig(team=team, scorer=helpers.passthrough_scorer(), embedder=embedder)
    result = run_session(sentence, ontology, train_index, config)
    assert [r.event_type for r in result.records] == ["Conflict:Attack", "Life:Die"]
    assert result.records[0].arguments == (("Target", "many people"),)
    assert result.records[1].arguments == (("Victim", "many people"),)
