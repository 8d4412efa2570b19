import itertools
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruleflow.corpus import Document, Relation
from ruleflow.errors import AmbiguousLabel, EmptyOutput, MissingTranscript, UnparseableLabel
from ruleflow.fixtures import DEEPSEEK_V3_LABELS, gold_extraction_answer, scripted_responder
from ruleflow.llm import ReplayBackend, ScriptedBackend
from ruleflow.pipeline import (
    PipelineConfig,
    classify_dependency,
    enumerate_pairs,
    extract_output_section,
    extract_rules,
    parse_dependency_label,
    run_pipeline,
)
from ruleflow.prompts import PromptVariant
from ruleflow.rules import format_rule

V = PromptVariant


def fixed(text):
    return ScriptedBackend(responder=lambda request: text)


def test_extraction_replay_gives_gold_rules(by_id, transcript):
    doc = by_id["flight-booking"]
    result = extract_rules(doc, V.IMPLICIT_MAPPING, ReplayBackend(transcript("mini_corpus_p1.jsonl")),
                           PipelineConfig(model="fixture-gold"))
    assert result.rules == doc.rules
    assert result.warnings == ()


def test_every_fixture_document_replays(mini_corpus, transcript):
    backend = ReplayBackend(transcript("mini_corpus_p1.jsonl"))
    for doc in mini_corpus:
        assert extract_rules(doc, "p1", backend, PipelineConfig(model="fixture-gold")).rules == doc.rules


def test_empty_output(by_id):
    result = extract_rules(by_id["flight-booking"], "p1", fixed("Explain: nothing here.\nOutput:\n"))
    assert result.rules == ()
    assert [w.code for w in result.warnings] == ["EmptyOutput"]
    with pytest.raises(EmptyOutput):
        extract_rules(by_id["flight-booking"], "p1", fixed("Output:\n"), PipelineConfig(strict=True))


def test_full_width_output_matches_ascii(by_id):
    doc = by_id["ecommerce-shopping"]
    ascii_answer = gold_extraction_answer(doc)
    wide = ascii_answer.replace("<", "＜").replace(">", "＞").replace(",", "，").replace(":", "：")
    a = extract_rules(doc, "p1", fixed(ascii_answer)).rules
    b = extract_rules(doc, "p1", fixed(wide)).rules
    assert a == b == doc.rules


def test_last_output_section_wins():
    answer = ("Output: < <draft, includes, x>, None>\n"
              "Explain: revised below\n"
              "Output:\n1. < <final, includes, y>, None>\n")
    section = extract_output_section(answer, V.IMPLICIT_MAPPING)
    assert "final" in section and "draft" not in section


def test_pseudo_code_ignores_code_blocks(by_id):
    answer = ("Explain:\n```python\nselect_from(['< <fake, includes, z>, None>'])\n"
              "Output: < <fake, includes, z>, None>\n```\n"
              "Output:\n1. < <real, includes, y>, None>\n")
    rules = extract_rules(by_id["flight-booking"], "p5", fixed(answer)).rules
    assert [r.condition.slot_type for r in rules] == ["real"]


def test_explicit_mapping_linker_fallback(by_id):
    answer = ("Explain:\nWhen booking a flight ... This sentence corresponds to the business rule: "
              "< <Flight Type, includes, domestic flight, international flight>, fill in travel information>\n"
              "Next ... This sentence corresponds to the business rule: < <Cabin Class, includes, economy class>, None>\n")
    rules = extract_rules(by_id["flight-booking"], "p2", fixed(answer)).rules
    assert [r.condition.slot_type for r in rules] == ["Flight Type", "Cabin Class"]


@pytest.mark.parametrize("n, expected", [(5, 10), (1, 0), (7, 21), (0, 0)])
def test_pair_counts(n, expected):
    assert len(enumerate_pairs(range(n))) == expected


@given(st.integers(min_value=0, max_value=50))
def test_pairs_are_lexicographic_combinations(n):
    pairs = enumerate_pairs(list(range(n)))
    assert len(pairs) == n * (n - 1) // 2
    assert pairs == sorted(pairs) and all(a < b for a, b in pairs)


@pytest.mark.parametrize("response, expected", [
    ("sequential", Relation.SEQUENTIAL),
    ("no", Relation.NO),
    ("No.", Relation.NO),
    ("  Parallel\n", Relation.PARALLEL),
    ("these rules are parallel because they happen together, not sequential.\nAnswer: parallel",
     Relation.PARALLEL),
    ("I think the answer is conditional.\n\n(see above)", Relation.CONDITIONAL),
    ("两条规则是并行关系", Relation.PARALLEL),
    ("答案：顺序", Relation.SEQUENTIAL),
    ("**Sequential**", Relation.SEQUENTIAL),
    ("Nothing links them.\nno", Relation.NO),
])
def test_parse_label(response, expected):
    assert parse_dependency_label(response) is expected


def test_parse_label_errors():
    with pytest.raises(UnparseableLabel):
        parse_dependency_label("I cannot tell.")
    with pytest.raises(UnparseableLabel):
        parse_dependency_label("   ")
    with pytest.raises(AmbiguousLabel):
        parse_dependency_label("Reasoning.\nsequential or parallel")


def test_no_only_matches_whole_word():
    with pytest.raises(UnparseableLabel):
        parse_dependency_label("Nothing notable; unknown.")


def test_classify(by_id):
    doc = by_id["flight-booking"]
    pred = classify_dependency(doc.rules[0], doc.rules[1], doc, fixed("sequential"), pair=(0, 1))
    assert pred.pair == (0, 1) and pred.predicted is Relation.SEQUENTIAL


def test_deepseek_v3_case(by_id, transcript):
    doc = by_id["ecommerce-shopping"]
    result = run_pipeline(doc, "p1", ReplayBackend(transcript("ecommerce_deepseek_v3.jsonl")),
                          config=PipelineConfig(model="deepseek-v3"))
    assert result.extraction.rules == doc.rules
    assert len(result.predictions) == 10
    gold = {(d.source, d.target): d.kind for d in doc.dependencies}
    wrong = [p.pair for p in result.predictions if p.predicted is not gold.get(p.pair, Relation.NO)]
    assert sorted(wrong) == sorted(DEEPSEEK_V3_LABELS)


def test_stage_two_sees_no_gold(by_id):
    """Answers come only from extracted rules; gold dependencies are never consulted."""
    doc = by_id["ecommerce-shopping"]
    stripped = Document(doc.id, doc.domain, doc.text, (), ())
    backend = ScriptedBackend(responder=scripted_responder([doc]))
    a = run_pipeline(doc, "p1", backend).to_json()
    b = run_pipeline(stripped, "p1", backend).to_json()
    assert a == b


def test_zero_rules_zero_predictions(by_id):
    result = run_pipeline(by_id["flight-booking"], "p1", fixed("Output:\n"))
    assert result.predictions == () and result.graph.edges == ()


def test_context_flag_controls_prompt(by_id):
    doc = by_id["ecommerce-shopping"]
    prompts = []

    def responder(request):
        prompts.append(request.prompt)
        if request.prompt.kind == "extraction":
            return gold_extraction_answer(doc)
        return "no"

    run_pipeline(doc, "p1", ScriptedBackend(responder=responder), config=PipelineConfig(with_context=False))
    assert all(doc.text not in p.text for p in prompts if p.kind == "dependency")


def test_concurrency_does_not_change_output(by_id):
    doc = by_id["foreign-currency-deposit"]
    inner = scripted_responder([doc])

    def jittery(request):
        time.sleep(0.001 * (hash(request.prompt.text) % 5))
        return inner(request)

    backend = ScriptedBackend(responder=jittery)
    one = run_pipeline(doc, "p1", backend, concurrency=1).to_json()
    eight = run_pipeline(doc, "p1", backend, concurrency=8).to_json()
    assert one == eight
    assert len(run_pipeline(doc, "p1", backend).predictions) == 55


def test_keep_going_marks_failures(by_id):
    doc = by_id["ecommerce-shopping"]
    first_rule = format_rule(doc.rules[0])

    def responder(request):
        if request.prompt.kind == "extraction":
            return gold_extraction_answer(doc)
        return "hmm" if f"Rule A: {first_rule}" in request.prompt.text else "no"

    backend = ScriptedBackend(responder=responder)
    with pytest.raises(UnparseableLabel):
        run_pipeline(doc, "p1", backend)
    result = run_pipeline(doc, "p1", backend, config=PipelineConfig(keep_going=True))
    failed = [p for p in result.predictions if p.predicted is None]
    assert [p.pair for p in failed] == [(0, 1), (0, 2), (0, 3), (0, 4)]
    assert all(p.to_dict()["label"] == "error" for p in failed)
    assert len(result.predictions) == 10


def test_missing_transcript_propagates(by_id):
    with pytest.raises(MissingTranscript):
        run_pipeline(by_id["flight-booking"], "p1", ReplayBackend({}))


def test_bad_concurrency(by_id):
    with pytest.raises(ValueError):
        run_pipeline(by_id["flight-booking"], "p1", fixed("no"), concurrency=0)


def test_result_json_shape(by_id, transcript):
    doc = by_id["ecommerce-shopping"]
    result = run_pipeline(doc, "p1", ReplayBackend(transcript("ecommerce_deepseek_r1.jsonl")),
                          config=PipelineConfig(model="deepseek-r1"))
    obj = result.to_dict()
    assert set(obj) >= {"document_id", "variant", "rules", "warnings", "predictions", "graph"}
    assert [(p["a"], p["b"]) for p in obj["predictions"]] == list(itertools.combinations(range(5), 2))
    assert obj["rules"] == [format_rule(r) for r in doc.rules]
