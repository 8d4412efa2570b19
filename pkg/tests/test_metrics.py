from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ruleflow.corpus import Relation, rules_to_bio
from ruleflow.errors import (
    DegenerateGrid,
    DegenerateMatrix,
    LengthMismatch,
    PairCoverageError,
    UnknownLabel,
)
from ruleflow.metrics import (
    MISSING,
    ICCForm,
    align_rules,
    entity_f1,
    eval_dependencies,
    eval_judgement,
    evaluate_extraction,
    extract_entities,
    fleiss_kappa,
    icc,
    macro_f1,
)
from ruleflow.rules import BusinessRule, Condition, LogicalJudgement, parse_rule

J = LogicalJudgement
TAGS = ["O", "B-SlotType", "I-SlotType", "B-ReferenceValue", "I-ReferenceValue", "B-Action", "I-Action"]

# shown columns of the annotation table: currency types of popular including RMB USD JPY
ANNOTATOR_1 = ["B-SlotType", "I-SlotType", "O", "O", "O", "B-ReferenceValue", "I-ReferenceValue", "I-ReferenceValue"]
ANNOTATOR_2 = ["B-SlotType", "O", "O", "O", "O", "B-ReferenceValue", "B-ReferenceValue", "B-ReferenceValue"]
ANNOTATOR_3 = list(ANNOTATOR_1)

tag_seqs = st.integers(min_value=0, max_value=12).flatmap(
    lambda n: st.tuples(st.lists(st.sampled_from(TAGS), min_size=n, max_size=n),
                        st.lists(st.sampled_from(TAGS), min_size=n, max_size=n)))


# ---------------------------------------------------------------- entities

def test_entities_with_orphans():
    tags = ["I-Action", "I-Action", "B-SlotType", "I-ReferenceValue", "O", "B-Action"]
    # end index is inclusive in the library, exclusive in the oracle
    assert extract_entities(tags) == {(0, 1, "Action"), (2, 2, "SlotType"), (3, 3, "ReferenceValue"),
                                      (5, 5, "Action")}
    assert {(a, b + 1, k) for a, b, k in extract_entities(tags)} == oracles.spans(tags)


def test_identical_annotators():
    s = entity_f1(ANNOTATOR_1, ANNOTATOR_3)
    assert s.micro_f1 == s.macro_f1 == 1.0
    assert all(p.f1 == 1.0 for p in s.per_kind.values())


def test_annotator_two_disagreement():
    s = entity_f1(ANNOTATOR_1, ANNOTATOR_2)
    per, micro, macro = oracles.entity_scores(ANNOTATOR_1, ANNOTATOR_2)
    by_name = {k.value: v.f1 for k, v in s.per_kind.items()}
    assert by_name["SlotType"] == per["SlotType"] == 0.0
    assert by_name["ReferenceValue"] == per["ReferenceValue"] == 0.0
    assert s.micro_f1 == micro == 0.0
    # neither annotator marked an action in these columns, so that kind is vacuously perfect
    assert s.macro_f1 == pytest.approx(macro) == pytest.approx(1 / 3)


def test_all_outside_prediction():
    s = entity_f1(ANNOTATOR_1, ["O"] * len(ANNOTATOR_1))
    assert s.micro_f1 == 0.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        entity_f1(["O"], ["O", "O"])


@given(tag_seqs)
@settings(max_examples=300, deadline=None)
def test_entity_f1_matches_oracle(pair):
    gold, pred = pair
    s = entity_f1(gold, pred)
    per, micro, macro = oracles.entity_scores(gold, pred)
    assert {k.value: v.f1 for k, v in s.per_kind.items()} == pytest.approx(per, abs=1e-9)
    assert s.micro_f1 == pytest.approx(micro, abs=1e-9)
    assert s.macro_f1 == pytest.approx(macro, abs=1e-9)


@given(tag_seqs)
def test_entity_f1_symmetry(pair):
    gold, pred = pair
    a, b = entity_f1(gold, pred), entity_f1(pred, gold)
    assert a.micro_f1 == b.micro_f1
    assert a.micro_precision == b.micro_recall and a.micro_recall == b.micro_precision


def test_extraction_perfect_and_empty(by_id):
    doc = by_id["flight-booking"]
    assert evaluate_extraction(doc, doc.rules, doc.rules).micro_f1 == 1.0
    assert evaluate_extraction(doc, doc.rules, []).micro_f1 == 0.0


def test_extraction_missing_rule(by_id):
    doc = by_id["flight-booking"]
    # dropping "Number of Passengers" removes its two value entities (single, multiple) out of 15
    pred = doc.rules[:3] + doc.rules[4:]
    s = evaluate_extraction(doc, doc.rules, pred)
    assert s.micro_recall == pytest.approx(13 / 15)
    assert s.micro_precision == 1.0
    assert s.micro_f1 == pytest.approx(13 / 14)
    gold_bio, _ = rules_to_bio(doc.text, doc.rules)
    assert len(oracles.spans(gold_bio.tags)) == 15


# ---------------------------------------------------------------- macro F1

def test_macro_worked_example():
    s = macro_f1(list("AABB"), list("ABBB"), ["A", "B"])
    assert s.per_class_f1["A"] == pytest.approx(2 / 3)
    assert s.per_class_f1["B"] == pytest.approx(0.8)
    assert s.macro_f1 == pytest.approx(11 / 15)
    assert s.confusion == ((1, 1), (0, 2))


def test_macro_identical():
    assert macro_f1(list("ABCA"), list("ABCA"), list("ABC")).macro_f1 == 1.0


def test_macro_absent_class_counts_as_zero():
    assert macro_f1(list("AB"), list("AB"), list("ABC")).macro_f1 == pytest.approx(2 / 3)
    assert macro_f1(list("AB"), list("AB"), list("ABC"), present_only=True).macro_f1 == 1.0


def test_macro_errors():
    with pytest.raises(LengthMismatch):
        macro_f1(["A"], [], ["A"])
    with pytest.raises(UnknownLabel):
        macro_f1(["A"], ["Z"], ["A"])


labels = st.integers(min_value=1, max_value=12).flatmap(
    lambda n: st.tuples(st.lists(st.sampled_from("ABCDE"), min_size=n, max_size=n),
                        st.lists(st.sampled_from("ABCDE"), min_size=n, max_size=n)))


@given(labels, st.booleans(), st.randoms(use_true_random=False))
@settings(max_examples=300, deadline=None)
def test_macro_matches_oracle_and_is_permutation_invariant(pair, present_only, rnd):
    gold, pred = pair
    classes = list("ABCDE")
    expected = oracles.macro_f1(gold, pred, classes, present_only)
    assert macro_f1(gold, pred, classes, present_only).macro_f1 == pytest.approx(expected, abs=1e-9)
    order = list(range(len(gold)))
    rnd.shuffle(order)
    shuffled_classes = list(classes)
    rnd.shuffle(shuffled_classes)
    again = macro_f1([gold[i] for i in order], [pred[i] for i in order], shuffled_classes, present_only)
    assert again.macro_f1 == pytest.approx(expected, abs=1e-12)


def test_confusion_rows_sum_to_gold_counts():
    s = macro_f1(list("AABBC"), list("ABBCC"), list("ABC"))
    assert [sum(r) for r in s.confusion] == [2, 2, 1]


# ---------------------------------------------------------------- judgements

def test_judgement_perfect(by_id):
    doc = by_id["foreign-currency-deposit"]
    assert eval_judgement(doc.rules, doc.rules).macro_f1 == 1.0


def test_judgement_flip(by_id):
    doc = by_id["foreign-currency-deposit"]
    flipped = list(doc.rules)
    r = flipped[8]
    assert r.condition.judgement is J.GREATER_THAN
    flipped[8] = BusinessRule(Condition(r.condition.slot_type, J.LESS_THAN, r.condition.reference), r.action)
    # present classes: includes, equal to, <=, >, < ; ">" keeps 1 of 2, "<" gets a false positive
    s = eval_judgement(doc.rules, flipped)
    assert s.macro_f1 == pytest.approx(float(Fraction(11, 15)))
    assert eval_judgement(doc.rules, flipped, present_only=False).macro_f1 == pytest.approx(11 / 18)
    gold = [g.condition.judgement for g in doc.rules]
    pred = [p.condition.judgement for p in flipped]
    assert s.macro_f1 == pytest.approx(oracles.macro_f1(gold, pred, list(J), present_only=True))


def test_judgement_empty_prediction(by_id):
    doc = by_id["foreign-currency-deposit"]
    s = eval_judgement(doc.rules, [])
    assert s.macro_f1 == 0.0
    assert MISSING in s.labels and MISSING not in s.classes


def test_alignment_prefers_exact_then_overlap():
    gold = [parse_rule("< <Cabin Class, includes, a>, None>"), parse_rule("< <Payment Method, includes, b>, None>")]
    pred = [parse_rule("< <payment methods, includes, b>, None>"), parse_rule("< <cabin  class, equals, a>, None>"),
            parse_rule("< <Seat, includes, c>, None>")]
    assert align_rules(gold, pred) == [(0, 1), (1, 0), (None, 2)]


# ---------------------------------------------------------------- dependencies

def gold_predictions(doc):
    n = len(doc.rules)
    kinds = {(min(d.source, d.target), max(d.source, d.target)): d.kind for d in doc.dependencies}
    return [(a, b, kinds.get((a, b), Relation.NO)) for a in range(n) for b in range(a + 1, n)]


def test_dependencies_self_consistent(mini_corpus, dep_examples):
    for doc in list(mini_corpus) + list(dep_examples.values()):
        s = eval_dependencies(doc.dependencies, gold_predictions(doc), len(doc.rules))
        assert s.macro_f1 == 1.0 and s.accuracy == 1.0


def test_dependencies_all_no(by_id):
    doc = by_id["foreign-currency-deposit"]
    preds = [(a, b, Relation.NO) for a, b, _ in gold_predictions(doc)]
    s = eval_dependencies(doc.dependencies, preds, len(doc.rules), present_only=False)
    assert s.per_class_f1[Relation.SEQUENTIAL] == 0.0
    assert s.per_class_f1[Relation.CONDITIONAL] == 0.0
    assert s.per_class_f1[Relation.PARALLEL] == 0.0


def test_dependency_coverage(by_id):
    doc = by_id["ecommerce-shopping"]
    preds = gold_predictions(doc)
    with pytest.raises(PairCoverageError):
        eval_dependencies(doc.dependencies, preds[:-1], 5)
    with pytest.raises(PairCoverageError):
        eval_dependencies(doc.dependencies, preds + [preds[0]], 5)


def test_three_class_mode(by_id):
    doc = by_id["ecommerce-shopping"]
    preds = gold_predictions(doc)
    preds[0] = (0, 1, Relation.NO)
    s = eval_dependencies(doc.dependencies, preds, 5, three_class=True)
    assert s.classes == (Relation.SEQUENTIAL, Relation.PARALLEL)
    assert sum(sum(r) for r in s.confusion) == 5


# ---------------------------------------------------------------- agreement

def test_kappa_perfect():
    assert fleiss_kappa([["a", "a", "a"], ["b", "b", "b"]]) == 1.0


def test_kappa_worked_grid():
    grid = [list(r) for r in ("aab", "bbb", "abc", "ccc", "aaa", "abb", "cca", "bbc", "aaa", "cbc")]
    assert fleiss_kappa(grid) == pytest.approx(oracles.fleiss_kappa(grid), abs=1e-12)


def test_kappa_all_distinct_is_not_positive():
    grid = [["a", "b", "c"], ["b", "c", "a"], ["c", "a", "b"]]
    assert fleiss_kappa(grid) <= 0


def test_kappa_against_statsmodels():
    sm = pytest.importorskip("statsmodels.stats.inter_rater")
    grid = [list(r) for r in ("aab", "bbb", "abc", "ccc", "aaa", "abb")]
    table, _ = sm.aggregate_raters([[ord(c) for c in row] for row in grid])
    assert fleiss_kappa(grid) == pytest.approx(sm.fleiss_kappa(table), abs=1e-12)


@pytest.mark.parametrize("grid", [[["a", "b"]], [["a"], ["b"]], [["a", "b"], ["a"]]])
def test_kappa_degenerate(grid):
    with pytest.raises(DegenerateGrid):
        fleiss_kappa(grid)


grids = st.tuples(st.integers(2, 12), st.integers(2, 5)).flatmap(
    lambda nk: st.lists(st.lists(st.sampled_from("abcd"), min_size=nk[1], max_size=nk[1]),
                        min_size=nk[0], max_size=nk[0]))


@given(grids)
@settings(max_examples=300, deadline=None)
def test_kappa_matches_oracle(grid):
    assert fleiss_kappa(grid) == pytest.approx(oracles.fleiss_kappa(grid), abs=1e-9)


# classical two-way reliability example: 6 subjects rated by 4 judges
SF = [[9, 2, 5, 8], [6, 1, 3, 2], [8, 4, 6, 8], [7, 1, 2, 6], [10, 5, 6, 9], [6, 2, 4, 7]]


def test_icc_classical_example():
    assert icc(SF, ICCForm.SINGLE) == pytest.approx(0.29, abs=0.005)
    assert icc(SF, ICCForm.AVERAGE) == pytest.approx(0.62, abs=0.005)
    for form, avg in ((ICCForm.SINGLE, False), (ICCForm.AVERAGE, True)):
        assert icc(SF, form) == pytest.approx(oracles.icc(SF, avg), abs=1e-9)


def test_icc_six_by_three():
    m = [row[:3] for row in SF]
    for form, avg in ((ICCForm.SINGLE, False), (ICCForm.AVERAGE, True)):
        assert icc(m, form) == pytest.approx(oracles.icc(m, avg), abs=1e-9)


def test_icc_identical_raters():
    m = [[1, 1, 1], [3, 3, 3], [5, 5, 5]]
    assert icc(m, ICCForm.SINGLE) == 1.0 and icc(m) == 1.0


@pytest.mark.parametrize("m", [[[2, 2], [2, 2]], [[1, 2]], [[1], [2]], [[1, 2], [3]]])
def test_icc_degenerate(m):
    with pytest.raises(DegenerateMatrix):
        icc(m)


matrices = st.tuples(st.integers(2, 12), st.integers(2, 5)).flatmap(
    lambda nk: st.lists(st.lists(st.integers(1, 5), min_size=nk[1], max_size=nk[1]),
                        min_size=nk[0], max_size=nk[0]))


@given(matrices, st.booleans())
@settings(max_examples=300, deadline=None)
def test_icc_matches_oracle(m, average):
    form = ICCForm.AVERAGE if average else ICCForm.SINGLE
    expected = oracles.icc(m, average)
    if expected is None:
        with pytest.raises(DegenerateMatrix):
            icc(m, form)
    else:
        assert icc(m, form) == pytest.approx(expected, abs=1e-9)
