from decimal import Decimal

import pytest
from hypothesis import given, settings

from ruleflow.errors import MalformedRule, UnknownJudgement
from ruleflow.rules import (
    BusinessRule,
    Condition,
    Enumeration,
    LogicalJudgement,
    Numeric,
    canonicalize_judgement,
    format_rule,
    parse_rule,
    parse_rule_block,
    split_rule_fragments,
    validate_rule,
)
from strategies import rules

J = LogicalJudgement

FLIGHT_OUTPUT = """\
1. < <Flight Type, includes, domestic flight, international flight>, fill in travel information>
2. < <Travel Information, includes, departure city, destination city, departure time>, choose a cabin class>
3. < <Cabin Class, includes, economy class, business class, first class>, provide the number of travelers and payment method>
4. < <Number of Passengers, includes, single, multiple>, None>
5. < <Payment Methods, includes, credit card, Alipay and WeChat Pay>, None>
"""


@pytest.mark.parametrize("surface, expected", [
    ("includes", J.CONTAINS),
    ("contains", J.CONTAINS),
    ("包含", J.CONTAINS),
    ("equal to", J.EQUAL_TO),
    ("  Equals ", J.EQUAL_TO),
    ("less than or equal to", J.LESS_THAN_OR_EQUAL),
    ("greater  than", J.GREATER_THAN),
    (">=", J.GREATER_THAN_OR_EQUAL),
    ("大于等于", J.GREATER_THAN_OR_EQUAL),
    ("小于", J.LESS_THAN),
])
def test_canonicalize(surface, expected):
    assert canonicalize_judgement(surface) is expected


def test_canonicalize_rejects_unknown():
    with pytest.raises(UnknownJudgement):
        canonicalize_judgement("resembles")


def test_canonical_surfaces_are_fixed_points():
    assert len(J) == 6
    for j in J:
        assert canonicalize_judgement(j.surface) is j


def test_format_examples():
    r = BusinessRule(
        Condition("Flight Type", J.CONTAINS, Enumeration(("domestic flight", "international flight"))),
        "fill in travel information",
    )
    assert format_rule(r) == (
        "< <Flight Type, includes, domestic flight, international flight>, fill in travel information>"
    )
    terminal = BusinessRule(
        Condition("Payment Methods", J.CONTAINS, Enumeration(("credit card", "Alipay and WeChat Pay"))),
        None,
    )
    assert format_rule(terminal) == "< <Payment Methods, includes, credit card, Alipay and WeChat Pay>, None>"
    minimal = BusinessRule(Condition("X", J.EQUAL_TO, Enumeration(("v",))), None)
    assert format_rule(minimal) == "< <X, equal to, v>, None>"
    assert str(minimal) == format_rule(minimal)


def test_parse_enumeration_rule():
    r = parse_rule("< <Cabin Class, includes, economy class, business class, first class>, "
                   "provide the number of travelers and payment method>")
    assert r.condition.reference == Enumeration(("economy class", "business class", "first class"))
    assert r.action == "provide the number of travelers and payment method"


def test_parse_numeric_rule_keeps_verbatim_text():
    r = parse_rule(
        "< <Regular Current Deposit Amount, greater than, equivalent of USD 10,000>, Provide valid ID "
        "document and PRC Customs Declaration Form with stamp or withdrawal receipt from original deposit bank>"
    )
    ref = r.condition.reference
    assert r.condition.judgement is J.GREATER_THAN
    assert isinstance(ref, Numeric)
    assert ref.text == "equivalent of USD 10,000"
    assert ref.value == Decimal("10000")
    assert ref.unit == "equivalent of USD"


@pytest.mark.parametrize("text", [
    "3. < <Cabin Class, includes, economy class, first class>, pay>",
    "< <Cabin Class, includes, economy class, first class>, pay",
    "  <  <Cabin Class ,  includes,economy class,   first class >,   pay  >",
    "＜＜Cabin Class，includes，economy class，first class＞，pay＞",
    "- < <Cabin Class, includes, economy class, first class>, pay>",
])
def test_parse_tolerates_noise(text):
    expected = BusinessRule(
        Condition("Cabin Class", J.CONTAINS, Enumeration(("economy class", "first class"))), "pay"
    )
    assert parse_rule(text) == expected


def test_none_sentinel():
    assert parse_rule("< <a, equals, b>, NONE>").action is None
    assert parse_rule("< <a, equals, b>, 无>").action is None
    assert parse_rule("< <a, equals, b>, None of these>").action == "None of these"


def test_chinese_rule():
    r = parse_rule("＜＜币种类型，包含，人民币，美元＞，选择钞汇类型＞")
    assert r.condition.judgement is J.CONTAINS
    assert r.condition.reference.values == ("人民币", "美元")
    assert r.action == "选择钞汇类型"


@pytest.mark.parametrize("text", [
    "",
    "no brackets here",
    "< <only slot>, act>",
    "< <slot, includes>, act>",
    "< <amount, greater than, several>, act>",
])
def test_malformed(text):
    with pytest.raises(MalformedRule):
        parse_rule(text)


def test_unknown_judgement_propagates():
    with pytest.raises(UnknownJudgement):
        parse_rule("< <slot, resembles, x>, act>")


def test_block_table_output():
    parsed, warnings = parse_rule_block(FLIGHT_OUTPUT)
    assert len(parsed) == 5 and warnings == []
    assert parsed[3].action is None


def test_block_empty():
    assert parse_rule_block("") == ([], [])


def test_block_one_corrupted_line():
    lines = FLIGHT_OUTPUT.splitlines()
    lines[2] = "3. < <Cabin Class, resembles, economy class>, go>"
    parsed, warnings = parse_rule_block("\n".join(lines))
    assert len(parsed) == 4
    assert len(warnings) == 1 and warnings[0].code == "UnknownJudgement"


def test_block_inline_and_continuation():
    block = ("1. < <a, includes, x>, go> 2. < <b, equals, y>,\n"
             "   continue here>\nSome closing prose.")
    parsed, warnings = parse_rule_block(block)
    assert [r.condition.slot_type for r in parsed] == ["a", "b"]
    assert parsed[1].action == "continue here"
    assert warnings == []


@given(rules())
@settings(max_examples=300, deadline=None)
def test_round_trip_property(rule):
    assert parse_rule(format_rule(rule)) == rule
    assert validate_rule(parse_rule(format_rule(rule))) == []


@given(rules())
@settings(max_examples=100, deadline=None)
def test_block_never_loses_fragments(rule):
    good = format_rule(rule)
    block = f"1. {good}\n2. < <broken, resembles, x>, y>\n3. < <also broken>\n4. {good}"
    fragments = split_rule_fragments(block)
    parsed, warnings = parse_rule_block(block)
    assert len(fragments) == 4
    assert len(parsed) + len(warnings) == len(fragments)
    assert len(parsed) == 2


def test_validate_examples():
    ok = parse_rule(FLIGHT_OUTPUT.splitlines()[0])
    assert validate_rule(ok) == []
    mismatch = BusinessRule(Condition("amount", J.GREATER_THAN, Enumeration(("many",))), None)
    assert [v.code for v in validate_rule(mismatch)] == ["KindMismatch"]
    empty = BusinessRule(Condition("  ", J.EQUAL_TO, Enumeration(("x",))), None)
    assert [v.code for v in validate_rule(empty)] == ["EmptySlotType"]


def test_fixture_rules_round_trip(mini_corpus):
    rules_seen = [r for d in mini_corpus for r in d.rules]
    assert len(rules_seen) == 21
    for r in rules_seen:
        assert parse_rule(format_rule(r)) == r
        assert validate_rule(r) == []
