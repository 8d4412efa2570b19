"""Business rule value types and the ``< <slot, judgement, values...>, action>`` notation.

A rule is a ``<Condition, Action>`` pair.  The condition is a triple of slot
type, logical judgement and reference values; the action is optional and is
absent on terminal rules (written ``None``).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Union

from .errors import MalformedRule, UnknownJudgement

__all__ = [
    "LogicalJudgement",
    "Enumeration",
    "Numeric",
    "Condition",
    "BusinessRule",
    "ParseWarning",
    "Violation",
    "canonicalize_judgement",
    "normalize_width",
    "format_rule",
    "parse_rule",
    "parse_rule_block",
    "split_rule_fragments",
    "validate_rule",
    "numeric_reference",
]


class LogicalJudgement(enum.Enum):
    CONTAINS = "includes"
    EQUAL_TO = "equal to"
    LESS_THAN = "less than"
    GREATER_THAN = "greater than"
    LESS_THAN_OR_EQUAL = "less than or equal to"
    GREATER_THAN_OR_EQUAL = "greater than or equal to"

    @property
    def surface(self) -> str:
        return self.value

    @property
    def is_comparison(self) -> bool:
        return self not in (LogicalJudgement.CONTAINS, LogicalJudgement.EQUAL_TO)


_SYNONYMS = {
    LogicalJudgement.CONTAINS: (
        "includes", "contains", "contain", "include", "including", "包含", "包括",
    ),
    LogicalJudgement.EQUAL_TO: ("equal to", "equals", "equal", "is", "=", "==", "等于"),
    LogicalJudgement.LESS_THAN: ("less than", "lower than", "below", "fewer than", "<", "小于"),
    LogicalJudgement.GREATER_THAN: (
        "greater than", "more than", "higher than", "above", "exceeds", ">", "大于",
    ),
    LogicalJudgement.LESS_THAN_OR_EQUAL: (
        "less than or equal to", "at most", "no more than", "not more than",
        "<=", "≤", "小于等于", "小于或等于", "不超过",
    ),
    LogicalJudgement.GREATER_THAN_OR_EQUAL: (
        "greater than or equal to", "at least", "no less than", "not less than",
        ">=", "≥", "大于等于", "大于或等于", "不少于",
    ),
}

_SYNONYM_INDEX = {
    surface: judgement for judgement, surfaces in _SYNONYMS.items() for surface in surfaces
}

_WS = re.compile(r"\s+")


def canonicalize_judgement(surface: str) -> LogicalJudgement:
    """Map a judgement surface form ("includes", "大于", ">=") to its variant."""
    key = _WS.sub(" ", surface.strip()).casefold()
    try:
        return _SYNONYM_INDEX[key]
    except KeyError:
        raise UnknownJudgement(surface) from None


@dataclass(frozen=True)
class Enumeration:
    """Discrete reference values, in the order they appear in the source text."""

    values: tuple[str, ...]

    kind = "enumeration"

    def surfaces(self) -> tuple[str, ...]:
        return self.values


@dataclass(frozen=True)
class Numeric:
    """A single numeric threshold.

    ``text`` keeps the value exactly as written ("equivalent of USD 10,000");
    ``value`` is the first number in it and ``unit`` the remaining words.
    """

    text: str
    value: Decimal
    unit: Optional[str] = None

    kind = "numeric"

    def surfaces(self) -> tuple[str, ...]:
        return (self.text,)


ReferenceValues = Union[Enumeration, Numeric]

_NUMBER = re.compile(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")


def numeric_reference(text: str) -> Optional[Numeric]:
    """Build a :class:`Numeric` from verbatim text, or None if it holds no number."""
    text = _WS.sub(" ", text.strip())
    m = _NUMBER.search(text)
    if m is None:
        return None
    value = Decimal(m.group().replace(",", ""))
    rest = _WS.sub(" ", (text[: m.start()] + " " + text[m.end():])).strip()
    return Numeric(text=text, value=value, unit=rest or None)


@dataclass(frozen=True)
class Condition:
    slot_type: str
    judgement: LogicalJudgement
    reference: ReferenceValues


@dataclass(frozen=True)
class BusinessRule:
    condition: Condition
    action: Optional[str] = None

    @property
    def slot_type(self) -> str:
        return self.condition.slot_type

    @property
    def judgement(self) -> LogicalJudgement:
        return self.condition.judgement

    @property
    def is_terminal(self) -> bool:
        return self.action is None

    def __str__(self) -> str:
        return format_rule(self)


@dataclass(frozen=True)
class ParseWarning:
    code: str
    message: str
    fragment: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "fragment": self.fragment}


@dataclass(frozen=True)
class Violation:
    field: str
    code: str
    message: str = field(default="", compare=False)


# --------------------------------------------------------------------------
# formatting

def format_rule(rule: BusinessRule) -> str:
    cond = rule.condition
    parts = [cond.slot_type, cond.judgement.surface, *cond.reference.surfaces()]
    action = "None" if rule.action is None else rule.action
    return f"< <{', '.join(parts)}>, {action}>"


# --------------------------------------------------------------------------
# parsing

_WIDTH_TABLE = str.maketrans({
    "＜": "<", "＞": ">", "《": "<", "》": ">", "〈": "<", "〉": ">",
    "，": ",", "：": ":", "（": "(", "）": ")", "　": " ",
})

_NONE_ACTIONS = {"none", "无"}
_NUMBERING = re.compile(r"^\s*(?:\d+\s*[.)、]|[-*•])\s*")
# commas inside "10,000" do not separate fields
_FIELD_COMMA = re.compile(r"(?<!\d),|,(?!\d)")


def normalize_width(text: str) -> str:
    """Map the full-width brackets and punctuation used in CJK output to ASCII."""
    return text.translate(_WIDTH_TABLE)


def _clean(s: str) -> str:
    return _WS.sub(" ", s).strip()


def parse_rule(text: str) -> BusinessRule:
    """Parse one rule written in ``< <slot, judgement, v1, ...>, action>`` form.

    Leading list numbering, full-width punctuation, irregular whitespace and a
    missing final ``>`` are tolerated.
    """
    if not text or not text.strip():
        raise MalformedRule(0, "empty rule text")
    s = normalize_width(text)
    m = _NUMBERING.match(s)
    pos = m.end() if m else 0
    n = len(s)

    def skip_ws(i: int) -> int:
        while i < n and s[i].isspace():
            i += 1
        return i

    pos = skip_ws(pos)
    if pos >= n or s[pos] != "<":
        raise MalformedRule(pos, "expected '<' opening the rule")
    pos = skip_ws(pos + 1)
    if pos >= n or s[pos] != "<":
        raise MalformedRule(pos, "expected '<' opening the condition")
    pos += 1

    comma = s.find(",", pos)
    if comma < 0:
        raise MalformedRule(pos, "condition has no slot type field")
    slot = _clean(s[pos:comma])
    if not slot:
        raise MalformedRule(pos, "empty slot type")

    jstart = comma + 1
    # the judgement may itself be a symbol such as '>' so it ends at a comma
    jcomma = s.find(",", jstart)
    if jcomma < 0:
        raise MalformedRule(jstart, "condition has no reference value")
    jtext = s[jstart:jcomma].strip()
    if jtext.endswith(">") and jtext[:-1].strip().casefold() in _SYNONYM_INDEX \
            and jtext.casefold() not in _SYNONYM_INDEX:
        raise MalformedRule(jstart, "condition closes before any reference value")
    judgement = canonicalize_judgement(jtext)

    vstart = jcomma + 1
    close = _find_condition_close(s, vstart)
    if close < 0:
        raise MalformedRule(vstart, "condition is not closed with '>'")
    raw_values = [_clean(v) for v in _FIELD_COMMA.split(s[vstart:close])]
    values = [v for v in raw_values if v]
    if not values:
        raise MalformedRule(vstart, "no reference values")

    if judgement.is_comparison:
        reference = numeric_reference(", ".join(values))
        if reference is None:
            raise MalformedRule(vstart, "comparison judgement needs a numeric reference value")
    else:
        reference = Enumeration(tuple(values))

    rest = s[close + 1:].strip()
    if not rest or rest == ">":
        action = None
    else:
        if not rest.startswith(","):
            raise MalformedRule(close + 1, "expected ',' before the action")
        rest = rest[1:].strip()
        if rest.endswith(">"):
            rest = rest[:-1]
        rest = _clean(rest)
        if not rest:
            raise MalformedRule(close + 1, "empty action")
        action = None if rest.casefold() in _NONE_ACTIONS else rest

    return BusinessRule(Condition(slot, judgement, reference), action)


def _find_condition_close(s: str, start: int) -> int:
    """Index of the '>' closing the condition, i.e. one followed by ',' or the end."""
    i = s.find(">", start)
    while i >= 0:
        tail = s[i + 1:].lstrip()
        if tail.startswith(",") or tail == "" or tail == ">":
            return i
        i = s.find(">", i + 1)
    return -1


_FRAGMENT_START = re.compile(r"^\s*(?:\d+\s*[.)、]|(?:[-*•]\s*)?<\s*<)")
_INLINE_SPLIT = re.compile(r"(?<=>)\s*(?=(?:(?:\d+\s*[.)、]|[-*•])\s*)?<\s*<)")


def split_rule_fragments(text: str) -> list[str]:
    """Cut a block of model output into candidate rule fragments.

    A fragment starts at a numbered line or a ``< <`` opener.  Lines that do
    not start a fragment extend the previous one only while it is still open
    (does not yet end with '>'); otherwise they are treated as commentary.
    """
    fragments: list[str] = []
    open_fragment = False
    for line in normalize_width(text).splitlines():
        if not line.strip():
            open_fragment = False
            continue
        if _FRAGMENT_START.match(line):
            for piece in _INLINE_SPLIT.split(line.strip()):
                if piece.strip():
                    fragments.append(piece.strip())
            open_fragment = not fragments[-1].endswith(">")
        elif open_fragment:
            fragments[-1] = fragments[-1] + " " + line.strip()
            open_fragment = not fragments[-1].endswith(">")
    return fragments


def parse_rule_block(text: str) -> tuple[list[BusinessRule], list[ParseWarning]]:
    """Parse every rule in a numbered block; failures become warnings."""
    rules: list[BusinessRule] = []
    warnings: list[ParseWarning] = []
    for fragment in split_rule_fragments(text):
        try:
            rules.append(parse_rule(fragment))
        except (MalformedRule, UnknownJudgement) as exc:
            warnings.append(ParseWarning(type(exc).__name__, str(exc), fragment))
    return rules, warnings


# --------------------------------------------------------------------------
# validation

def validate_rule(rule: BusinessRule) -> list[Violation]:
    out: list[Violation] = []
    cond = rule.condition
    if not isinstance(cond.slot_type, str) or not cond.slot_type.strip():
        out.append(Violation("condition.slot_type", "EmptySlotType", "slot type is empty"))
    elif cond.slot_type != cond.slot_type.strip():
        out.append(Violation("condition.slot_type", "UntrimmedSlotType", "surrounding whitespace"))

    if not isinstance(cond.judgement, LogicalJudgement):
        out.append(Violation("condition.judgement", "UnknownJudgement", repr(cond.judgement)))
        return out

    ref = cond.reference
    if isinstance(ref, Enumeration):
        if cond.judgement.is_comparison:
            out.append(Violation(
                "condition.reference", "KindMismatch",
                f"{cond.judgement.surface} requires a numeric reference value",
            ))
        if not ref.values:
            out.append(Violation("condition.reference", "EmptyReference", "no reference values"))
        for i, v in enumerate(ref.values):
            if not isinstance(v, str) or not v.strip():
                out.append(Violation(f"condition.reference.values[{i}]", "EmptyValue", "empty value"))
    elif isinstance(ref, Numeric):
        if not ref.text.strip():
            out.append(Violation("condition.reference", "EmptyValue", "empty numeric text"))
        if not isinstance(ref.value, Decimal):
            out.append(Violation("condition.reference.value", "NotDecimal", repr(ref.value)))
    else:
        out.append(Violation("condition.reference", "UnknownReferenceKind", repr(ref)))

    if rule.action is not None:
        if not rule.action.strip():
            out.append(Violation("action", "EmptyAction", "action is blank; use None"))
        elif rule.action != rule.action.strip():
            out.append(Violation("action", "UntrimmedAction", "surrounding whitespace"))
        elif rule.action.casefold() in _NONE_ACTIONS:
            out.append(Violation("action", "NoneLiteral", "terminal rules carry no action"))
    return out
