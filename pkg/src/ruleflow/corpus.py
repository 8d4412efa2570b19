"""Documents, gold annotations, tokenization, BIO projection and corpus statistics."""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import jsonschema

from .errors import CorpusIOError, InvariantError, SchemaError, UnknownJudgement
from .rules import (
    BusinessRule,
    Condition,
    Enumeration,
    LogicalJudgement,
    Numeric,
    canonicalize_judgement,
    validate_rule,
)

__all__ = [
    "Relation",
    "EntityKind",
    "DependencyLabel",
    "Document",
    "BioSequence",
    "AlignmentWarning",
    "CorpusStats",
    "load_corpus",
    "save_corpus",
    "documents_from_json",
    "documents_to_json",
    "tokenize",
    "split_sentences",
    "rules_to_bio",
    "corpus_stats",
    "write_bio",
    "read_bio",
]


class Relation(enum.Enum):
    """Dependency type between two rules; NO only appears in predictions."""

    SEQUENTIAL = "sequential"
    CONDITIONAL = "conditional"
    PARALLEL = "parallel"
    NO = "no"


DEPENDENCY_KINDS = (Relation.SEQUENTIAL, Relation.CONDITIONAL, Relation.PARALLEL)


class EntityKind(enum.Enum):
    SLOT_TYPE = "SlotType"
    REFERENCE_VALUE = "ReferenceValue"
    ACTION = "Action"


BIO_TAGS = ("O",) + tuple(f"{p}-{k.value}" for k in EntityKind for p in "BI")


@dataclass(frozen=True)
class DependencyLabel:
    source: int
    target: int
    kind: Relation
    trigger: Optional[str] = None


@dataclass(frozen=True)
class Document:
    id: str
    domain: str
    text: str
    rules: tuple[BusinessRule, ...] = ()
    dependencies: tuple[DependencyLabel, ...] = ()
    source: str = "collected"
    sentences: Optional[tuple[tuple[int, int], ...]] = None

    @property
    def gold_rules(self) -> tuple[BusinessRule, ...]:
        return self.rules

    @property
    def gold_dependencies(self) -> tuple[DependencyLabel, ...]:
        return self.dependencies

    def check(self) -> None:
        """Raise InvariantError if rules or dependency labels are inconsistent."""
        n = len(self.rules)
        for i, rule in enumerate(self.rules):
            problems = validate_rule(rule)
            if problems:
                raise InvariantError(self.id, f"rules[{i}]: {problems[0].code} ({problems[0].field})")
        for i, dep in enumerate(self.dependencies):
            if not (0 <= dep.source < n and 0 <= dep.target < n):
                raise InvariantError(
                    self.id, f"dependencies[{i}]: index out of range for {n} rules"
                )
            if dep.source == dep.target:
                raise InvariantError(self.id, f"dependencies[{i}]: self-dependency")
            if dep.kind is Relation.NO:
                raise InvariantError(self.id, f"dependencies[{i}]: 'no' is not a gold dependency")
            if dep.trigger is not None and dep.kind is not Relation.CONDITIONAL:
                raise InvariantError(self.id, f"dependencies[{i}]: trigger on non-conditional edge")
        if self.sentences is not None:
            for a, b in self.sentences:
                if not (0 <= a <= b <= len(self.text)):
                    raise InvariantError(self.id, f"sentence range ({a}, {b}) outside text")


# --------------------------------------------------------------------------
# JSON persistence

CORPUS_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["id", "domain", "source", "text", "rules", "dependencies"],
        "additionalProperties": False,
        "properties": {
            "id": {"type": "string", "minLength": 1},
            "domain": {"type": "string"},
            "source": {"enum": ["collected", "synthetic"]},
            "text": {"type": "string"},
            "sentences": {
                "type": "array",
                "items": {
                    "type": "array", "items": {"type": "integer", "minimum": 0},
                    "minItems": 2, "maxItems": 2,
                },
            },
            "rules": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["condition", "action"],
                    "additionalProperties": False,
                    "properties": {
                        "condition": {
                            "type": "object",
                            "required": ["slot_type", "judgement", "reference"],
                            "additionalProperties": False,
                            "properties": {
                                "slot_type": {"type": "string"},
                                "judgement": {"type": "string"},
                                "reference": {
                                    "type": "object",
                                    "required": ["kind", "values"],
                                    "additionalProperties": False,
                                    "properties": {
                                        "kind": {"enum": ["enumeration", "numeric"]},
                                        "values": {
                                            "oneOf": [
                                                {
                                                    "type": "array",
                                                    "items": {"type": "string"},
                                                    "minItems": 1,
                                                },
                                                {
                                                    "type": "object",
                                                    "required": ["value", "unit"],
                                                    "additionalProperties": False,
                                                    "properties": {
                                                        "value": {"type": "string"},
                                                        "unit": {"type": ["string", "null"]},
                                                        "text": {"type": "string"},
                                                    },
                                                },
                                            ]
                                        },
                                    },
                                },
                            },
                        },
                        "action": {"type": ["string", "null"]},
                    },
                },
            },
            "dependencies": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["from", "to", "kind"],
                    "additionalProperties": False,
                    "properties": {
                        "from": {"type": "integer"},
                        "to": {"type": "integer"},
                        "kind": {"enum": ["sequential", "conditional", "parallel"]},
                        "trigger": {"type": ["string", "null"]},
                    },
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft7Validator(CORPUS_SCHEMA)


def _rule_from_json(obj: dict, path: str) -> BusinessRule:
    cond = obj["condition"]
    try:
        judgement = canonicalize_judgement(cond["judgement"])
    except UnknownJudgement as exc:
        raise SchemaError(f"{path}.condition.judgement", str(exc)) from None
    ref = cond["reference"]
    values = ref["values"]
    if ref["kind"] == "enumeration":
        if not isinstance(values, list):
            raise SchemaError(f"{path}.condition.reference.values", "enumeration needs a list")
        reference: Union[Enumeration, Numeric] = Enumeration(tuple(values))
    else:
        if not isinstance(values, dict):
            raise SchemaError(f"{path}.condition.reference.values", "numeric needs an object")
        try:
            value = Decimal(values["value"])
        except InvalidOperation:
            raise SchemaError(f"{path}.condition.reference.values.value", "not a decimal") from None
        unit = values["unit"]
        text = values.get("text")
        if text is None:
            text = f"{unit} {values['value']}" if unit else values["value"]
        reference = Numeric(text=text, value=value, unit=unit)
    return BusinessRule(Condition(cond["slot_type"], judgement, reference), obj["action"])


def _rule_to_json(rule: BusinessRule) -> dict:
    ref = rule.condition.reference
    if isinstance(ref, Numeric):
        values: Union[list, dict] = {"value": str(ref.value), "unit": ref.unit, "text": ref.text}
    else:
        values = list(ref.values)
    return {
        "condition": {
            "slot_type": rule.condition.slot_type,
            "judgement": rule.condition.judgement.surface,
            "reference": {"kind": ref.kind, "values": values},
        },
        "action": rule.action,
    }


def documents_from_json(data) -> list[Document]:
    """Validate parsed JSON against the corpus schema and build documents."""
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.json_path, err.message)
    docs: list[Document] = []
    seen: set[str] = set()
    for i, obj in enumerate(data):
        rules = tuple(_rule_from_json(r, f"$[{i}].rules[{j}]") for j, r in enumerate(obj["rules"]))
        deps = tuple(
            DependencyLabel(d["from"], d["to"], Relation(d["kind"]), d.get("trigger"))
            for d in obj["dependencies"]
        )
        sentences = obj.get("sentences")
        doc = Document(
            id=obj["id"],
            domain=obj["domain"],
            text=obj["text"],
            rules=rules,
            dependencies=deps,
            source=obj["source"],
            sentences=tuple(tuple(s) for s in sentences) if sentences is not None else None,
        )
        if doc.id in seen:
            raise InvariantError(doc.id, "duplicate document id")
        seen.add(doc.id)
        doc.check()
        docs.append(doc)
    return docs


def documents_to_json(documents: Iterable[Document]) -> list[dict]:
    out = []
    for doc in documents:
        obj = {
            "id": doc.id,
            "domain": doc.domain,
            "source": doc.source,
            "text": doc.text,
        }
        if doc.sentences is not None:
            obj["sentences"] = [list(s) for s in doc.sentences]
        obj["rules"] = [_rule_to_json(r) for r in doc.rules]
        obj["dependencies"] = [
            {"from": d.source, "to": d.target, "kind": d.kind.value, "trigger": d.trigger}
            for d in doc.dependencies
        ]
        out.append(obj)
    return out


def load_corpus(path: Union[str, Path]) -> list[Document]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot read corpus {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return documents_from_json(data)


def save_corpus(documents: Iterable[Document], path: Union[str, Path]) -> None:
    text = json.dumps(documents_to_json(documents), ensure_ascii=False, indent=2)
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot write corpus {path}: {exc}") from exc


# --------------------------------------------------------------------------
# tokenization

_CJK = (
    r"\u3040-\u30ff"  # kana
    r"\u3400-\u4dbf\u4e00-\u9fff\uf900-\ufaff"  # han
    r"\uac00-\ud7af"  # hangul syllables
)
_TOKEN = re.compile(rf"([{_CJK}])|((?:(?![{_CJK}])[^\W_])+)|(\S)")


def tokenize(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Split text into (token, (start, end)) pairs.

    CJK characters are single tokens, runs of other letters and digits form
    word tokens, and every remaining non-space character is its own token.
    """
    return [(m.group(), m.span()) for m in _TOKEN.finditer(text)]


_SENTENCE_END = re.compile(r"[。！？]|[.!?](?=\s|$)")


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Character ranges of sentences.

    CJK terminators always end a sentence; ASCII ``.!?`` only when followed by
    whitespace or the end of the text.
    """
    spans = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        spans.append((start, m.end()))
        start = m.end()
    spans.append((start, len(text)))
    out = []
    for a, b in spans:
        seg = text[a:b]
        if seg.strip():
            lead = len(seg) - len(seg.lstrip())
            trail = len(seg) - len(seg.rstrip())
            out.append((a + lead, b - trail))
    return out


def _norm_token(tok: str) -> str:
    return unicodedata.normalize("NFKC", tok).casefold()


# --------------------------------------------------------------------------
# BIO projection

@dataclass(frozen=True)
class BioSequence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError("tokens and tags differ in length")

    def is_well_formed(self) -> bool:
        prev = "O"
        for tag in self.tags:
            if tag not in BIO_TAGS:
                return False
            if tag.startswith("I-") and (prev == "O" or prev[2:] != tag[2:]):
                return False
            prev = tag
        return True


@dataclass(frozen=True)
class AlignmentWarning:
    rule_index: int
    kind: EntityKind
    surface: str
    reason: str

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_index,
            "kind": self.kind.value,
            "surface": self.surface,
            "reason": self.reason,
        }


def _rule_surfaces(rules: Sequence[BusinessRule]):
    for i, rule in enumerate(rules):
        yield i, EntityKind.SLOT_TYPE, rule.condition.slot_type
        for value in rule.condition.reference.surfaces():
            yield i, EntityKind.REFERENCE_VALUE, value
        if rule.action is not None:
            yield i, EntityKind.ACTION, rule.action


def rules_to_bio(
    text: str, rules: Sequence[BusinessRule]
) -> tuple[BioSequence, list[AlignmentWarning]]:
    """Project rule surfaces onto the tokenized text as BIO tags.

    Surfaces are placed longest first (ties keep rule order), each at its
    earliest occurrence whose tokens are all still untagged.
    """
    tokens = tokenize(text)
    norm = [_norm_token(t) for t, _ in tokens]
    tags = ["O"] * len(tokens)
    warnings: list[AlignmentWarning] = []

    surfaces = []
    for order, (i, kind, surface) in enumerate(_rule_surfaces(rules)):
        needle = [_norm_token(t) for t, _ in tokenize(surface)]
        surfaces.append((-len(needle), order, i, kind, surface, needle))
    surfaces.sort(key=lambda s: (s[0], s[1]))

    for _, _, i, kind, surface, needle in surfaces:
        if not needle:
            warnings.append(AlignmentWarning(i, kind, surface, "empty surface"))
            continue
        width = len(needle)
        found = -1
        seen_tagged = False
        for start in range(len(norm) - width + 1):
            if norm[start:start + width] == needle:
                if all(tags[j] == "O" for j in range(start, start + width)):
                    found = start
                    break
                seen_tagged = True
        if found < 0:
            reason = "only overlapping occurrences" if seen_tagged else "not found in text"
            warnings.append(AlignmentWarning(i, kind, surface, reason))
            continue
        tags[found] = f"B-{kind.value}"
        for j in range(found + 1, found + width):
            tags[j] = f"I-{kind.value}"

    warnings.sort(key=lambda w: (w.rule_index, list(EntityKind).index(w.kind), w.surface))
    return BioSequence(tuple(t for t, _ in tokens), tuple(tags)), warnings


def write_bio(sequences: Iterable[BioSequence], path: Union[str, Path]) -> None:
    blocks = []
    for seq in sequences:
        blocks.append("".join(f"{tok}\t{tag}\n" for tok, tag in zip(seq.tokens, seq.tags)))
    try:
        Path(path).write_text("\n".join(blocks), encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot write {path}: {exc}") from exc


def read_bio(path: Union[str, Path]) -> list[BioSequence]:
    try:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise CorpusIOError(f"cannot read {path}: {exc}") from exc
    out, toks, tags = [], [], []
    for line in lines:
        if not line:
            if toks:
                out.append(BioSequence(tuple(toks), tuple(tags)))
                toks, tags = [], []
            continue
        tok, tag = line.rsplit("\t", 1)
        toks.append(tok)
        tags.append(tag)
    if toks:
        out.append(BioSequence(tuple(toks), tuple(tags)))
    return out


# --------------------------------------------------------------------------
# statistics

_STAT_JUDGEMENT_KEYS = {
    LogicalJudgement.CONTAINS: "contains",
    LogicalJudgement.EQUAL_TO: "equal_to",
    LogicalJudgement.LESS_THAN: "less_than",
    LogicalJudgement.GREATER_THAN: "greater_than",
    LogicalJudgement.LESS_THAN_OR_EQUAL: "leq",
    LogicalJudgement.GREATER_THAN_OR_EQUAL: "geq",
}


def _zero_judgements() -> dict:
    return {j: 0 for j in LogicalJudgement}


def _zero_dependencies() -> dict:
    return {k: 0 for k in DEPENDENCY_KINDS}


@dataclass(frozen=True)
class CorpusStats:
    texts: int = 0
    sentences: int = 0
    rules: int = 0
    tokens: int = 0
    judgement_histogram: dict = field(default_factory=_zero_judgements)
    dependency_histogram: dict = field(default_factory=_zero_dependencies)

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            texts=self.texts + other.texts,
            sentences=self.sentences + other.sentences,
            rules=self.rules + other.rules,
            tokens=self.tokens + other.tokens,
            judgement_histogram={
                j: self.judgement_histogram[j] + other.judgement_histogram[j]
                for j in LogicalJudgement
            },
            dependency_histogram={
                k: self.dependency_histogram[k] + other.dependency_histogram[k]
                for k in DEPENDENCY_KINDS
            },
        )

    def as_row(self) -> dict:
        """Flat mapping in the column order of the dataset statistics table."""
        row = {
            "texts": self.texts,
            "sentences": self.sentences,
            "rules": self.rules,
            "tokens": self.tokens,
        }
        for j in LogicalJudgement:
            row[_STAT_JUDGEMENT_KEYS[j]] = self.judgement_histogram[j]
        for k in DEPENDENCY_KINDS:
            row[k.value] = self.dependency_histogram[k]
        return row


def corpus_stats(documents: Iterable[Document]) -> CorpusStats:
    total = CorpusStats()
    for doc in documents:
        judgements = _zero_judgements()
        for rule in doc.rules:
            judgements[rule.condition.judgement] += 1
        deps = _zero_dependencies()
        for dep in doc.dependencies:
            deps[dep.kind] += 1
        n_sent = len(doc.sentences) if doc.sentences is not None else len(split_sentences(doc.text))
        total = total + CorpusStats(
            texts=1,
            sentences=n_sent,
            rules=len(doc.rules),
            tokens=len(tokenize(doc.text)),
            judgement_histogram=judgements,
            dependency_histogram=deps,
        )
    return total
