"""Evaluation: strict entity F1 over BIO tags, Macro-F1, Fleiss' kappa and ICC.

Counting metrics are computed with exact fractions and converted to float at
the end, so a perfect prediction scores exactly 1.0.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Optional, Sequence, Union

from .corpus import BioSequence, DependencyLabel, EntityKind, Relation, rules_to_bio, tokenize
from .errors import (
    DegenerateGrid,
    DegenerateMatrix,
    LengthMismatch,
    PairCoverageError,
    UnknownLabel,
)
from .rules import BusinessRule, LogicalJudgement

__all__ = [
    "MISSING",
    "PRF",
    "EntityCounts",
    "EntityScore",
    "ClassificationScore",
    "extract_entities",
    "entity_counts",
    "entity_f1",
    "evaluate_extraction",
    "macro_f1",
    "classification_score",
    "align_rules",
    "judgement_pairs",
    "eval_judgement",
    "dependency_pairs",
    "eval_dependencies",
    "fleiss_kappa",
    "ICCForm",
    "icc",
]


class _Missing:
    """Placeholder label for an unaligned gold or predicted item."""

    def __repr__(self) -> str:
        return "MISSING"

    def __reduce__(self):
        return "MISSING"


MISSING = _Missing()


def _label_name(label) -> str:
    if label is MISSING:
        return "MISSING"
    if isinstance(label, enum.Enum):
        return str(label.value)
    return str(label)


def _ratio(num: int, den: int, empty: Fraction) -> Fraction:
    return Fraction(num, den) if den else empty


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    @classmethod
    def from_counts(cls, tp: int, n_pred: int, n_gold: int) -> "PRF":
        """P, R and F1 from counts.

        With nothing predicted and nothing in gold the score is vacuously 1;
        otherwise an empty side gives 0.
        """
        vacuous = n_pred == 0 and n_gold == 0
        one, zero = Fraction(1), Fraction(0)
        p = _ratio(tp, n_pred, one if vacuous else zero)
        r = _ratio(tp, n_gold, one if vacuous else zero)
        f = Fraction(0) if p + r == 0 else 2 * p * r / (p + r)
        return cls(float(p), float(r), float(f), tp, n_pred, n_gold)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "n_pred": self.n_pred, "n_gold": self.n_gold}


# --------------------------------------------------------------------------
# entity F1

def _tags(seq) -> list[str]:
    return list(seq.tags) if isinstance(seq, BioSequence) else list(seq)


def extract_entities(tags: Sequence[str]) -> set[tuple[int, int, str]]:
    """Maximal B-I spans as (start, end_inclusive, kind).

    An I- tag that does not continue an entity of its own kind opens a new one.
    """
    out = set()
    start = kind = None
    for i, tag in enumerate(list(tags) + ["O"]):
        prefix, _, k = tag.partition("-")
        continues = prefix == "I" and kind == k
        if kind is not None and not continues:
            out.add((start, i - 1, kind))
            start = kind = None
        if prefix in ("B", "I") and not continues:
            start, kind = i, k
    return out


@dataclass
class EntityCounts:
    """Per-kind (tp, n_pred, n_gold); addable across documents."""

    counts: dict = field(default_factory=lambda: {k: (0, 0, 0) for k in EntityKind})

    def __add__(self, other: "EntityCounts") -> "EntityCounts":
        return EntityCounts({
            k: tuple(a + b for a, b in zip(self.counts[k], other.counts[k])) for k in EntityKind
        })

    def score(self) -> "EntityScore":
        per_kind = {k: PRF.from_counts(*self.counts[k]) for k in EntityKind}
        pooled = [sum(c[i] for c in self.counts.values()) for i in range(3)]
        micro = PRF.from_counts(*pooled)
        macro = sum(Fraction(p.f1) for p in per_kind.values()) / len(per_kind)
        return EntityScore(per_kind, micro.f1, float(macro), micro.precision, micro.recall)


@dataclass(frozen=True)
class EntityScore:
    per_kind: dict
    micro_f1: float
    macro_f1: float
    micro_precision: float = 0.0
    micro_recall: float = 0.0

    def to_dict(self) -> dict:
        return {
            "per_kind": {k.value: v.to_dict() for k, v in self.per_kind.items()},
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
        }


def entity_counts(gold, pred) -> EntityCounts:
    g, p = _tags(gold), _tags(pred)
    if len(g) != len(p):
        raise LengthMismatch(f"gold has {len(g)} tokens, prediction has {len(p)}")
    ge, pe = extract_entities(g), extract_entities(p)
    counts = {}
    for kind in EntityKind:
        gk = {e for e in ge if e[2] == kind.value}
        pk = {e for e in pe if e[2] == kind.value}
        counts[kind] = (len(gk & pk), len(pk), len(gk))
    return EntityCounts(counts)


def entity_f1(gold, pred) -> EntityScore:
    """Strict span+kind matching of two tag sequences over the same tokens."""
    return entity_counts(gold, pred).score()


def evaluate_extraction(document, gold_rules: Sequence[BusinessRule],
                        pred_rules: Sequence[BusinessRule]) -> EntityScore:
    text = document if isinstance(document, str) else document.text
    gold_bio, _ = rules_to_bio(text, gold_rules)
    pred_bio, _ = rules_to_bio(text, pred_rules)
    return entity_f1(gold_bio, pred_bio)


# --------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class ClassificationScore:
    classes: tuple
    per_class: dict
    macro_f1: float
    accuracy: float
    labels: tuple  # row/column order of ``confusion``
    confusion: tuple  # confusion[i][j]: gold labels[i] predicted as labels[j]

    @property
    def per_class_f1(self) -> dict:
        return {c: p.f1 for c, p in self.per_class.items()}

    def to_dict(self) -> dict:
        return {
            "classes": [_label_name(c) for c in self.classes],
            "per_class": {_label_name(c): p.to_dict() for c, p in self.per_class.items()},
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "labels": [_label_name(c) for c in self.labels],
            "confusion": [list(row) for row in self.confusion],
        }

    def confusion_csv(self) -> str:
        names = [_label_name(c) for c in self.labels]
        rows = ["gold\\pred," + ",".join(names)]
        for name, row in zip(names, self.confusion):
            rows.append(name + "," + ",".join(str(x) for x in row))
        return "\n".join(rows) + "\n"


def classification_score(pairs: Iterable[tuple], class_set: Sequence[Hashable],
                         present_only: bool = False) -> ClassificationScore:
    """Score (gold, pred) pairs one-vs-rest over ``class_set``.

    Labels outside ``class_set`` (such as :data:`MISSING`) still count as
    errors for the classes they are confused with and appear in the confusion
    matrix, but get no F1 of their own.
    """
    pairs = list(pairs)
    classes = list(dict.fromkeys(class_set))
    if present_only:
        seen = {g for g, _ in pairs} | {p for _, p in pairs}
        classes = [c for c in classes if c in seen]
    per_class = {}
    for c in classes:
        tp = sum(1 for g, p in pairs if g == c and p == c)
        n_pred = sum(1 for _, p in pairs if p == c)
        n_gold = sum(1 for g, _ in pairs if g == c)
        per_class[c] = PRF.from_counts(tp, n_pred, n_gold) if (n_pred or n_gold) else PRF(0.0, 0.0, 0.0)
    if classes:
        macro = float(sum(Fraction(per_class[c].f1) for c in classes) / len(classes))
    else:
        macro = 1.0 if not pairs else 0.0
    correct = sum(1 for g, p in pairs if g == p)
    accuracy = float(Fraction(correct, len(pairs))) if pairs else 1.0

    extras = sorted({x for pair in pairs for x in pair if x not in classes}, key=_label_name)
    labels = list(dict.fromkeys(class_set))
    labels += [x for x in extras if x not in labels]
    pos = {c: i for i, c in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for g, p in pairs:
        matrix[pos[g]][pos[p]] += 1
    return ClassificationScore(
        classes=tuple(classes),
        per_class=per_class,
        macro_f1=macro,
        accuracy=accuracy,
        labels=tuple(labels),
        confusion=tuple(tuple(row) for row in matrix),
    )


def macro_f1(gold: Sequence, pred: Sequence, class_set: Sequence,
             present_only: bool = False) -> ClassificationScore:
    """Unweighted mean of per-class F1 over ``class_set``.

    Classes absent from both gold and prediction count as F1 = 0 unless
    ``present_only`` drops them from the average.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    allowed = set(class_set)
    for label in itertools.chain(gold, pred):
        if label not in allowed:
            raise UnknownLabel(f"label {label!r} is not in the class set")
    return classification_score(zip(gold, pred), class_set, present_only)


# --------------------------------------------------------------------------
# logical judgement

def _norm_slot(s: str) -> str:
    return " ".join(s.casefold().split())


def _slot_tokens(s: str) -> set[str]:
    return {t.casefold() for t, _ in tokenize(s) if any(ch.isalnum() for ch in t)}


def align_rules(gold_rules: Sequence[BusinessRule],
                pred_rules: Sequence[BusinessRule]) -> list[tuple[Optional[int], Optional[int]]]:
    """Pair predicted rules with gold rules.

    First pass: equal normalized slot type, earliest unused prediction.
    Second pass: largest slot-type token overlap (> 0), earliest on ties.
    Leftovers are paired with None.
    """
    used: set[int] = set()
    match: dict[int, int] = {}
    for gi, g in enumerate(gold_rules):
        key = _norm_slot(g.condition.slot_type)
        for pi, p in enumerate(pred_rules):
            if pi not in used and _norm_slot(p.condition.slot_type) == key:
                match[gi] = pi
                used.add(pi)
                break
    for gi, g in enumerate(gold_rules):
        if gi in match:
            continue
        gt = _slot_tokens(g.condition.slot_type)
        best, best_overlap = None, 0
        for pi, p in enumerate(pred_rules):
            if pi in used:
                continue
            overlap = len(gt & _slot_tokens(p.condition.slot_type))
            if overlap > best_overlap:
                best, best_overlap = pi, overlap
        if best is not None:
            match[gi] = best
            used.add(best)
    pairs: list[tuple[Optional[int], Optional[int]]] = [
        (gi, match.get(gi)) for gi in range(len(gold_rules))
    ]
    pairs += [(None, pi) for pi in range(len(pred_rules)) if pi not in used]
    return pairs


def judgement_pairs(gold_rules, pred_rules) -> list[tuple]:
    out = []
    for gi, pi in align_rules(gold_rules, pred_rules):
        g = gold_rules[gi].condition.judgement if gi is not None else MISSING
        p = pred_rules[pi].condition.judgement if pi is not None else MISSING
        out.append((g, p))
    return out


def eval_judgement(gold_rules: Sequence[BusinessRule], pred_rules: Sequence[BusinessRule],
                   present_only: bool = True) -> ClassificationScore:
    """Macro-F1 of the logical judgement over aligned rule pairs."""
    return classification_score(judgement_pairs(gold_rules, pred_rules),
                                list(LogicalJudgement), present_only)


# --------------------------------------------------------------------------
# dependencies

DEPENDENCY_CLASSES = (Relation.SEQUENTIAL, Relation.CONDITIONAL, Relation.PARALLEL, Relation.NO)


def _prediction_parts(pred):
    if isinstance(pred, tuple):
        a, b, label = pred
    else:
        a, b, label = pred.a, pred.b, pred.predicted
    if label == "error":  # failed classification in a stored result
        label = None
    elif isinstance(label, str):
        label = Relation(label)
    return a, b, label


def dependency_pairs(gold: Sequence[DependencyLabel], predictions: Sequence,
                     n_rules: int, three_class: bool = False) -> list[tuple]:
    expected = set(itertools.combinations(range(n_rules), 2))
    predicted = {}
    for pred in predictions:
        a, b, label = _prediction_parts(pred)
        key = (min(a, b), max(a, b))
        if key in predicted:
            raise PairCoverageError(f"pair {key} predicted twice")
        predicted[key] = label if label is not None else MISSING
    if set(predicted) != expected:
        missing = sorted(expected - set(predicted))[:5]
        extra = sorted(set(predicted) - expected)[:5]
        raise PairCoverageError(
            f"predictions must cover all {len(expected)} pairs of {n_rules} rules "
            f"(missing {missing}, unexpected {extra})"
        )
    gold_map: dict[tuple[int, int], Relation] = {}
    for label in gold:
        key = (min(label.source, label.target), max(label.source, label.target))
        gold_map.setdefault(key, label.kind)
    pairs = []
    for key in sorted(expected):
        g = gold_map.get(key, Relation.NO)
        if three_class and g is Relation.NO:
            continue
        p = predicted[key]
        if three_class and p is Relation.NO:
            p = MISSING
        pairs.append((g, p))
    return pairs


def eval_dependencies(gold: Sequence[DependencyLabel], predictions: Sequence, n_rules: int,
                      three_class: bool = False, present_only: bool = True) -> ClassificationScore:
    """Type-only Macro-F1 over every unordered rule pair (unlabelled pairs are "no")."""
    classes = DEPENDENCY_CLASSES[:3] if three_class else DEPENDENCY_CLASSES
    pairs = dependency_pairs(gold, predictions, n_rules, three_class)
    return classification_score(pairs, classes, present_only)


# --------------------------------------------------------------------------
# agreement

def fleiss_kappa(grid: Sequence[Sequence[Hashable]]) -> float:
    """Fleiss' kappa for an items x raters grid of category labels."""
    rows = [list(r) for r in grid]
    if len(rows) < 2:
        raise DegenerateGrid("need at least 2 items")
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise DegenerateGrid("every item needs the same number of ratings")
    if n < 2:
        raise DegenerateGrid("need at least 2 raters")
    N = len(rows)
    totals: Counter = Counter()
    p_items = Fraction(0)
    for row in rows:
        counts = Counter(row)
        totals.update(counts)
        p_items += Fraction(sum(c * c for c in counts.values()) - n, n * (n - 1))
    p_bar = p_items / N
    if p_bar == 1:
        return 1.0
    p_e = sum(Fraction(c, N * n) ** 2 for c in totals.values())
    if p_e == 1:
        raise DegenerateGrid("chance agreement is 1; kappa undefined")
    return float((p_bar - p_e) / (1 - p_e))


class ICCForm(enum.Enum):
    SINGLE = "two_way_random_single"
    AVERAGE = "two_way_random_average"


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def icc(ratings: Sequence[Sequence[Union[int, float]]], form: ICCForm = ICCForm.AVERAGE) -> float:
    """Two-way random-effects ICC for a subjects x raters matrix.

    ``ICCForm.SINGLE`` is the reliability of one rater, ``ICCForm.AVERAGE``
    that of the mean over all raters.
    """
    rows = [[_to_fraction(x) for x in r] for r in ratings]
    n = len(rows)
    if n < 2:
        raise DegenerateMatrix("need at least 2 subjects")
    k = len(rows[0])
    if any(len(r) != k for r in rows):
        raise DegenerateMatrix("ratings matrix is not rectangular")
    if k < 2:
        raise DegenerateMatrix("need at least 2 raters")
    grand = sum(sum(r) for r in rows) / (n * k)
    row_means = [sum(r) / k for r in rows]
    col_means = [sum(r[j] for r in rows) / n for j in range(k)]
    ss_rows = k * sum((m - grand) ** 2 for m in row_means)
    ss_cols = n * sum((m - grand) ** 2 for m in col_means)
    ss_total = sum((x - grand) ** 2 for r in rows for x in r)
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))
    form = ICCForm(form)
    if form is ICCForm.SINGLE:
        den = msr + (k - 1) * mse + k * (msc - mse) / n
    else:
        den = msr + (msc - mse) / n
    if den == 0:
        raise DegenerateMatrix("ICC undefined: no variance between subjects")
    return float((msr - mse) / den)
