"""Two-stage pipeline: rule extraction, then pairwise dependency classification."""

from __future__ import annotations

import itertools
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .corpus import Document, Relation
from .errors import AmbiguousLabel, EmptyOutput, RuleflowError, UnparseableLabel
from .graph import RuleFlowGraph, build_graph
from .llm import CompletionRequest, Exchange
from .prompts import PromptEngine, PromptVariant, default_engine, resolve_variant
from .rules import BusinessRule, ParseWarning, format_rule, normalize_width, parse_rule_block

__all__ = [
    "PipelineConfig",
    "ExtractionResult",
    "DependencyPrediction",
    "PipelineResult",
    "extract_output_section",
    "extract_rules",
    "enumerate_pairs",
    "parse_dependency_label",
    "classify_dependency",
    "run_pipeline",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    model: str = "default"
    temperature: float = 0.0
    max_tokens: Optional[int] = None
    engine: Optional[PromptEngine] = None
    with_context: bool = True
    strict: bool = False
    keep_going: bool = False

    def prompt_engine(self) -> PromptEngine:
        return self.engine or default_engine()

    def request(self, bundle) -> CompletionRequest:
        return CompletionRequest(bundle, self.model, self.temperature, self.max_tokens)


@dataclass(frozen=True)
class ExtractionResult:
    document_id: str
    variant: PromptVariant
    rules: tuple[BusinessRule, ...]
    warnings: tuple[ParseWarning, ...]
    exchange: Optional[Exchange]
    model: str = ""

    def to_dict(self) -> dict:
        return {
            "document_id": self.document_id,
            "variant": self.variant.value,
            "model": self.model,
            "rules": [format_rule(r) for r in self.rules],
            "warnings": [w.to_dict() for w in self.warnings],
            "exchange": self.exchange.to_dict() if self.exchange else None,
        }


@dataclass(frozen=True)
class DependencyPrediction:
    a: int
    b: int
    predicted: Optional[Relation]  # None marks a failed classification
    exchange: Optional[Exchange] = None
    error: Optional[str] = None

    @property
    def pair(self) -> tuple[int, int]:
        return self.a, self.b

    def to_dict(self) -> dict:
        out = {"a": self.a, "b": self.b,
               "label": self.predicted.value if self.predicted else "error"}
        if self.error:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class PipelineResult:
    extraction: ExtractionResult
    predictions: tuple[DependencyPrediction, ...]
    graph: RuleFlowGraph

    def to_dict(self) -> dict:
        ex = self.extraction
        return {
            "document_id": ex.document_id,
            "variant": ex.variant.value,
            "model": ex.model,
            "rules": [format_rule(r) for r in ex.rules],
            "warnings": [w.to_dict() for w in ex.warnings],
            "predictions": [p.to_dict() for p in self.predictions],
            "graph": self.graph.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"


# --------------------------------------------------------------------------
# stage 1

_OUTPUT_HEADER = re.compile(
    r"^[ \t#>*]*(?:\*\*)?(?:Output|输出)(?:\*\*)?[ \t]*[:：](?:\*\*)?", re.IGNORECASE | re.MULTILINE
)
_FENCE = re.compile(r"```.*?(?:```|\Z)", re.DOTALL)
_LINKERS = ("This sentence corresponds to the business rule:", "该句对应的业务规则为：",
            "该句对应的业务规则为:")


def extract_output_section(response: str, variant: PromptVariant) -> str:
    """Text holding the rules: the last "Output" section of the response.

    Code fences are dropped first.  For the explicit-mapping variant the rules
    written after each per-sentence linker are used when no Output section
    holds any.
    """
    text = _FENCE.sub("", normalize_width(response))
    headers = list(_OUTPUT_HEADER.finditer(text))
    section = text[headers[-1].end():] if headers else ""
    if variant is PromptVariant.EXPLICIT_MAPPING and not parse_rule_block(section)[0]:
        linked = []
        for line in text.splitlines():
            for linker in _LINKERS:
                idx = line.find(normalize_width(linker))
                if idx >= 0:
                    linked.append(line[idx + len(normalize_width(linker)):].strip())
        if linked:
            section = "\n".join(linked)
    return section


def extract_rules(document: Document, variant: Union[PromptVariant, str], backend,
                  config: Optional[PipelineConfig] = None) -> ExtractionResult:
    config = config or PipelineConfig()
    variant = resolve_variant(variant)
    bundle = config.prompt_engine().extraction(variant, document.text)
    exchange = backend.complete(config.request(bundle))
    section = extract_output_section(exchange.response_text, variant)
    rules, warnings = parse_rule_block(section)
    if not rules:
        if config.strict:
            raise EmptyOutput(f"document {document.id!r}: no rules found in model output")
        warnings.append(ParseWarning("EmptyOutput", "no business rules found in the response"))
    return ExtractionResult(document.id, variant, tuple(rules), tuple(warnings),
                            exchange, config.model)


# --------------------------------------------------------------------------
# stage 2

def enumerate_pairs(rules: Sequence) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(len(rules)), 2))


_KEYWORDS = (
    (Relation.SEQUENTIAL, re.compile(r"\bsequential\b|顺序", re.IGNORECASE)),
    (Relation.CONDITIONAL, re.compile(r"\bconditional\b|条件", re.IGNORECASE)),
    (Relation.PARALLEL, re.compile(r"\bparallel\b|并行", re.IGNORECASE)),
    (Relation.NO, re.compile(r"\bno\b|无", re.IGNORECASE)),
)


def _hits(text: str) -> list[tuple[int, Relation]]:
    return sorted((m.start(), rel) for rel, rx in _KEYWORDS for m in rx.finditer(text))


def parse_dependency_label(response: str) -> Relation:
    """Read the relation from a model answer.

    The last non-empty line decides when it names exactly one relation; if it
    names none, the earliest relation anywhere in the response is used.
    """
    lines = [ln for ln in response.strip().splitlines() if ln.strip()]
    if not lines:
        raise UnparseableLabel("")
    last = lines[-1]
    found = {rel for _, rel in _hits(last)}
    if len(found) > 1:
        raise AmbiguousLabel(last.strip(), {r.value for r in found})
    if found:
        return found.pop()
    hits = _hits(response)
    if not hits:
        raise UnparseableLabel(response.strip()[:80])
    return hits[0][1]


def classify_dependency(rule_a: BusinessRule, rule_b: BusinessRule, context, backend,
                        config: Optional[PipelineConfig] = None,
                        pair: tuple[int, int] = (0, 1)) -> DependencyPrediction:
    config = config or PipelineConfig()
    text = None
    if context is not None:
        text = context if isinstance(context, str) else context.text
    bundle = config.prompt_engine().dependency(rule_a, rule_b, text)
    exchange = backend.complete(config.request(bundle))
    return DependencyPrediction(pair[0], pair[1], parse_dependency_label(exchange.response_text),
                                exchange)


def run_pipeline(document: Document, variant: Union[PromptVariant, str], backend,
                 concurrency: int = 1, config: Optional[PipelineConfig] = None) -> PipelineResult:
    """Extract rules, classify every rule pair, and build the rule-flow graph.

    Only the extracted rules and the document text reach stage two.  Results
    are ordered by pair regardless of completion order.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    config = config or PipelineConfig()
    extraction = extract_rules(document, variant, backend, config)
    rules = extraction.rules
    context = document.text if config.with_context else None

    def job(pair: tuple[int, int]) -> DependencyPrediction:
        a, b = pair
        try:
            return classify_dependency(rules[a], rules[b], context, backend, config, pair)
        except RuleflowError as exc:
            if not config.keep_going:
                raise
            log.warning("document %s pair %s failed: %s", document.id, pair, exc)
            return DependencyPrediction(a, b, None, None, f"{type(exc).__name__}: {exc}")

    pairs = enumerate_pairs(rules)
    if concurrency == 1 or len(pairs) <= 1:
        predictions = [job(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            predictions = list(pool.map(job, pairs))
    predictions.sort(key=lambda p: p.pair)
    graph = build_graph(rules, predictions)
    return PipelineResult(extraction, tuple(predictions), graph)
