"""Bundled fixture corpora and the scripted model answers behind the bundled transcripts.

The transcripts under ``data/transcripts`` are produced by
:func:`write_bundled_transcripts`: the pipeline is run against a
:class:`~ruleflow.llm.ScriptedBackend` whose answers are defined here and every
exchange is recorded.  Re-running it must reproduce the files byte for byte.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from .corpus import Document, Relation, load_corpus
from .llm import CompletionRequest, RecordingBackend, ScriptedBackend
from .pipeline import PipelineConfig, extract_rules, run_pipeline
from .prompts import PromptVariant
from .rules import format_rule

__all__ = [
    "data_path",
    "load_fixture",
    "gold_extraction_answer",
    "scripted_responder",
    "ECOMMERCE_ID",
    "DEEPSEEK_V3_LABELS",
    "write_bundled_transcripts",
    "TRANSCRIPTS",
]

FIXED_TIMESTAMP = "2025-01-15T00:00:00Z"
ECOMMERCE_ID = "ecommerce-shopping"


def data_path(name: str) -> Path:
    return Path(str(resources.files("ruleflow") / "data" / name))


def load_fixture(name: str = "mini_corpus") -> list[Document]:
    """Load ``mini_corpus`` or ``dependency_examples`` from the package data."""
    return load_corpus(data_path(f"{name}.json"))


def gold_extraction_answer(doc: Document, model: str = "") -> str:
    """An extraction answer in the prompt's Input/Explain/Output layout that lists the gold rules."""
    body = "\n".join(f"{i}. {format_rule(r)}" for i, r in enumerate(doc.rules, 1))
    steps = ", then ".join(r.condition.slot_type for r in doc.rules)
    return (
        f"Input: {doc.text}\n"
        f"Explain: The text walks through {len(doc.rules)} decisions in order: {steps}.\n"
        f"Output:\n{body}\n"
    )


# Answers for the e-commerce document.  The first model confuses the chain
# steps with branches and the two final steps with a simultaneous pair.
DEEPSEEK_V3_LABELS: dict[tuple[int, int], Relation] = {
    (0, 1): Relation.CONDITIONAL,
    (1, 2): Relation.CONDITIONAL,
    (2, 3): Relation.PARALLEL,
    (2, 4): Relation.PARALLEL,
}


def _gold_label(doc: Document, a: int, b: int) -> Relation:
    for d in doc.dependencies:
        if {d.source, d.target} == {a, b}:
            return d.kind
    return Relation.NO


def _reasoned(rel: Relation, a, b) -> str:
    return (
        f"Rule A concerns {a.condition.slot_type!r} and Rule B concerns "
        f"{b.condition.slot_type!r}.\n"
        "Check whether one action leads into the other rule, whether a chosen value "
        "gates it, or whether both are handled together.\n"
        f"Answer: {rel.value}"
    )


_RULE_LINE = {key: re.compile(rf"^{key}: (.*)$", re.MULTILINE) for key in ("Rule A", "Rule B")}


def scripted_responder(docs: Sequence[Document],
                       labels: Optional[Mapping[tuple[str, int, int], Relation]] = None,
                       reasoning: bool = False) -> Callable[[CompletionRequest], str]:
    """Build a responder that answers extraction prompts with the gold rules and
    dependency prompts with the gold relation, unless ``labels`` overrides it.

    ``labels`` is keyed by (document id, a, b).  With ``reasoning`` the
    dependency answers carry a short rationale before the final line.
    """
    labels = dict(labels or {})

    def respond(request: CompletionRequest) -> str:
        prompt = request.prompt.text
        if request.prompt.kind == "extraction":
            for doc in docs:
                if doc.text.strip() in prompt:
                    return gold_extraction_answer(doc)
            return "Output:\n"
        a_text = _RULE_LINE["Rule A"].findall(prompt)[-1].strip()
        b_text = _RULE_LINE["Rule B"].findall(prompt)[-1].strip()
        for doc in docs:
            rendered = [format_rule(r) for r in doc.rules]
            if a_text in rendered and b_text in rendered:
                a, b = rendered.index(a_text), rendered.index(b_text)
                rel = labels.get((doc.id, a, b), _gold_label(doc, a, b))
                if reasoning:
                    return _reasoned(rel, doc.rules[a], doc.rules[b])
                return rel.value
        return "no"

    return respond


# name -> (model, document ids, label overrides, reasoning, full pipeline?)
TRANSCRIPTS = {
    "ecommerce_deepseek_v3.jsonl": (
        "deepseek-v3", (ECOMMERCE_ID,),
        {(ECOMMERCE_ID, a, b): rel for (a, b), rel in DEEPSEEK_V3_LABELS.items()}, False, True,
    ),
    "ecommerce_deepseek_r1.jsonl": ("deepseek-r1", (ECOMMERCE_ID,), {}, True, True),
    "mini_corpus_p1.jsonl": ("fixture-gold", None, {}, False, False),
}


def write_bundled_transcripts(out_dir: Union[str, Path, None] = None) -> list[Path]:
    """(Re)generate every bundled transcript; returns the written paths."""
    out = Path(out_dir) if out_dir is not None else data_path("transcripts")
    out.mkdir(parents=True, exist_ok=True)
    docs = load_fixture("mini_corpus")
    written = []
    for name, (model, ids, labels, reasoning, full) in TRANSCRIPTS.items():
        path = out / name
        path.write_text("", encoding="utf-8")
        chosen = [d for d in docs if ids is None or d.id in ids]
        backend = RecordingBackend(
            ScriptedBackend(responder=scripted_responder(docs, labels, reasoning),
                            timestamp=FIXED_TIMESTAMP),
            path,
        )
        config = PipelineConfig(model=model)
        for doc in chosen:
            if full:
                run_pipeline(doc, PromptVariant.IMPLICIT_MAPPING, backend, 1, config)
            else:
                extract_rules(doc, PromptVariant.IMPLICIT_MAPPING, backend, config)
        written.append(path)
    return written
