"""Prompt rendering for rule extraction, dependency classification and text generation.

Templates are plain text files under ``templates/<language>/`` with
``{{name}}`` placeholders.  Lines starting with ``##`` at the top of a file
are header comments and are dropped before rendering.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Union

from .errors import EmptyDocument, EmptyDomain, IdenticalRules, TemplateError
from .rules import BusinessRule, format_rule

__all__ = [
    "PromptVariant",
    "PromptBundle",
    "PromptEngine",
    "DEFAULT_TEMPLATE_DIR",
    "EXTRACTION_DEFINITIONS",
    "DEPENDENCY_DEFINITIONS",
    "GENERATION_DEFINITIONS",
    "render_extraction_prompt",
    "render_dependency_prompt",
    "render_generation_prompt",
    "resolve_variant",
]

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"

EXTRACTION_DEFINITIONS = frozenset({1, 2, 4})
DEPENDENCY_DEFINITIONS = frozenset({1, 2, 3, 4})
GENERATION_DEFINITIONS = frozenset({1, 2, 3, 4, 5})


class PromptVariant(enum.Enum):
    IMPLICIT_MAPPING = "implicit_mapping"
    EXPLICIT_MAPPING = "explicit_mapping"
    CLARIFIED_INPUT = "clarified_input"
    LOGICAL_JUDGEMENT = "logical_judgement"
    PSEUDO_CODE = "pseudo_code"

    @property
    def alias(self) -> str:
        return f"p{list(PromptVariant).index(self) + 1}"


def resolve_variant(name: Union[str, PromptVariant]) -> PromptVariant:
    """Accept ``p1``..``p5``, enum values ("pseudo_code") or names ("PSEUDO_CODE")."""
    if isinstance(name, PromptVariant):
        return name
    key = name.strip().lower().replace("-", "_")
    for v in PromptVariant:
        if key in (v.alias, v.value):
            return v
    raise ValueError(f"unknown prompt variant {name!r}; expected p1..p5 or one of "
                     + ", ".join(v.value for v in PromptVariant))


@dataclass(frozen=True)
class PromptBundle:
    user: str
    kind: str  # "extraction", "dependency" or "generation"
    definitions_included: frozenset
    variant: Optional[PromptVariant] = None
    system: Optional[str] = None

    def messages(self) -> list[dict]:
        msgs = []
        if self.system:
            msgs.append({"role": "system", "content": self.system})
        msgs.append({"role": "user", "content": self.user})
        return msgs

    @property
    def text(self) -> str:
        return self.user if not self.system else f"{self.system}\n\n{self.user}"


_PLACEHOLDER = re.compile(r"\{\{\s*(\w+)\s*\}\}")


def _substitute(template: str, values: Mapping[str, str], name: str) -> str:
    def repl(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise TemplateError(f"template {name!r} uses unknown placeholder {{{{{key}}}}}")
        return values[key]

    # single pass: substituted text is never rescanned for placeholders
    return _PLACEHOLDER.sub(repl, template)


class PromptEngine:
    """Loads one language's templates and renders prompt bundles from them."""

    def __init__(self, template_dir: Union[str, Path, None] = None, language: str = "en"):
        self.template_dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
        self.language = language
        root = self.template_dir / language
        if not root.is_dir():
            raise TemplateError(f"no templates for language {language!r} under {self.template_dir}")
        self._root = root
        self._cache: dict[str, str] = {}
        self.fields = self._load_fields()
        self.definitions = self._load_definitions()

    def template(self, name: str) -> str:
        if name not in self._cache:
            path = self._root / f"{name}.txt"
            try:
                raw = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise TemplateError(f"cannot read template {path}: {exc}") from exc
            lines = raw.splitlines()
            while lines and lines[0].startswith("##"):
                lines.pop(0)
            self._cache[name] = "\n".join(lines).strip("\n")
        return self._cache[name]

    def _load_fields(self) -> dict[str, str]:
        fields = {}
        for line in self.template("fields").splitlines():
            if "=" in line and not line.startswith("#"):
                key, value = line.split("=", 1)
                fields[key.strip()] = value.strip()
        return fields

    def _load_definitions(self) -> dict[int, str]:
        blocks = [b.strip() for b in self.template("definitions").split("\n---\n")]
        if len(blocks) != 5:
            raise TemplateError(f"expected 5 definition blocks, found {len(blocks)}")
        return {i + 1: block for i, block in enumerate(blocks)}

    def definition_heading(self, number: int) -> str:
        block = self.definitions[number]
        return re.split(r"[:：]", block, maxsplit=1)[0]

    def _definitions_text(self, numbers) -> str:
        return "\n".join(self.definitions[n] for n in sorted(numbers))

    # ---------------------------------------------------------------- render

    def extraction(self, variant: PromptVariant, text: str) -> PromptBundle:
        if not text or not text.strip():
            raise EmptyDocument("document text is empty")
        variant = resolve_variant(variant)
        f = self.fields
        input_field = f["clarified_input"] if variant is PromptVariant.CLARIFIED_INPUT else f["input"]
        if variant is PromptVariant.EXPLICIT_MAPPING:
            explain = self.template("explain_explicit")
        else:
            explain = self.template("explain_implicit")
        if variant is PromptVariant.PSEUDO_CODE:
            explain = explain + "\n" + self.template("pseudo_code")
        extra = ""
        if variant is PromptVariant.LOGICAL_JUDGEMENT:
            extra = self.template("logical_judgement") + "\n"
        user = _substitute(self.template("extraction"), {
            "definitions": self._definitions_text(EXTRACTION_DEFINITIONS),
            "input_field": input_field,
            "explain_instruction": explain,
            "extra_sections": extra,
            "text": text.strip(),
        }, "extraction")
        return PromptBundle(user=user + "\n", kind="extraction",
                            definitions_included=EXTRACTION_DEFINITIONS, variant=variant)

    def dependency(self, rule_a: BusinessRule, rule_b: BusinessRule,
                   context: Optional[str] = None) -> PromptBundle:
        if rule_a == rule_b:
            raise IdenticalRules("cannot classify a rule against itself")
        ctx = ""
        if context is not None and context.strip():
            ctx = _substitute(self.template("dependency_context"), {"text": context.strip()},
                              "dependency_context") + "\n"
        user = _substitute(self.template("dependency"), {
            "definitions": self._definitions_text(DEPENDENCY_DEFINITIONS),
            "context": ctx,
            "rule_a": format_rule(rule_a),
            "rule_b": format_rule(rule_b),
        }, "dependency")
        return PromptBundle(user=user + "\n", kind="dependency",
                            definitions_included=DEPENDENCY_DEFINITIONS)

    def generation(self, domain: str, constraints: Optional[Mapping] = None) -> PromptBundle:
        if not domain or not domain.strip():
            raise EmptyDomain("domain must be non-empty")
        lines = []
        for key in sorted(constraints or {}):
            value = constraints[key]
            tmpl = self.fields.get(f"constraint_{key}", self.fields["constraint_other"])
            lines.append(tmpl.format(key=key, value=value))
        user = _substitute(self.template("generation"), {
            "definitions": self._definitions_text(GENERATION_DEFINITIONS),
            "domain": domain.strip(),
            "constraints": "\n".join(lines),
        }, "generation")
        return PromptBundle(user=user + "\n", kind="generation",
                            definitions_included=GENERATION_DEFINITIONS)

    def section_headers(self, variant: PromptVariant) -> tuple[str, str, str]:
        f = self.fields
        first = f["clarified_input"] if variant is PromptVariant.CLARIFIED_INPUT else f["input"]
        return first, f["explain"], f["output"]


@lru_cache(maxsize=8)
def _engine(template_dir: Optional[str], language: str) -> PromptEngine:
    return PromptEngine(template_dir, language)


def default_engine(template_dir=None, language: str = "en") -> PromptEngine:
    return _engine(str(template_dir) if template_dir else None, language)


def render_extraction_prompt(variant, document, engine: Optional[PromptEngine] = None) -> PromptBundle:
    """Render the stage-one prompt; ``document`` may be a Document or raw text."""
    engine = engine or default_engine()
    text = document if isinstance(document, str) else document.text
    return engine.extraction(variant, text)


def render_dependency_prompt(rule_a, rule_b, context=None,
                             engine: Optional[PromptEngine] = None) -> PromptBundle:
    engine = engine or default_engine()
    if context is not None and not isinstance(context, str):
        context = context.text
    return engine.dependency(rule_a, rule_b, context)


def render_generation_prompt(domain: str, constraints: Optional[Mapping] = None,
                             engine: Optional[PromptEngine] = None) -> PromptBundle:
    engine = engine or default_engine()
    return engine.generation(domain, constraints)
