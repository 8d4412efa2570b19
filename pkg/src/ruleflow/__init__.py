"""Business rule extraction from process text and rule-flow dependency analysis."""

from .corpus import (
    CorpusStats,
    DependencyLabel,
    Document,
    EntityKind,
    Relation,
    corpus_stats,
    load_corpus,
    rules_to_bio,
    save_corpus,
    tokenize,
)
from .graph import RuleFlowGraph, build_graph, to_dot, validate_graph
from .llm import (
    CompletionRequest,
    Exchange,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    complete,
    record,
)
from .metrics import (
    entity_f1,
    eval_dependencies,
    eval_judgement,
    fleiss_kappa,
    icc,
    macro_f1,
)
from .pipeline import PipelineConfig, extract_rules, run_pipeline
from .prompts import (
    PromptEngine,
    PromptVariant,
    render_dependency_prompt,
    render_extraction_prompt,
    render_generation_prompt,
)
from .rules import BusinessRule, Condition, Enumeration, LogicalJudgement, Numeric, format_rule, parse_rule

__version__ = "0.1.0"
