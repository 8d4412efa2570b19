"""Rule-flow graphs: rules as nodes, typed dependencies as edges."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import networkx as nx

from .corpus import DEPENDENCY_KINDS, DependencyLabel, Relation
from .errors import IndexOutOfRange
from .rules import BusinessRule, format_rule, parse_rule

__all__ = ["Edge", "GraphDiagnostic", "RuleFlowGraph", "build_graph", "validate_graph", "to_dot"]

log = logging.getLogger(__name__)

_KIND_ORDER = {k: i for i, k in enumerate(DEPENDENCY_KINDS)}


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    kind: Relation
    trigger: Optional[str] = None

    def sort_key(self):
        return (self.source, self.target, _KIND_ORDER[self.kind], self.trigger or "")

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.target, "kind": self.kind.value,
                "trigger": self.trigger}


@dataclass(frozen=True)
class GraphDiagnostic:
    code: str  # CycleDetected, DuplicateTrigger, Unreachable, Conflict
    nodes: tuple[int, ...]
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "nodes": list(self.nodes), "message": self.message}


@dataclass(frozen=True)
class RuleFlowGraph:
    nodes: tuple[BusinessRule, ...]
    edges: tuple[Edge, ...]
    warnings: tuple[GraphDiagnostic, ...] = ()

    def edges_of(self, kind: Relation) -> list[Edge]:
        return [e for e in self.edges if e.kind is kind]

    def to_dict(self) -> dict:
        return {
            "nodes": [format_rule(r) for r in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
            "warnings": [w.to_dict() for w in self.warnings],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RuleFlowGraph":
        return cls(
            nodes=tuple(parse_rule(s) for s in obj["nodes"]),
            edges=tuple(Edge(e["from"], e["to"], Relation(e["kind"]), e.get("trigger"))
                        for e in obj["edges"]),
            warnings=tuple(GraphDiagnostic(w["code"], tuple(w["nodes"]), w["message"])
                           for w in obj.get("warnings", [])),
        )


def _label_parts(label):
    """(source, target, relation, trigger) from a gold label or a prediction."""
    if isinstance(label, DependencyLabel):
        return label.source, label.target, label.kind, label.trigger
    # DependencyPrediction; avoid importing pipeline here
    return label.a, label.b, label.predicted, None


def build_graph(rules: Sequence[BusinessRule], labels: Iterable) -> RuleFlowGraph:
    """Turn labels into typed edges.

    "No" labels (and failed predictions) add nothing.  Parallel edges are
    stored once with source < target.  When two labels give one rule pair
    different kinds the first one wins and a Conflict warning is recorded.
    """
    n = len(rules)
    edges: dict[tuple, Edge] = {}
    pair_kind: dict[tuple[int, int], Relation] = {}
    warnings: list[GraphDiagnostic] = []
    for label in labels:
        src, dst, kind, trigger = _label_parts(label)
        if not (0 <= src < n and 0 <= dst < n):
            raise IndexOutOfRange(f"label ({src}, {dst}) outside {n} rules")
        if kind is None or kind is Relation.NO or src == dst:
            continue
        if kind is Relation.PARALLEL:
            src, dst = min(src, dst), max(src, dst)
        if kind is not Relation.CONDITIONAL:
            trigger = None
        pair = (min(src, dst), max(src, dst))
        seen = pair_kind.get(pair)
        if seen is not None and seen is not kind:
            msg = f"rules {pair[0]} and {pair[1]}: kept {seen.value}, dropped {kind.value}"
            log.warning("conflicting dependency labels: %s", msg)
            warnings.append(GraphDiagnostic("Conflict", pair, msg))
            continue
        pair_kind[pair] = kind
        edges.setdefault((src, dst, kind), Edge(src, dst, kind, trigger))
    ordered = tuple(sorted(edges.values(), key=Edge.sort_key))
    return RuleFlowGraph(tuple(rules), ordered, tuple(warnings))


def validate_graph(graph: RuleFlowGraph) -> list[GraphDiagnostic]:
    out: list[GraphDiagnostic] = []

    seq = nx.DiGraph()
    seq.add_nodes_from(range(len(graph.nodes)))
    seq.add_edges_from((e.source, e.target) for e in graph.edges_of(Relation.SEQUENTIAL))
    on_cycle: set[int] = set()
    for comp in sorted((sorted(c) for c in nx.strongly_connected_components(seq)
                        if len(c) > 1)):
        on_cycle.update(comp)
        out.append(GraphDiagnostic(
            "CycleDetected", tuple(comp),
            "sequential cycle through rules " + ", ".join(map(str, comp)),
        ))

    by_source: dict[int, dict[str, list[int]]] = {}
    for e in graph.edges_of(Relation.CONDITIONAL):
        if e.trigger is not None:
            by_source.setdefault(e.source, {}).setdefault(e.trigger, []).append(e.target)
    for src in sorted(by_source):
        for trigger, targets in sorted(by_source[src].items()):
            if len(targets) > 1:
                out.append(GraphDiagnostic(
                    "DuplicateTrigger", (src, *sorted(targets)),
                    f"rule {src} branches to {sorted(targets)} on the same value {trigger!r}",
                ))

    flow = nx.DiGraph()
    flow.add_nodes_from(range(len(graph.nodes)))
    flow.add_edges_from((e.source, e.target) for e in graph.edges
                        if e.kind in (Relation.SEQUENTIAL, Relation.CONDITIONAL))
    reached: set[int] = set()
    for node in flow.nodes:
        if flow.in_degree(node) == 0:
            reached.add(node)
            reached.update(nx.descendants(flow, node))
    for node in sorted(set(flow.nodes) - reached - on_cycle):
        out.append(GraphDiagnostic("Unreachable", (node,),
                                   f"rule {node} cannot be reached from a starting rule"))
    return out


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(graph: RuleFlowGraph, name: str = "ruleflow") -> str:
    lines = [f"digraph {_quote(name)} {{", "  node [shape=box];"]
    for i, rule in enumerate(graph.nodes):
        lines.append(f"  n{i} [label={_quote(f'R{i}: {rule.condition.slot_type}')}];")
    for e in graph.edges:
        attrs = [f"kind={e.kind.value}"]
        if e.kind is Relation.CONDITIONAL and e.trigger:
            attrs.append(f"label={_quote(e.trigger)}")
        if e.kind is Relation.PARALLEL:
            attrs.append("dir=none")
            attrs.append("style=dashed")
        lines.append(f"  n{e.source} -> n{e.target} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
