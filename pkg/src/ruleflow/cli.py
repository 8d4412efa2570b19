"""``ruleflow`` command line.

Exit codes: 0 success, 1 configuration or usage error, 2 pipeline or schema
failure, 3 file I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import metrics
from .corpus import Document, corpus_stats, load_corpus, rules_to_bio
from .errors import DegenerateMatrix, RuleflowError, SchemaError
from .fixtures import scripted_responder
from .graph import RuleFlowGraph, to_dot, validate_graph
from .llm import HttpBackend, RecordingBackend, ReplayBackend, ScriptedBackend
from .pipeline import PipelineConfig, extract_rules, run_pipeline
from .prompts import PromptEngine, resolve_variant
from .rules import LogicalJudgement, parse_rule

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    """Bad or inconsistent command-line configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--corpus", type=Path, help="corpus JSON file")
    g.add_argument("--out", type=Path, help="output directory (or file for gen-prompt)")
    g.add_argument("--templates", type=Path, help="prompt template directory")
    g.add_argument("--language", default="en", help="template language (default: en)")
    g.add_argument("--verbose", "-v", action="store_true")
    return p


def _backend_opts() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model backend")
    g.add_argument("--backend", choices=["http", "replay", "scripted"])
    g.add_argument("--transcript", type=Path, help="JSONL transcript (replay source or record target)")
    g.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    g.add_argument("--api-key-file", type=Path, help="file holding the API key (else $LLM_API_KEY)")
    g.add_argument("--model", default="default")
    g.add_argument("--temperature", type=float, default=0.0)
    g.add_argument("--max-tokens", type=int)
    g.add_argument("--concurrency", type=int, default=1)
    g.add_argument("--variant", default="p1", help="prompt variant name or alias p1..p5")
    g.add_argument("--strict", action="store_true", help="treat an empty extraction as a failure")
    g.add_argument("--keep-going", action="store_true",
                   help="record failures and continue instead of stopping")
    g.add_argument("--rules-only", action="store_true",
                   help="dependency prompts show only the rule pair, not the document text")
    return p


def build_parser() -> argparse.ArgumentParser:
    common, backend = _common(), _backend_opts()
    parser = _Parser(prog="ruleflow", description="Business rule extraction and rule-flow analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("extract", parents=[common, backend],
                   help="stage 1: extract rules from every document")
    sub.add_parser("pipeline", parents=[common, backend],
                   help="both stages; writes results and DOT graphs")
    p = sub.add_parser("record", parents=[common, backend],
                       help="run the pipeline and append every exchange to --transcript")
    p.add_argument("--extract-only", action="store_true", help="only record stage 1")

    p = sub.add_parser("eval", parents=[common], help="score stored results against a gold corpus")
    p.add_argument("predictions", nargs="+", type=Path,
                   help="result files or directories holding *.pipeline.json / *.extraction.json")
    p.add_argument("--extraction-only", action="store_true", help="skip dependency scoring")
    p.add_argument("--three-class", action="store_true",
                   help="score dependencies over gold-positive pairs only")
    p.add_argument("--all-classes", action="store_true",
                   help="average F1 over every class, not just those that occur")

    p = sub.add_parser("agreement", parents=[common], help="Fleiss' kappa or ICC from a CSV grid")
    p.add_argument("csv", type=Path, help="rows are items, columns are raters")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--categorical", action="store_true", help="category labels: Fleiss' kappa")
    kind.add_argument("--ratings", action="store_true", help="numeric ratings: ICC")
    p.add_argument("--header", action="store_true", help="skip the first CSV row")

    sub.add_parser("stats", parents=[common], help="dataset statistics for a corpus")

    p = sub.add_parser("graph", parents=[common], help="DOT files from stored pipeline results")
    p.add_argument("results", nargs="+", type=Path)

    p = sub.add_parser("gen-prompt", parents=[common, backend],
                       help="print a synthetic-text generation prompt")
    p.add_argument("--domain")
    p.add_argument("--constraint", action="append", default=[], metavar="KEY=VALUE",
                   help="e.g. rules=7 or sentences=5; repeatable")
    p.add_argument("--complete", action="store_true",
                   help="send the prompt to the backend and write the raw answer to --out")
    return parser


# --------------------------------------------------------------------------
# helpers

def _engine(args) -> PromptEngine:
    return PromptEngine(args.templates, args.language)


def _config(args) -> PipelineConfig:
    if args.concurrency < 1:
        raise ConfigError("--concurrency must be >= 1")
    try:
        return PipelineConfig(
            model=args.model, temperature=args.temperature, max_tokens=args.max_tokens,
            engine=_engine(args), with_context=not args.rules_only,
            strict=args.strict, keep_going=args.keep_going,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _variant(args):
    try:
        return resolve_variant(args.variant)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _corpus(args) -> list[Document]:
    if args.corpus is None:
        raise ConfigError("--corpus is required")
    return load_corpus(args.corpus)


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {args.out}: {exc}") from exc
    return args.out


def _backend(args, docs: Sequence[Document] = ()):
    kind = args.backend
    if kind is None:
        if args.transcript is not None and args.command != "record":
            kind = "replay"
        elif args.endpoint is not None:
            kind = "http"
        else:
            raise ConfigError("no backend: pass --backend, --transcript or --endpoint")
    if kind == "replay":
        if args.transcript is None:
            raise ConfigError("--backend replay needs --transcript")
        return ReplayBackend(args.transcript)
    if kind == "http":
        if not args.endpoint:
            raise ConfigError("--backend http needs --endpoint")
        return HttpBackend(args.endpoint, api_key_file=args.api_key_file,
                           concurrency=max(args.concurrency, 1))
    # scripted answers mirror the gold corpus
    return ScriptedBackend(responder=scripted_responder(docs))


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


# --------------------------------------------------------------------------
# commands

def cmd_extract(args) -> int:
    docs = _corpus(args)
    variant, config = _variant(args), _config(args)
    backend = _backend(args, docs)
    out = _out_dir(args)
    for doc in docs:
        try:
            result = extract_rules(doc, variant, backend, config)
        except RuleflowError as exc:
            if isinstance(exc, OSError):
                raise
            print(f"error: document {doc.id}: {exc}", file=sys.stderr)
            if not args.keep_going:
                return EXIT_PIPELINE
            continue
        _write(out / f"{doc.id}.extraction.json", _dump(result.to_dict()))
    return EXIT_OK


def _run_pipelines(args, backend, docs, out: Optional[Path]) -> int:
    variant, config = _variant(args), _config(args)
    for doc in docs:
        try:
            result = run_pipeline(doc, variant, backend, args.concurrency, config)
        except RuleflowError as exc:
            if isinstance(exc, OSError):
                raise
            print(f"error: document {doc.id}: {exc}", file=sys.stderr)
            if not args.keep_going:
                return EXIT_PIPELINE
            continue
        if out is not None:
            _write(out / f"{doc.id}.pipeline.json", result.to_json())
            _write(out / f"{doc.id}.dot", to_dot(result.graph, doc.id))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    docs = _corpus(args)
    backend = _backend(args, docs)
    return _run_pipelines(args, backend, docs, _out_dir(args))


def cmd_record(args) -> int:
    if args.transcript is None:
        raise ConfigError("record needs --transcript to write to")
    docs = _corpus(args)
    backend = RecordingBackend(_backend(args, docs), args.transcript)
    if args.extract_only:
        variant, config = _variant(args), _config(args)
        for doc in docs:
            extract_rules(doc, variant, backend, config)
        return EXIT_OK
    out = _out_dir(args) if args.out is not None else None
    return _run_pipelines(args, backend, docs, out)


def _result_files(paths: Sequence[Path]) -> list[Path]:
    files: list[Path] = []
    for p in paths:
        if p.is_dir():
            found = sorted(p.glob("*.pipeline.json"))
            if not found:
                found = sorted(p.glob("*.extraction.json"))
            files.extend(found)
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {p}")
    return files


def _load_result(path: Path) -> dict:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON ({exc})") from None
    for key in ("document_id", "rules"):
        if key not in obj:
            raise SchemaError(str(path), f"missing field {key!r}")
    return obj


def _gold_space_predictions(gold_rules, pred_rules, predictions) -> list[tuple]:
    """Re-index predicted pairs onto gold rules; uncovered gold pairs become failures."""
    to_gold = {pi: gi for gi, pi in metrics.align_rules(gold_rules, pred_rules)
               if gi is not None and pi is not None}
    mapped = {}
    for p in predictions:
        a, b = p["a"], p["b"]
        if a in to_gold and b in to_gold:
            ga, gb = to_gold[a], to_gold[b]
            mapped[(min(ga, gb), max(ga, gb))] = p["label"]
    n = len(gold_rules)
    return [(a, b, mapped.get((a, b), "error")) for a in range(n) for b in range(a + 1, n)]


def cmd_eval(args) -> int:
    gold = {d.id: d for d in _corpus(args)}
    results = [_load_result(p) for p in _result_files(args.predictions)]
    unknown = sorted({r["document_id"] for r in results} - set(gold))
    if unknown:
        print(f"error: predictions for documents not in the gold corpus: {unknown}", file=sys.stderr)
        return EXIT_PIPELINE
    present_only = not args.all_classes
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in results:
        groups.setdefault((r.get("variant", ""), r.get("model", "")), []).append(r)

    report = []
    for (variant, model), rs in sorted(groups.items()):
        entity = None
        jpairs, dpairs = [], []
        has_deps = not args.extraction_only and all("predictions" in r for r in rs)
        for r in sorted(rs, key=lambda r: r["document_id"]):
            doc = gold[r["document_id"]]
            pred_rules = [parse_rule(s) for s in r["rules"]]
            gold_bio, _ = rules_to_bio(doc.text, doc.rules)
            pred_bio, _ = rules_to_bio(doc.text, pred_rules)
            counts = metrics.entity_counts(gold_bio, pred_bio)
            entity = counts if entity is None else entity + counts
            jpairs += metrics.judgement_pairs(doc.rules, pred_rules)
            if has_deps:
                preds = _gold_space_predictions(doc.rules, pred_rules, r["predictions"])
                dpairs += metrics.dependency_pairs(doc.dependencies, preds, len(doc.rules),
                                                   args.three_class)
        ent = entity.score()
        judge = metrics.classification_score(jpairs, list(LogicalJudgement), present_only)
        row = {
            "variant": variant, "model": model, "documents": len(rs),
            "entity": ent.to_dict(), "judgement": judge.to_dict(),
        }
        if has_deps:
            classes = metrics.DEPENDENCY_CLASSES[:3] if args.three_class else metrics.DEPENDENCY_CLASSES
            row["dependency"] = metrics.classification_score(dpairs, classes, present_only).to_dict()
        report.append(row)

    if args.out is not None:
        _write(_out_dir(args) / "report.json", _dump({"groups": report}))
    header = ("variant", "model", "docs", "ner_micro_f1", "ner_macro_f1",
              "judgement_macro_f1", "dependency_macro_f1", "dependency_accuracy")
    print("\t".join(header))
    for row in report:
        dep = row.get("dependency")
        cells = [
            row["variant"], row["model"], str(row["documents"]),
            f"{row['entity']['micro_f1']:.4f}", f"{row['entity']['macro_f1']:.4f}",
            f"{row['judgement']['macro_f1']:.4f}",
            f"{dep['macro_f1']:.4f}" if dep else "-",
            f"{dep['accuracy']:.4f}" if dep else "-",
        ]
        print("\t".join(cells))
    return EXIT_OK


def _read_grid(path: Path, header: bool) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in row] for row in csv.reader(fh) if any(c.strip() for c in row)]
    return rows[1:] if header else rows


def cmd_agreement(args) -> int:
    grid = _read_grid(args.csv, args.header)
    if args.categorical:
        print(f"fleiss_kappa\t{metrics.fleiss_kappa(grid):.6f}")
        return EXIT_OK
    try:
        ratings = [[float(c) for c in row] for row in grid]
    except ValueError as exc:
        raise DegenerateMatrix(f"non-numeric rating: {exc}") from None
    if len({len(r) for r in ratings}) > 1:
        raise DegenerateMatrix("ragged ratings grid")
    if len(ratings) < 2 or (ratings and len(ratings[0]) < 2):
        raise DegenerateMatrix("need at least 2 items and 2 raters")
    print(f"icc_single\t{metrics.icc(ratings, metrics.ICCForm.SINGLE):.6f}")
    print(f"icc_average\t{metrics.icc(ratings, metrics.ICCForm.AVERAGE):.6f}")
    return EXIT_OK


def cmd_stats(args) -> int:
    row = corpus_stats(_corpus(args)).as_row()
    print("\t".join(row))
    print("\t".join(str(v) for v in row.values()))
    return EXIT_OK


def cmd_graph(args) -> int:
    out = _out_dir(args)
    for path in _result_files(args.results):
        obj = _load_result(path)
        if "graph" not in obj:
            raise SchemaError(str(path), "no graph in result file")
        graph = RuleFlowGraph.from_dict(obj["graph"])
        for diag in validate_graph(graph):
            print(f"{obj['document_id']}: {diag.code}: {diag.message}", file=sys.stderr)
        _write(out / f"{obj['document_id']}.dot", to_dot(graph, obj["document_id"]))
    return EXIT_OK


def cmd_genprompt(args) -> int:
    if not args.domain or not args.domain.strip():
        raise ConfigError("--domain is required")
    constraints = {}
    for item in args.constraint:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"bad --constraint {item!r}; expected KEY=VALUE")
        constraints[key.strip()] = value.strip()
    bundle = _engine(args).generation(args.domain, constraints)
    if not args.complete:
        sys.stdout.write(bundle.text)
        return EXIT_OK
    if args.out is None:
        raise ConfigError("--complete needs --out for the generated text")
    config = _config(args)
    exchange = _backend(args).complete(config.request(bundle))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    _write(args.out, exchange.response_text)
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "pipeline": cmd_pipeline,
    "record": cmd_record,
    "eval": cmd_eval,
    "agreement": cmd_agreement,
    "stats": cmd_stats,
    "graph": cmd_graph,
    "gen-prompt": cmd_genprompt,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"ruleflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ruleflow: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuleflowError as exc:
        print(f"ruleflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
