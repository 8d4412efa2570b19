"""Exception hierarchy shared by all ruleflow modules."""

from __future__ import annotations


class RuleflowError(Exception):
    """Base class for every error raised by this package."""


# rule notation

class UnknownJudgement(RuleflowError, ValueError):
    def __init__(self, surface: str):
        super().__init__(f"unknown logical judgement: {surface!r}")
        self.surface = surface


class MalformedRule(RuleflowError, ValueError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"malformed rule at offset {position}: {reason}")
        self.position = position
        self.reason = reason


# corpus

class CorpusIOError(RuleflowError, OSError):
    pass


class SchemaError(RuleflowError, ValueError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class InvariantError(RuleflowError, ValueError):
    def __init__(self, doc_id: str, detail: str):
        super().__init__(f"document {doc_id!r}: {detail}")
        self.doc_id = doc_id
        self.detail = detail


# prompts

class TemplateError(RuleflowError, ValueError):
    pass


class EmptyDocument(RuleflowError, ValueError):
    pass


class IdenticalRules(RuleflowError, ValueError):
    pass


class EmptyDomain(RuleflowError, ValueError):
    pass


# llm backends

class BackendError(RuleflowError):
    pass


class NetworkError(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, body: str):
        super().__init__(f"HTTP {code}: {body[:200]}")
        self.code = code
        self.body = body


class RateLimited(BackendError):
    pass


class MissingTranscript(BackendError, KeyError):
    def __init__(self, digest: str):
        super().__init__(digest)
        self.digest = digest

    def __str__(self) -> str:
        return f"no transcript entry for request digest {self.digest}"


class TranscriptIOError(BackendError, OSError):
    pass


# pipeline

class EmptyOutput(RuleflowError):
    pass


class UnparseableLabel(RuleflowError, ValueError):
    def __init__(self, excerpt: str):
        super().__init__(f"no dependency label found in response: {excerpt!r}")
        self.excerpt = excerpt


class AmbiguousLabel(RuleflowError, ValueError):
    def __init__(self, line: str, labels):
        super().__init__(f"several dependency labels on decision line {line!r}: {sorted(labels)}")
        self.line = line
        self.labels = labels


# graph and metrics

class IndexOutOfRange(RuleflowError, IndexError):
    pass


class LengthMismatch(RuleflowError, ValueError):
    pass


class UnknownLabel(RuleflowError, ValueError):
    pass


class PairCoverageError(RuleflowError, ValueError):
    pass


class DegenerateGrid(RuleflowError, ValueError):
    pass


class DegenerateMatrix(RuleflowError, ValueError):
    pass
