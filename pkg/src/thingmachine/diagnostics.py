"""Diagnostics, source spans and the exception hierarchy shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def to_json(self) -> dict:
        return {"file": self.file, "line": self.line, "column": self.column, "length": self.length}

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    """One finding. ``E-*`` codes are errors, ``W-*`` codes are warnings."""

    code: str
    message: str
    element: Optional[str] = None
    span: Optional[SourceSpan] = None

    @property
    def is_error(self) -> bool:
        return self.code.startswith("E-")

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "path": self.element,
            "span": self.span.to_json() if self.span else None,
        }

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        elem = f" [{self.element}]" if self.element else ""
        return f"{where}{self.code}{elem}: {self.message}"


# Closed registry of diagnostic codes; see docs/diagnostics.md.
CODES = {
    # dsl
    "E-SYNTAX": "grammar violation",
    "E-UNRESOLVED": "unknown stage, machine or store reference",
    "E-DUPLICATE": "redeclared identifier",
    "E-TYPE": "expression or literal type error",
    "E-AMBIGUOUS": "stage path matches more than one stage",
    "E-SCHEMA": "malformed JSON model document",
    # validate
    "E-FLOW-ILLEGAL": "flow arc not permitted by the rule table",
    "E-ORPHAN-STAGE": "stage with no flow and no trigger at all",
    "E-TRIGGER-GUARD": "trigger guard fails to type-check or names an unknown store",
    "E-STORE-TYPE": "store initial value does not match its declared type",
    "E-FN-MISSING": "stage names an unregistered processing function",
    "E-REGION-UNKNOWN": "event region names an element that is not in the model",
    "E-EVENT-REGION": "event region empty or anchor outside region",
    "W-UNREACHABLE-RECEIVE": "receive stage with no incoming transfer chain",
    "W-DEAD-CREATE": "create stage that can never produce anything",
    "W-TRIGGER-TARGET": "trigger activates a stage other than create",
    "W-FLOW-CYCLE": "flow arc lies on a cycle that a thing can traverse without rest",
    "W-FN-IGNORED": "function attached to a stage kind that never applies one",
    # sim
    "E-FN-DUP": "processing function registered twice",
    "E-GUARD-EVAL": "runtime guard evaluation failure",
    "E-DIVERGENT": "micro-step cap exceeded within one step",
    "E-SCRIPT": "script injection malformed or unresolved",
    "E-INVALID-MODEL": "model has validation errors",
    "E-STORE-WRITE": "processing function wrote a store it does not own",
    "E-FN-ERROR": "processing function rejected its input or produced a bad value",
    # corpus
    "E-UNKNOWN-CORPUS": "no corpus entry with that name",
}


class TMError(Exception):
    """Base error. Carries a registry code and, optionally, a list of diagnostics."""

    def __init__(self, code: str, message: str = "", diagnostics: Iterable[Diagnostic] = ()):
        self.code = code
        self.diagnostics = list(diagnostics)
        if not message and self.diagnostics:
            message = "; ".join(str(d) for d in self.diagnostics[:5])
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class ModelError(TMError):
    """Raised by the parser and lookup helpers."""


class SchemaError(TMError):
    def __init__(self, message: str):
        super().__init__("E-SCHEMA", message)


class SimError(TMError):
    pass


class EventError(TMError):
    pass


class CorpusError(TMError):
    pass


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diags)
