"""Exception hierarchy.

Parse errors map to CLI exit code 2, analysis errors to exit code 1.
"""

from __future__ import annotations


class AdxError(Exception):
    """Base class for every error raised by adx."""


class ParseError(AdxError):
    """Input could not be parsed. Carries an optional 1-based line number."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        self.detail = message
        super().__init__(self._render())

    def _render(self) -> str:
        where = ""
        if self.source and self.line is not None:
            where = f"{self.source}:{self.line}: "
        elif self.source:
            where = f"{self.source}: "
        elif self.line is not None:
            where = f"line {self.line}: "
        return where + self.detail

    def with_source(self, source: str) -> "ParseError":
        self.source = source
        self.args = (self._render(),)
        return self


class MalformedRow(ParseError):
    pass


class UnknownFormat(ParseError):
    pass


class MalformedHeader(ParseError):
    pass


class MalformedNumstat(ParseError):
    pass


class DuplicateKey(ParseError):
    pass


class ValidationError(AdxError):
    """Snapshot inputs violate a model invariant."""


class DuplicatePath(ValidationError):
    pass


class SelfDependency(ValidationError):
    pass


class DanglingEdgeEndpoint(ValidationError):
    pass


class AnalysisError(AdxError):
    """An analysis cannot run on the given snapshot."""


class EmptySystem(AnalysisError):
    pass


class EmptyHistory(AnalysisError):
    pass


class InsufficientReleases(AnalysisError):
    pass


class EmptySample(AnalysisError):
    pass


class NoBugData(AnalysisError):
    pass


class UnknownFile(AnalysisError):
    pass
