"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations


class NoduleCadError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NoduleCadError, ValueError):
    """Input violates a documented precondition (duplicate ids, bad arguments)."""


class ParseError(ValidationError):
    """A text record could not be parsed."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class RangeError(ParseError):
    """A parsed field is outside its allowed range."""


class EncodingError(ValidationError):
    """A box cannot be produced by the decode transform from the requested cell/anchor."""


class UndefinedMetricError(NoduleCadError, ArithmeticError):
    """A ratio metric has an empty denominator."""


class NumericError(NoduleCadError, ArithmeticError):
    """A numerical evaluation produced a non-finite value."""
