"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NddeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NddeError):
    """Expression text could not be parsed; carries the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class DomainError(NddeError):
    """An expression was evaluated outside its mathematical domain."""


class NonDifferentiableError(NddeError):
    """Symbolic differentiation hit abs or sgnpow."""


class ValidationError(NddeError):
    """A problem, auxiliary pair, or history failed a structural check."""


class QuadratureError(NddeError):
    """Adaptive quadrature failed to converge or sampled a non-finite value."""


class IntegrationError(NddeError):
    """Direct integration failed (non-finite state, step-size exhaustion)."""


class ConfigError(NddeError):
    """Config file problem; carries the line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
