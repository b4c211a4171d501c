"""Exception hierarchy.

Every error raised on purpose by the library derives from LortorusError, so
the CLI can map failures to exit codes without catching unrelated bugs.
"""

from __future__ import annotations


class LortorusError(Exception):
    """Base class for all library errors."""


class ParseError(LortorusError):
    """Malformed profile expression. Carries the offending source span."""

    def __init__(self, message: str, text: str, start: int, end: int | None = None):
        self.text = text
        self.start = start
        self.end = start + 1 if end is None else max(end, start + 1)
        self.reason = message
        super().__init__(f"{message} at column {start + 1}\n{self.render()}")

    def render(self) -> str:
        underline = " " * self.start + "^" * (self.end - self.start)
        return f"  {self.text}\n  {underline}"


class DomainError(LortorusError, ValueError):
    """Expression evaluated outside its real domain (e.g. ln of a non-positive number)."""


class ProfileError(LortorusError):
    """Profile cannot be used for the requested analysis."""


class NonPeriodic(ProfileError):
    pass


class DegenerateZero(ProfileError):
    pass


class NoTangency(LortorusError):
    pass


class HorizonExceeded(LortorusError):
    pass


class BranchSingular(LortorusError):
    pass


class SpanExhausted(LortorusError):
    pass


class NotPeriodic(LortorusError):
    pass


class NotApplicable(LortorusError):
    pass


class OutOfBand(LortorusError, ValueError):
    pass


class QuadratureSingular(LortorusError):
    pass


class NumericFailure(LortorusError):
    """Integrator or conservation-law failure."""


class ConfigError(LortorusError):
    pass
