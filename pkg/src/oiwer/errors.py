"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class OiwerError(Exception):
    """Base class for all toolkit errors."""


class InputError(OiwerError):
    """Bad user input: undecodable text, malformed files, missing paths."""


class ParseError(InputError):
    """A record or annotation could not be parsed.

    Carries enough location information (line number or character offset)
    to point a user at the problem.
    """

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        self.line = line
        self.offset = offset
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class ValidationError(InputError):
    """A parsed record violates a model invariant.

    Names the utterance, the offending segment (when applicable) and the
    rule that was broken so diagnostics stay machine-readable.
    """

    def __init__(
        self,
        message: str,
        *,
        utterance_id: str | None = None,
        segment_index: int | None = None,
        rule: str | None = None,
    ):
        self.utterance_id = utterance_id
        self.segment_index = segment_index
        self.rule = rule
        parts = []
        if utterance_id is not None:
            parts.append(f"utterance={utterance_id}")
        if segment_index is not None:
            parts.append(f"segment={segment_index}")
        if rule is not None:
            parts.append(f"rule={rule}")
        super().__init__(f"{message} [{' '.join(parts)}]" if parts else message)


class PathLimitExceeded(OiwerError):
    """Refused to enumerate a lattice whose path count exceeds the caller's limit."""


class UndefinedStatisticError(OiwerError):
    """A statistic is mathematically undefined for the given data (never silently 0)."""


class ConfigError(OiwerError):
    """A configuration file or object is incomplete or inconsistent."""


class ProviderError(OiwerError):
    """Base class for LLM provider failures.

    ``transient`` tells the retry loop whether another attempt may succeed;
    it defaults per class and can be overridden per instance (e.g. a 5xx is
    a transient response error, a malformed body is not).
    """

    transient = False

    def __init__(self, message: str, *, transient: bool | None = None):
        super().__init__(message)
        if transient is not None:
            self.transient = transient


class ProviderAuthError(ProviderError):
    """Authentication or authorization rejected; retrying cannot help."""


class ProviderRateLimitError(ProviderError):
    """Provider asked us to back off (HTTP 429)."""

    transient = True


class ProviderTimeoutError(ProviderError):
    """Request did not complete within the configured timeout."""

    transient = True


class ProviderResponseError(ProviderError):
    """Provider answered with something we cannot interpret."""
