"""Deterministic Unicode normalization and tokenization.

References, variants and hypotheses all pass through the same pipeline so
that token indices and comparisons always agree. Everything here is pure:
same input and config, same output, on any platform.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InputError

# Terminal punctuation plus quotes/brackets, the Devanagari danda/double
# danda and the Arabic-script marks used by Urdu. Hyphens and dashes are
# deliberately absent: removing them would silently merge hyphenated words.
DEFAULT_PUNCTUATION = frozenset(
    '.,?!;:"\'()[]{}'
    "‘’“”"  # curly quotes
    "…"                    # ellipsis
    "।॥"              # danda, double danda
    "؟،؛۔"  # Arabic question mark, comma, semicolon, full stop
)

_VALID_FORMS = ("NFC", "NFD", "NFKC", "NFKD")

_WS_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class NormConfig:
    """Normalization settings for one evaluation run.

    Immutable by construction; reports embed the effective config so a run
    can be reproduced. ``collapse_whitespace`` is always on (token spans
    would be meaningless otherwise) and is kept as a field only so the
    serialized config is explicit about it.
    """

    unicode_form: str = "NFC"
    strip_punctuation: bool = True
    punctuation_set: frozenset[str] = field(default=DEFAULT_PUNCTUATION)
    lowercase: bool = False
    collapse_whitespace: bool = True

    def __post_init__(self) -> None:
        if self.unicode_form not in _VALID_FORMS:
            raise InputError(f"unknown unicode form {self.unicode_form!r}; expected one of {_VALID_FORMS}")
        if not self.collapse_whitespace:
            raise InputError("collapse_whitespace cannot be disabled")
        if not self.strip_punctuation and self.punctuation_set:
            # Invariant: the set is empty whenever stripping is off.
            object.__setattr__(self, "punctuation_set", frozenset())
        if self.strip_punctuation and not isinstance(self.punctuation_set, frozenset):
            object.__setattr__(self, "punctuation_set", frozenset(self.punctuation_set))

    @property
    def name(self) -> str:
        """Short stable identifier embedded in manifests and reports."""
        bits = [self.unicode_form.lower()]
        bits.append("strip" if self.strip_punctuation else "keep-punct")
        if self.strip_punctuation and self.punctuation_set != DEFAULT_PUNCTUATION:
            bits.append("custom-punct")
        if self.lowercase:
            bits.append("lower")
        return "|".join(bits)

    def to_dict(self) -> dict:
        d: dict = {
            "unicode_form": self.unicode_form,
            "strip_punctuation": self.strip_punctuation,
            "lowercase": self.lowercase,
            "collapse_whitespace": self.collapse_whitespace,
        }
        if self.strip_punctuation and self.punctuation_set != DEFAULT_PUNCTUATION:
            d["punctuation_set"] = "".join(sorted(self.punctuation_set))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormConfig":
        kwargs = dict(d)
        if "punctuation_set" in kwargs:
            kwargs["punctuation_set"] = frozenset(kwargs["punctuation_set"])
        return cls(**kwargs)


DEFAULT_CONFIG = NormConfig()


def _check_encodable(text: str) -> None:
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InputError(f"text contains invalid code points: {exc}") from exc


def _pipeline(text: str, cfg: NormConfig) -> str:
    out = unicodedata.normalize(cfg.unicode_form, text)
    if cfg.strip_punctuation and cfg.punctuation_set:
        out = "".join(ch for ch in out if ch not in cfg.punctuation_set)
    if cfg.lowercase:
        out = out.lower()
    out = _WS_RUN.sub(" ", out).strip()
    # Character removal can re-expose combining sequences that the form
    # would compose, so re-apply it to keep the output in normal form.
    return unicodedata.normalize(cfg.unicode_form, out)


@lru_cache(maxsize=65536)
def _normalize_cached(text: str, cfg: NormConfig) -> str:
    out = _pipeline(text, cfg)
    # One extra pass settles rare interactions between recomposition and
    # the configured filters; in practice it is a no-op.
    settled = _pipeline(out, cfg)
    while settled != out:
        out, settled = settled, _pipeline(settled, cfg)
    return settled


def normalize(text: str, cfg: NormConfig = DEFAULT_CONFIG) -> str:
    """Normalize ``text`` under ``cfg``. Idempotent.

    Raises InputError when the text is not valid Unicode (lone surrogates).
    """
    _check_encodable(text)
    return _normalize_cached(text, cfg)


@lru_cache(maxsize=65536)
def _tokenize_cached(text: str, cfg: NormConfig) -> tuple[str, ...]:
    return tuple(_normalize_cached(text, cfg).split())


def tokenize(text: str, cfg: NormConfig = DEFAULT_CONFIG) -> tuple[str, ...]:
    """Split normalized text into maximal non-whitespace runs."""
    _check_encodable(text)
    return _tokenize_cached(text, cfg)
