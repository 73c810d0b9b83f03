"""LLM-assisted generation of candidate variation annotations.

The provider contract is deliberately tiny: POST a prompt, get text back.
Any hosted model sits behind it as configuration; tests inject an httpx
transport. A run journal makes large batches resumable and keeps one
status line per utterance.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import httpx

from .errors import (
    ConfigError,
    ProviderAuthError,
    ProviderError,
    ProviderRateLimitError,
    ProviderResponseError,
    ProviderTimeoutError,
)
from .refmodel import (
    Finding,
    Utterance,
    VariantSegment,
    VariationReference,
    parse_annotated,
    reference_to_record,
)
from .textnorm import DEFAULT_CONFIG, NormConfig

CATEGORIES = (
    "matra_diacritic",
    "loanword_spelling",
    "compound_split_merge",
    "phonetic",
    "ligature",
    "sandhi",
    "inverse_text_normalization",
)

CATEGORY_TITLES = {
    "matra_diacritic": "Matra and diacritic variations",
    "loanword_spelling": "Spelling variations for loaned words",
    "compound_split_merge": "Splitting or merging compound words",
    "phonetic": "Phonetic variations",
    "ligature": "Ligature variations",
    "sandhi": "Sandhi variations",
    "inverse_text_normalization": "Inverse text normalization variations",
}


@dataclass(frozen=True)
class GuidelineCategory:
    description: str
    examples: tuple[str, ...]


@dataclass(frozen=True)
class GuidelineSet:
    """Per-language prompt material: guidance and few-shot examples for
    each of the seven variation categories."""

    language: str
    categories: dict[str, GuidelineCategory]

    def __post_init__(self) -> None:
        missing = [c for c in CATEGORIES if c not in self.categories]
        if missing:
            raise ConfigError(f"guideline set for {self.language!r} missing categories: {missing}")
        for name, cat in self.categories.items():
            if name not in CATEGORIES:
                raise ConfigError(f"unknown guideline category {name!r}")
            if not cat.examples:
                raise ConfigError(f"guideline category {name!r} needs at least one example")

    @classmethod
    def from_dict(cls, d: dict) -> "GuidelineSet":
        cats = {
            name: GuidelineCategory(
                description=str(c.get("description", "")),
                examples=tuple(c.get("examples", [])),
            )
            for name, c in d.get("categories", {}).items()
        }
        return cls(language=str(d.get("language", "")), categories=cats)

    @classmethod
    def load(cls, path: str | Path) -> "GuidelineSet":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load guideline file {path}: {exc}") from exc
        return cls.from_dict(data)


def build_prompt(utt: Utterance, guide: GuidelineSet) -> str:
    """Deterministic generation prompt for one utterance.

    Contains the transcript, each category's title, guidance and examples,
    and the output-format contract (original text with bracketed variant
    groups, entries separated by comma+space).
    """
    if guide.language != utt.language:
        raise ConfigError(
            f"guideline language {guide.language!r} does not match utterance language {utt.language!r}"
        )
    lines = [
        f"You annotate transcripts in language '{utt.language}' with permissible orthographic variations.",
        "",
        "Consider these categories of variation:",
        "",
    ]
    for i, name in enumerate(CATEGORIES, start=1):
        cat = guide.categories[name]
        lines.append(f"{i}. {CATEGORY_TITLES[name]}: {cat.description}")
        for ex in cat.examples:
            lines.append(f"   example: {ex}")
    lines += [
        "",
        "Output format: repeat the transcript exactly, but wherever a word or a",
        "run of words admits variations, replace it with a bracketed group",
        "listing the original form first and every variant after it, separated",
        "by a comma and a space. Example: the [coloured, colored] one.",
        "Do not add words, drop words, or change anything outside the brackets.",
        "Output only the annotated transcript on a single line.",
        "",
        f"Transcript: {utt.text}",
    ]
    return "\n".join(lines)


@dataclass(frozen=True)
class ProviderConfig:
    """Where and how to reach the text-in/text-out generation endpoint.

    ``credential_env`` names an environment variable; the secret itself is
    never stored, serialized or logged.
    """

    endpoint: str
    model: str
    credential_env: str
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: float = 1.0
    rate_limit_per_s: float = 0.0  # 0 means unlimited

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be at least 1")

    @classmethod
    def load(cls, path: str | Path) -> "ProviderConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load provider config {path}: {exc}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad provider config {path}: {exc}") from exc


class ProviderClient:
    """Retrying, rate-limited wrapper over the provider HTTP contract."""

    def __init__(
        self,
        cfg: ProviderConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._sleep = sleep
        self._client = httpx.Client(transport=transport, timeout=cfg.timeout_s)
        self._last_request = 0.0
        self.last_attempts = 0

    def close(self) -> None:
        self._client.close()

    def _credential(self) -> str:
        secret = os.environ.get(self.cfg.credential_env)
        if not secret:
            raise ProviderAuthError(
                f"credential environment variable {self.cfg.credential_env!r} is not set"
            )
        return secret

    def _throttle(self) -> None:
        if self.cfg.rate_limit_per_s <= 0:
            return
        interval = 1.0 / self.cfg.rate_limit_per_s
        wait = self._last_request + interval - time.monotonic()
        if wait > 0:
            self._sleep(wait)
        self._last_request = time.monotonic()

    def _one_request(self, prompt: str, secret: str) -> str:
        self._throttle()
        try:
            resp = self._client.post(
                self.cfg.endpoint,
                json={"model": self.cfg.model, "prompt": prompt},
                headers={"Authorization": f"Bearer {secret}"},
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeoutError(f"request timed out after {self.cfg.timeout_s}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderResponseError(f"transport failure: {exc}", transient=True) from exc
        if resp.status_code in (401, 403):
            raise ProviderAuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429:
            raise ProviderRateLimitError("provider rate limit hit (HTTP 429)")
        if resp.status_code >= 500:
            raise ProviderResponseError(f"provider unavailable (HTTP {resp.status_code})", transient=True)
        if resp.status_code != 200:
            raise ProviderResponseError(f"unexpected provider status {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise ProviderResponseError("provider response is not JSON") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ProviderResponseError("provider response missing 'text' field")
        return body["text"]

    def request(self, prompt: str) -> str:
        """One completion with retries on transient failures."""
        secret = self._credential()
        attempts = 0
        while True:
            attempts += 1
            self.last_attempts = attempts
            try:
                return self._one_request(prompt, secret)
            except ProviderError as exc:
                if not exc.transient or attempts >= self.cfg.max_attempts:
                    raise
                self._sleep(self.cfg.backoff_s * (2 ** (attempts - 1)))


def request_variations(
    cfg: ProviderConfig,
    prompt: str,
    transport: httpx.BaseTransport | None = None,
) -> str:
    """One-shot provider call honoring the retry policy in ``cfg``."""
    client = ProviderClient(cfg, transport=transport)
    try:
        return client.request(prompt)
    finally:
        client.close()


# --- candidate annotations ---------------------------------------------------


@dataclass(frozen=True)
class CandidateAnnotation:
    """Per-utterance generation outcome, whatever the model returned.

    status: unparsed | parsed | needs_review | accepted | rejected
    """

    utterance_id: str
    language: str
    text: str
    raw: str
    segments: tuple[VariantSegment, ...]
    diagnostics: tuple[Finding, ...]
    status: str

    @property
    def fatal_diagnostics(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.diagnostics if f.severity == "fatal")

    def to_reference(self, cfg: NormConfig = DEFAULT_CONFIG) -> VariationReference:
        from .refmodel import make_utterance  # local import avoids cycle at module load

        utt = make_utterance(self.utterance_id, self.language, self.text, cfg)
        return VariationReference(utterance=utt, segments=self.segments)

    def to_record(self) -> dict:
        return {
            "id": self.utterance_id,
            "language": self.language,
            "text": self.text,
            "raw": self.raw,
            "segments": [
                {"start": s.start, "end": s.end, "variants": list(s.variants)} for s in self.segments
            ],
            "diagnostics": [f.to_dict() for f in self.diagnostics],
            "status": self.status,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CandidateAnnotation":
        return cls(
            utterance_id=rec["id"],
            language=rec.get("language", "und"),
            text=rec["text"],
            raw=rec.get("raw", ""),
            segments=tuple(
                VariantSegment(s["start"], s["end"], tuple(s["variants"]))
                for s in rec.get("segments", [])
            ),
            diagnostics=tuple(Finding.from_dict(f) for f in rec.get("diagnostics", [])),
            status=rec.get("status", "parsed"),
        )


def parse_and_validate(
    utt: Utterance, raw: str, cfg: NormConfig = DEFAULT_CONFIG
) -> CandidateAnnotation:
    """Turn raw model output into a classified candidate. Never raises.

    Fatal findings leave the candidate unparsed; repairable ones (canonical
    reordering, dropped exact duplicates) are applied and flag the record
    for human review.
    """
    segments, findings = parse_annotated(raw.strip(), utt, cfg)
    if segments is None:
        status = "unparsed"
        segments_t: tuple[VariantSegment, ...] = ()
    elif findings:
        status = "needs_review"
        segments_t = tuple(segments)
    else:
        status = "parsed"
        segments_t = tuple(segments)
    return CandidateAnnotation(
        utterance_id=utt.id,
        language=utt.language,
        text=utt.text,
        raw=raw,
        segments=segments_t,
        diagnostics=tuple(findings),
        status=status,
    )


# --- batch runs with a resumable journal ------------------------------------


@dataclass
class RunSummary:
    requested: int = 0
    skipped: int = 0
    succeeded: int = 0
    failed: int = 0
    statuses: dict[str, int] = field(default_factory=dict)


def load_journal(path: Path) -> dict[str, str]:
    """Map utterance id to final status for every journaled attempt."""
    done: dict[str, str] = {}
    if not path.exists():
        return done
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            done[rec["id"]] = rec["status"]
    return done


def _journal_append(path: Path, rec: dict) -> None:
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def run_generation(
    utterances: Iterable[Utterance],
    guide: GuidelineSet,
    provider_cfg: ProviderConfig | None,
    out_path: Path,
    journal_path: Path,
    *,
    cfg: NormConfig = DEFAULT_CONFIG,
    dry_run: bool = False,
    prompt_dir: Path | None = None,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RunSummary:
    """Generate candidate annotations for a batch of utterances.

    Utterances already marked done in the journal are skipped, so an
    interrupted run resumes where it stopped. With ``dry_run`` the prompts
    are written to ``prompt_dir`` and no network traffic happens.
    """
    summary = RunSummary()
    utts = sorted(utterances, key=lambda u: u.id)
    summary.requested = len(utts)

    if dry_run:
        target = prompt_dir if prompt_dir is not None else out_path
        target.mkdir(parents=True, exist_ok=True)
        for utt in utts:
            (target / f"{utt.id}.prompt.txt").write_text(build_prompt(utt, guide), encoding="utf-8")
            summary.succeeded += 1
        return summary

    if provider_cfg is None:
        raise ConfigError("provider config is required unless running with dry_run")
    done = load_journal(journal_path)
    client = ProviderClient(provider_cfg, transport=transport, sleep=sleep)
    try:
        with out_path.open("a", encoding="utf-8") as out:
            for utt in utts:
                if done.get(utt.id) == "done":
                    summary.skipped += 1
                    continue
                prompt = build_prompt(utt, guide)
                try:
                    raw = client.request(prompt)
                except ProviderError as exc:
                    summary.failed += 1
                    _journal_append(
                        journal_path,
                        {
                            "id": utt.id,
                            "status": "failed",
                            "attempts": client.last_attempts,
                            "error": type(exc).__name__,
                            "message": str(exc),
                        },
                    )
                    continue
                cand = parse_and_validate(utt, raw, cfg)
                out.write(json.dumps(cand.to_record(), ensure_ascii=False) + "\n")
                out.flush()
                summary.succeeded += 1
                summary.statuses[cand.status] = summary.statuses.get(cand.status, 0) + 1
                _journal_append(
                    journal_path,
                    {
                        "id": utt.id,
                        "status": "done",
                        "attempts": client.last_attempts,
                        "candidate_status": cand.status,
                    },
                )
    finally:
        client.close()
    return summary


def candidates_to_manifest_records(
    candidates: Iterable[CandidateAnnotation], cfg: NormConfig = DEFAULT_CONFIG
) -> list[dict]:
    """Reference records for every candidate that parsed cleanly."""
    out = []
    for cand in candidates:
        if cand.status in ("parsed", "needs_review", "accepted"):
            out.append(reference_to_record(cand.to_reference(cfg)))
    return out
