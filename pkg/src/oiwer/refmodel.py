"""Reference data model: utterances, variant segments, manifests and lattices.

A reference is the original transcript plus, for some token spans, the set
of alternative surface forms a scorer should accept. Compiling a reference
produces a lattice whose source-to-sink paths are exactly the valid token
sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import IO, Iterable, Iterator

from .errors import ParseError, PathLimitExceeded, ValidationError
from .textnorm import DEFAULT_CONFIG, NormConfig, tokenize

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class Utterance:
    """One transcript with its derived token sequence."""

    id: str
    language: str
    text: str
    tokens: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.tokens)


def make_utterance(id: str, language: str, text: str, cfg: NormConfig = DEFAULT_CONFIG) -> Utterance:
    if not id:
        raise ValidationError("utterance id must be non-empty", rule="id-non-empty")
    toks = tokenize(text, cfg)
    if not toks:
        raise ValidationError(
            "transcript has no tokens after normalization", utterance_id=id, rule="non-empty-transcript"
        )
    return Utterance(id=id, language=language, text=text, tokens=toks)


@dataclass(frozen=True)
class VariantSegment:
    """A token span [start, end) with its ordered alternative realizations.

    ``variants[0]`` is canonical: it tokenizes to exactly the original
    tokens of the span, so the original transcript always stays a valid
    path through the compiled lattice.
    """

    start: int
    end: int
    variants: tuple[str, ...]


@dataclass(frozen=True)
class VariationReference:
    """An utterance plus its sorted, disjoint explicit segments.

    Tokens not covered by an explicit segment act as implicit singleton
    segments; they are derived, never stored.
    """

    utterance: Utterance
    segments: tuple[VariantSegment, ...]

    @property
    def k(self) -> int:
        return self.utterance.k

    @property
    def segment_count(self) -> int:
        """Total segment count L: explicit plus implicit singletons."""
        covered = sum(s.end - s.start for s in self.segments)
        return self.k - covered + len(self.segments)

    def compiled_segments(self, cfg: NormConfig = DEFAULT_CONFIG) -> list["CompiledSegment"]:
        """Materialize explicit and implicit segments, in token order."""
        out: list[CompiledSegment] = []
        pos = 0
        for idx, seg in enumerate(self.segments):
            for t in range(pos, seg.start):
                out.append(CompiledSegment(t, t + 1, ((self.utterance.tokens[t],),), None))
            variant_tokens = tuple(tokenize(v, cfg) for v in seg.variants)
            out.append(CompiledSegment(seg.start, seg.end, variant_tokens, idx))
            pos = seg.end
        for t in range(pos, self.k):
            out.append(CompiledSegment(t, t + 1, ((self.utterance.tokens[t],),), None))
        return out


@dataclass(frozen=True)
class CompiledSegment:
    """A segment ready for lattice construction: token lists per variant."""

    start: int
    end: int
    variant_tokens: tuple[tuple[str, ...], ...]
    explicit_index: int | None  # position in VariationReference.segments, None if implicit


@dataclass(frozen=True)
class Lattice:
    """Token-edge DAG compiled from a reference.

    Nodes are numbered in topological order; ``boundaries[l]`` is the node
    between segment l-1 and segment l (``boundaries[0]`` the source,
    ``boundaries[-1]`` the sink). Multi-token variants thread through
    intra-variant nodes, so every edge carries exactly one token.
    """

    num_nodes: int
    boundaries: tuple[int, ...]
    edge_src: tuple[int, ...]
    edge_dst: tuple[int, ...]
    edge_token: tuple[str, ...]
    edge_segment: tuple[int, ...]
    edge_variant: tuple[int, ...]
    in_edges: tuple[tuple[int, ...], ...]
    path_count: int
    variant_counts: tuple[int, ...]
    explicit_of_segment: tuple[int | None, ...]
    segment_variant_tokens: tuple[tuple[tuple[str, ...], ...], ...]
    ref_len_original: int

    @property
    def num_segments(self) -> int:
        return len(self.variant_counts)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)


def build_lattice(ref: VariationReference, cfg: NormConfig = DEFAULT_CONFIG) -> Lattice:
    """Compile ``ref`` into its variation lattice.

    Assumes a validated reference; still rejects variants that normalize
    to zero tokens, since those would break the one-token-per-edge shape.
    """
    segments = ref.compiled_segments(cfg)

    edge_src: list[int] = []
    edge_dst: list[int] = []
    edge_token: list[str] = []
    edge_segment: list[int] = []
    edge_variant: list[int] = []
    boundaries = [0]
    next_node = 1
    path_count = 1
    variant_counts: list[int] = []
    explicit_of_segment: list[int | None] = []

    for l, seg in enumerate(segments):
        for vi, toks in enumerate(seg.variant_tokens):
            if not toks:
                raise ValidationError(
                    "variant normalizes to zero tokens",
                    utterance_id=ref.utterance.id,
                    segment_index=seg.explicit_index,
                    rule="variant-non-empty",
                )
        start_node = boundaries[-1]
        intra_needed = sum(len(t) - 1 for t in seg.variant_tokens)
        end_node = next_node + intra_needed
        intra = next_node
        for vi, toks in enumerate(seg.variant_tokens):
            prev = start_node
            for pos, tok in enumerate(toks):
                last = pos == len(toks) - 1
                dst = end_node if last else intra
                edge_src.append(prev)
                edge_dst.append(dst)
                edge_token.append(tok)
                edge_segment.append(l)
                edge_variant.append(vi)
                if not last:
                    intra += 1
                prev = dst
        next_node = end_node + 1
        boundaries.append(end_node)
        path_count *= len(seg.variant_tokens)
        variant_counts.append(len(seg.variant_tokens))
        explicit_of_segment.append(seg.explicit_index)

    in_edges: list[list[int]] = [[] for _ in range(next_node)]
    for ei, dst in enumerate(edge_dst):
        in_edges[dst].append(ei)

    return Lattice(
        num_nodes=next_node,
        boundaries=tuple(boundaries),
        edge_src=tuple(edge_src),
        edge_dst=tuple(edge_dst),
        edge_token=tuple(edge_token),
        edge_segment=tuple(edge_segment),
        edge_variant=tuple(edge_variant),
        in_edges=tuple(tuple(e) for e in in_edges),
        path_count=path_count,
        variant_counts=tuple(variant_counts),
        explicit_of_segment=tuple(explicit_of_segment),
        segment_variant_tokens=tuple(s.variant_tokens for s in segments),
        ref_len_original=ref.k,
    )


def enumerate_paths(lat: Lattice, limit: int = 10000) -> list[tuple[str, ...]]:
    """Every distinct source-to-sink token sequence, in variant-index order.

    Refuses lattices above ``limit`` paths rather than blowing up; this is
    the oracle-side companion to the alignment DP, so it deliberately walks
    segment variants instead of reusing any alignment machinery.
    """
    if lat.path_count > limit:
        raise PathLimitExceeded(f"lattice has {lat.path_count} paths, limit is {limit}")
    paths = []
    for combo in product(*lat.segment_variant_tokens):
        flat: tuple[str, ...] = ()
        for toks in combo:
            flat = flat + toks
        paths.append(flat)
    return paths


# --- validation -----------------------------------------------------------


def iter_violations(ref: VariationReference, cfg: NormConfig = DEFAULT_CONFIG) -> Iterator[ValidationError]:
    """Yield every invariant violation in ``ref`` (empty when valid)."""
    utt = ref.utterance
    uid = utt.id
    if not uid:
        yield ValidationError("utterance id must be non-empty", rule="id-non-empty")
    if utt.k < 1:
        yield ValidationError("transcript has no tokens", utterance_id=uid, rule="non-empty-transcript")
        return
    prev_end = 0
    last_start = -1
    for i, seg in enumerate(ref.segments):
        if not (0 <= seg.start < seg.end <= utt.k):
            yield ValidationError(
                f"span [{seg.start},{seg.end}) out of bounds for K={utt.k}",
                utterance_id=uid, segment_index=i, rule="span-in-bounds",
            )
            continue
        if seg.start < last_start:
            yield ValidationError(
                "segments not sorted by start", utterance_id=uid, segment_index=i, rule="segments-sorted"
            )
        if seg.start < prev_end:
            yield ValidationError(
                f"span [{seg.start},{seg.end}) overlaps previous segment",
                utterance_id=uid, segment_index=i, rule="segments-disjoint",
            )
        last_start = seg.start
        prev_end = max(prev_end, seg.end)
        if not seg.variants:
            yield ValidationError(
                "segment has no variants", utterance_id=uid, segment_index=i, rule="variants-non-empty"
            )
            continue
        seen: set[tuple[str, ...]] = set()
        for vi, v in enumerate(seg.variants):
            toks = tokenize(v, cfg)
            if not toks:
                yield ValidationError(
                    f"variant {vi} ({v!r}) normalizes to zero tokens",
                    utterance_id=uid, segment_index=i, rule="variant-non-empty",
                )
                continue
            if toks in seen:
                yield ValidationError(
                    f"variant {vi} ({v!r}) duplicates an earlier variant",
                    utterance_id=uid, segment_index=i, rule="variants-distinct",
                )
            seen.add(toks)
        span = utt.tokens[seg.start:seg.end]
        if tokenize(seg.variants[0], cfg) != span:
            yield ValidationError(
                f"first variant {seg.variants[0]!r} does not tokenize to the original span {' '.join(span)!r}",
                utterance_id=uid, segment_index=i, rule="canonical-variant",
            )


def validate_reference(ref: VariationReference, cfg: NormConfig = DEFAULT_CONFIG) -> None:
    for err in iter_violations(ref, cfg):
        raise err


# --- manifest I/O ----------------------------------------------------------


def _segment_from_record(rec: dict, line: int) -> VariantSegment:
    try:
        start = int(rec["start"])
        end = int(rec["end"])
        variants = rec["variants"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed segment record: {exc}", line=line) from exc
    if not isinstance(variants, list) or not all(isinstance(v, str) for v in variants):
        raise ParseError("segment variants must be a list of strings", line=line)
    return VariantSegment(start=start, end=end, variants=tuple(variants))


def _canonicalize_segment(
    seg: VariantSegment, utt: Utterance, cfg: NormConfig
) -> VariantSegment:
    """Ensure the original span's text sits at variant index 0.

    Moves a matching variant to the front when it is listed elsewhere, and
    inserts the original span text when it is missing entirely.
    """
    if not (0 <= seg.start < seg.end <= utt.k) or not seg.variants:
        return seg  # leave for the validator to report
    span = utt.tokens[seg.start:seg.end]
    for vi, v in enumerate(seg.variants):
        if tokenize(v, cfg) == span:
            if vi == 0:
                return seg
            reordered = (seg.variants[vi],) + seg.variants[:vi] + seg.variants[vi + 1:]
            return VariantSegment(seg.start, seg.end, reordered)
    return VariantSegment(seg.start, seg.end, (" ".join(span),) + seg.variants)


def reference_from_record(rec: dict, cfg: NormConfig = DEFAULT_CONFIG, line: int = 0) -> VariationReference:
    for key in ("id", "text"):
        if key not in rec:
            raise ParseError(f"record missing required field {key!r}", line=line)
    if not isinstance(rec["id"], str) or not isinstance(rec["text"], str):
        raise ParseError("id and text must be strings", line=line)
    utt = make_utterance(rec["id"], str(rec.get("language", "und")), rec["text"], cfg)
    raw_segments = rec.get("segments", [])
    if not isinstance(raw_segments, list):
        raise ParseError("segments must be a list", line=line)
    segments = [_segment_from_record(s, line) for s in raw_segments]
    segments.sort(key=lambda s: (s.start, s.end))
    segments = [_canonicalize_segment(s, utt, cfg) for s in segments]
    ref = VariationReference(utterance=utt, segments=tuple(segments))
    validate_reference(ref, cfg)
    return ref


def reference_to_record(ref: VariationReference) -> dict:
    return {
        "id": ref.utterance.id,
        "language": ref.utterance.language,
        "text": ref.utterance.text,
        "segments": [
            {"start": s.start, "end": s.end, "variants": list(s.variants)} for s in ref.segments
        ],
    }


def _iter_lines(stream: IO[str] | Iterable[str]) -> Iterator[str]:
    for raw in stream:
        yield raw


def parse_manifest(
    stream: IO[str] | Iterable[str],
    cfg: NormConfig = DEFAULT_CONFIG,
    *,
    allow_norm_mismatch: bool = False,
) -> list[VariationReference]:
    """Parse a line-delimited reference manifest.

    An optional leading header object (``{"manifest_version": ..., "norm": ...}``)
    pins the normalization the spans were created under; a conflicting run
    config is rejected so token indices cannot silently shift.
    """
    refs: list[VariationReference] = []
    seen_ids: set[str] = set()
    for n, raw in enumerate(_iter_lines(stream), start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=n) from exc
        if not isinstance(rec, dict):
            raise ParseError("record must be a JSON object", line=n)
        if "manifest_version" in rec and "id" not in rec:
            declared = rec.get("norm")
            if declared is not None and declared != cfg.name and not allow_norm_mismatch:
                raise ValidationError(
                    f"manifest was created under norm config {declared!r} but this run uses {cfg.name!r}",
                    rule="norm-config-mismatch",
                )
            continue
        ref = reference_from_record(rec, cfg, line=n)
        if ref.utterance.id in seen_ids:
            raise ValidationError(
                f"duplicate utterance id {ref.utterance.id!r}",
                utterance_id=ref.utterance.id, rule="id-unique",
            )
        seen_ids.add(ref.utterance.id)
        refs.append(ref)
    return refs


def serialize_manifest(
    refs: Iterable[VariationReference],
    cfg: NormConfig = DEFAULT_CONFIG,
    *,
    include_header: bool = True,
) -> str:
    lines = []
    if include_header:
        lines.append(json.dumps({"manifest_version": MANIFEST_VERSION, "norm": cfg.name}, ensure_ascii=False))
    for ref in refs:
        lines.append(json.dumps(reference_to_record(ref), ensure_ascii=False))
    return "\n".join(lines) + "\n" if lines else ""


def parse_hypotheses(stream: IO[str] | Iterable[str]) -> dict[str, str]:
    """Parse a line-delimited ``{id, text}`` hypothesis manifest."""
    hyps: dict[str, str] = {}
    for n, raw in enumerate(_iter_lines(stream), start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=n) from exc
        if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
            raise ParseError("hypothesis record needs id and text fields", line=n)
        if rec["id"] in hyps:
            raise ValidationError(f"duplicate hypothesis id {rec['id']!r}", utterance_id=rec["id"], rule="id-unique")
        hyps[str(rec["id"])] = str(rec["text"])
    return hyps


# --- bracketed annotation format -------------------------------------------


@dataclass
class Finding:
    """One diagnostic from bracketed-annotation parsing."""

    severity: str  # "fatal" | "repairable"
    code: str
    message: str
    offset: int | None = None

    def to_dict(self) -> dict:
        d = {"severity": self.severity, "code": self.code, "message": self.message}
        if self.offset is not None:
            d["offset"] = self.offset
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(
            severity=d["severity"], code=d["code"], message=d["message"], offset=d.get("offset")
        )


class BracketError(ParseError):
    """Raised by strict bracketed parsing; carries the full finding list."""

    def __init__(self, findings: list[Finding]):
        self.findings = findings
        first = findings[0]
        super().__init__(f"{first.code}: {first.message}", offset=first.offset)

    @property
    def repairable(self) -> bool:
        return all(f.severity == "repairable" for f in self.findings)


def _split_annotated(annotated: str) -> tuple[list[tuple[str, str, int]], list[Finding]]:
    """Split into ("lit" | "group", content, offset) parts. Brackets do not nest."""
    parts: list[tuple[str, str, int]] = []
    findings: list[Finding] = []
    i = 0
    lit_start = 0
    n = len(annotated)
    while i < n:
        ch = annotated[i]
        if ch == "[":
            close = annotated.find("]", i + 1)
            nested = annotated.find("[", i + 1)
            if close == -1 or (nested != -1 and nested < close):
                findings.append(
                    Finding("fatal", "unbalanced-brackets", "unmatched or nested '['", offset=i)
                )
                return parts, findings
            if i > lit_start:
                parts.append(("lit", annotated[lit_start:i], lit_start))
            parts.append(("group", annotated[i + 1:close], i))
            i = close + 1
            lit_start = i
        elif ch == "]":
            findings.append(Finding("fatal", "unbalanced-brackets", "unmatched ']'", offset=i))
            return parts, findings
        else:
            i += 1
    if lit_start < n:
        parts.append(("lit", annotated[lit_start:], lit_start))
    return parts, findings


def parse_annotated(
    annotated: str, original: Utterance, cfg: NormConfig = DEFAULT_CONFIG
) -> tuple[list[VariantSegment] | None, list[Finding]]:
    """Lenient bracketed-annotation parser.

    Returns the segment list with repairs applied (canonical reordering,
    exact-duplicate removal) plus all findings; segments are None when a
    fatal finding made the annotation unusable.
    """
    parts, findings = _split_annotated(annotated)
    if findings:
        return None, findings

    segments: list[VariantSegment] = []
    pos = 0
    k = original.k
    for kind, content, offset in parts:
        if kind == "lit":
            for tok in tokenize(content, cfg):
                if pos >= k or original.tokens[pos] != tok:
                    expected = original.tokens[pos] if pos < k else "<end>"
                    findings.append(
                        Finding(
                            "fatal", "literal-divergence",
                            f"annotated token {tok!r} does not match original {expected!r} at token {pos}",
                            offset=offset,
                        )
                    )
                    return None, findings
                pos += 1
            continue

        entries = [e.strip() for e in content.split(",")]
        if any(not e for e in entries):
            findings.append(
                Finding("fatal", "empty-variant", "empty entry in variant group (stray comma?)", offset=offset)
            )
            return None, findings
        entry_tokens = [tokenize(e, cfg) for e in entries]
        if any(not t for t in entry_tokens):
            findings.append(
                Finding("fatal", "variant-empty-after-normalization",
                        "a variant normalizes to zero tokens", offset=offset)
            )
            return None, findings

        match_index = None
        for vi, toks in enumerate(entry_tokens):
            if original.tokens[pos:pos + len(toks)] == toks:
                match_index = vi
                break
        if match_index is None:
            findings.append(
                Finding(
                    "fatal", "no-variant-matches-original",
                    f"no variant in group matches the original transcript at token {pos}",
                    offset=offset,
                )
            )
            return None, findings
        if match_index != 0:
            findings.append(
                Finding(
                    "repairable", "canonical-reordered",
                    f"original form {entries[match_index]!r} was listed at position {match_index}; moved to front",
                    offset=offset,
                )
            )
            entries.insert(0, entries.pop(match_index))
            entry_tokens.insert(0, entry_tokens.pop(match_index))

        deduped: list[str] = []
        seen: set[tuple[str, ...]] = set()
        for e, toks in zip(entries, entry_tokens):
            if toks in seen:
                findings.append(
                    Finding("repairable", "duplicate-variant-dropped",
                            f"variant {e!r} duplicates an earlier entry; dropped", offset=offset)
                )
                continue
            seen.add(toks)
            deduped.append(e)

        span_len = len(entry_tokens[0])
        segments.append(VariantSegment(start=pos, end=pos + span_len, variants=tuple(deduped)))
        pos += span_len

    if pos != k:
        findings.append(
            Finding("fatal", "original-not-fully-covered",
                    f"annotation covers {pos} of {k} original tokens", offset=len(annotated))
        )
        return None, findings
    return segments, findings


def parse_bracketed(
    annotated: str, original: Utterance, cfg: NormConfig = DEFAULT_CONFIG
) -> list[VariantSegment]:
    """Strict bracketed-annotation parser: any finding raises BracketError."""
    segments, findings = parse_annotated(annotated, original, cfg)
    if findings or segments is None:
        raise BracketError(findings)
    return segments


def render_bracketed(ref: VariationReference) -> str:
    """Inverse of parse_bracketed for a valid reference."""
    out: list[str] = []
    pos = 0
    for seg in ref.segments:
        out.extend(ref.utterance.tokens[pos:seg.start])
        out.append("[" + ", ".join(seg.variants) + "]")
        pos = seg.end
    out.extend(ref.utterance.tokens[pos:])
    return " ".join(out)


# --- dataset statistics -----------------------------------------------------


def dataset_stats(refs: list[VariationReference]) -> dict:
    """Utterance/word/variation counts, overall and per language.

    ``variations`` counts every variant of every explicit segment,
    canonical forms included; implicit singletons contribute nothing.
    """
    def empty() -> dict:
        return {"utterances": 0, "words": 0, "variations": 0}

    total = empty()
    by_language: dict[str, dict] = {}
    for ref in refs:
        lang = ref.utterance.language
        row = by_language.setdefault(lang, empty())
        for tgt in (total, row):
            tgt["utterances"] += 1
            tgt["words"] += ref.k
            tgt["variations"] += sum(len(s.variants) for s in ref.segments)
    for row in list(by_language.values()) + [total]:
        row["variations_per_word"] = row["variations"] / row["words"] if row["words"] else 0.0
    return {"total": total, "by_language": dict(sorted(by_language.items()))}
