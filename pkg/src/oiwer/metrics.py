"""Corpus-level aggregation, report formats and comparison statistics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .align import POLICY_ORIGINAL, ScorePolicy, align_lattice, wer
from .errors import InputError, UndefinedStatisticError, ValidationError
from .refmodel import VariationReference, build_lattice
from .textnorm import DEFAULT_CONFIG, NormConfig, tokenize

REPORT_SCHEMA_VERSION = 1

_BREAKDOWN_KEYS = ("S", "I", "D", "M")


@dataclass(frozen=True)
class UtteranceScore:
    """Both metrics for one utterance, with enough detail to re-derive them."""

    id: str
    language: str
    wer_num: int
    wer_den: int
    oiwer_num: int
    oiwer_den: int
    wer_breakdown: dict[str, int]
    oiwer_breakdown: dict[str, int]
    hyp_len: int
    oiwer_path_len: int
    chosen_variants: dict[int, int] = field(default_factory=dict)

    @property
    def wer_ratio(self) -> float:
        return self.wer_num / self.wer_den

    @property
    def oiwer_ratio(self) -> float:
        return self.oiwer_num / self.oiwer_den

    def validate(self) -> None:
        if self.wer_den <= 0 or self.oiwer_den <= 0:
            raise ValidationError("score denominators must be positive", utterance_id=self.id, rule="den-positive")
        w, o = self.wer_breakdown, self.oiwer_breakdown
        if w["S"] + w["D"] + w["M"] != self.wer_den:
            raise ValidationError("S+D+M must equal reference length", utterance_id=self.id, rule="ref-accounting")
        if w["S"] + w["I"] + w["M"] != self.hyp_len or o["S"] + o["I"] + o["M"] != self.hyp_len:
            raise ValidationError("S+I+M must equal hypothesis length", utterance_id=self.id, rule="hyp-accounting")
        if o["S"] + o["D"] + o["M"] != self.oiwer_path_len:
            raise ValidationError("S+D+M must equal chosen path length", utterance_id=self.id, rule="path-accounting")


def score_utterance(
    ref: VariationReference,
    hyp_text: str,
    cfg: NormConfig = DEFAULT_CONFIG,
    policy: ScorePolicy = POLICY_ORIGINAL,
) -> UtteranceScore:
    """Score one hypothesis against one reference under both metrics."""
    hyp_tokens = tokenize(hyp_text, cfg)
    w = wer(ref.utterance, hyp_tokens)
    lat = build_lattice(ref, cfg)
    o_align = align_lattice(lat, hyp_tokens)
    o_den = ref.k if policy.denominator == "original" else o_align.ref_len_path
    score = UtteranceScore(
        id=ref.utterance.id,
        language=ref.utterance.language,
        wer_num=w.numerator,
        wer_den=w.denominator,
        oiwer_num=o_align.cost,
        oiwer_den=o_den,
        wer_breakdown=w.alignment.breakdown(),
        oiwer_breakdown=o_align.breakdown(),
        hyp_len=len(hyp_tokens),
        oiwer_path_len=o_align.ref_len_path,
        chosen_variants=o_align.chosen_variants,
    )
    score.validate()
    return score


@dataclass(frozen=True)
class CorpusReport:
    """Per-utterance scores plus micro/macro aggregates.

    Corpus and per-language figures are micro averages (summed numerators
    over summed denominators); ``macro`` is the unweighted mean of the
    per-language micro ratios. Both are kept because per-language tables
    and cross-language summaries weight differently.
    """

    scores: tuple[UtteranceScore, ...]  # sorted by id
    corpus: dict
    by_language: dict[str, dict]
    macro: dict
    norm_config: dict
    policy: str


def _empty_bucket() -> dict:
    return {
        "utterances": 0,
        "wer_num": 0, "wer_den": 0,
        "oiwer_num": 0, "oiwer_den": 0,
        "wer_breakdown": {k: 0 for k in _BREAKDOWN_KEYS},
        "oiwer_breakdown": {k: 0 for k in _BREAKDOWN_KEYS},
    }


def _add_score(bucket: dict, s: UtteranceScore) -> None:
    bucket["utterances"] += 1
    bucket["wer_num"] += s.wer_num
    bucket["wer_den"] += s.wer_den
    bucket["oiwer_num"] += s.oiwer_num
    bucket["oiwer_den"] += s.oiwer_den
    for k in _BREAKDOWN_KEYS:
        bucket["wer_breakdown"][k] += s.wer_breakdown[k]
        bucket["oiwer_breakdown"][k] += s.oiwer_breakdown[k]


def _finish_bucket(bucket: dict) -> dict:
    bucket["wer"] = bucket["wer_num"] / bucket["wer_den"]
    bucket["oiwer"] = bucket["oiwer_num"] / bucket["oiwer_den"]
    return bucket


def aggregate(
    scores: Sequence[UtteranceScore],
    norm_config: NormConfig = DEFAULT_CONFIG,
    policy: ScorePolicy = POLICY_ORIGINAL,
) -> CorpusReport:
    """Fold per-utterance scores into a corpus report.

    Order-independent: the input is sorted by utterance id before anything
    else, so shuffled inputs produce identical reports.
    """
    if not scores:
        raise InputError("cannot aggregate an empty score list")
    ordered = tuple(sorted(scores, key=lambda s: s.id))
    corpus = _empty_bucket()
    by_language: dict[str, dict] = {}
    for s in ordered:
        _add_score(corpus, s)
        _add_score(by_language.setdefault(s.language, _empty_bucket()), s)
    corpus = _finish_bucket(corpus)
    by_language = {lang: _finish_bucket(b) for lang, b in sorted(by_language.items())}
    langs = list(by_language)
    macro = {
        "wer": sum(by_language[l]["wer"] for l in langs) / len(langs),
        "oiwer": sum(by_language[l]["oiwer"] for l in langs) / len(langs),
    }
    return CorpusReport(
        scores=ordered,
        corpus=corpus,
        by_language=by_language,
        macro=macro,
        norm_config=norm_config.to_dict(),
        policy=policy.denominator,
    )


def error_shift(report: CorpusReport) -> dict[str, int]:
    """How many errors of each type the variation lattice removed.

    Positive values mean the plain-WER alignment had more of that error
    type than the lattice alignment.
    """
    w = report.corpus["wer_breakdown"]
    o = report.corpus["oiwer_breakdown"]
    return {
        "delta_S": w["S"] - o["S"],
        "delta_I": w["I"] - o["I"],
        "delta_D": w["D"] - o["D"],
    }


def r_squared(pairs: Sequence[tuple[float, float]]) -> float:
    """Coefficient of determination of the simple linear fit of y on x.

    Equals the squared Pearson correlation. Computed in exact rational
    arithmetic so perfectly linear input returns exactly 1.0 and the result
    can never drift outside [0, 1]. Degenerate inputs (fewer than two
    points, zero variance on either axis) raise instead of returning 0.
    """
    if len(pairs) < 2:
        raise UndefinedStatisticError("need at least two (x, y) pairs")
    n = len(pairs)
    xs = [Fraction(x) for x, _ in pairs]
    ys = [Fraction(y) for _, y in pairs]
    sx, sy = sum(xs), sum(ys)
    sxx = n * sum(x * x for x in xs) - sx * sx
    syy = n * sum(y * y for y in ys) - sy * sy
    sxy = n * sum(x * y for x, y in zip(xs, ys)) - sx * sy
    if syy == 0:
        raise UndefinedStatisticError("y has zero variance; R^2 is undefined")
    if sxx == 0:
        raise UndefinedStatisticError("x has zero variance; R^2 is undefined")
    return float(sxy * sxy / (sxx * syy))


def compare_reports(a: CorpusReport, b: CorpusReport) -> dict:
    """Per-language and corpus metric gaps between two systems (a minus b)."""
    ids_a = {s.id for s in a.scores}
    ids_b = {s.id for s in b.scores}
    if ids_a != ids_b:
        missing = sorted(ids_a ^ ids_b)
        raise InputError(f"reports cover different utterances; symmetric difference: {missing[:20]}")

    def gaps(ra: dict, rb: dict) -> dict:
        return {
            "wer_gap": ra["wer"] - rb["wer"],
            "oiwer_gap": ra["oiwer"] - rb["oiwer"],
        }

    return {
        "corpus": gaps(a.corpus, b.corpus),
        "by_language": {
            lang: gaps(a.by_language[lang], b.by_language[lang]) for lang in a.by_language
        },
    }


# --- serialization and rendering -------------------------------------------


def report_to_dict(report: CorpusReport) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {"norm": report.norm_config, "policy": report.policy},
        "corpus": report.corpus,
        "macro": report.macro,
        "languages": report.by_language,
        "utterances": [
            {
                "id": s.id,
                "language": s.language,
                "wer": {"num": s.wer_num, "den": s.wer_den, "ratio": s.wer_ratio, **s.wer_breakdown},
                "oiwer": {
                    "num": s.oiwer_num, "den": s.oiwer_den, "ratio": s.oiwer_ratio,
                    **s.oiwer_breakdown,
                    "path_len": s.oiwer_path_len,
                    "chosen_variants": {str(k): v for k, v in sorted(s.chosen_variants.items())},
                },
                "hyp_len": s.hyp_len,
            }
            for s in report.scores
        ],
    }


def report_from_dict(d: dict) -> CorpusReport:
    scores = []
    for u in d["utterances"]:
        scores.append(
            UtteranceScore(
                id=u["id"],
                language=u["language"],
                wer_num=u["wer"]["num"],
                wer_den=u["wer"]["den"],
                oiwer_num=u["oiwer"]["num"],
                oiwer_den=u["oiwer"]["den"],
                wer_breakdown={k: u["wer"][k] for k in _BREAKDOWN_KEYS},
                oiwer_breakdown={k: u["oiwer"][k] for k in _BREAKDOWN_KEYS},
                hyp_len=u["hyp_len"],
                oiwer_path_len=u["oiwer"]["path_len"],
                chosen_variants={int(k): v for k, v in u["oiwer"].get("chosen_variants", {}).items()},
            )
        )
    return CorpusReport(
        scores=tuple(scores),
        corpus=d["corpus"],
        by_language=d["languages"],
        macro=d["macro"],
        norm_config=d["config"]["norm"],
        policy=d["config"]["policy"],
    )


def render_table(report: CorpusReport) -> str:
    """Aligned-column text rendering of corpus and per-language figures."""
    rows = [("language", "utts", "wer", "oiwer", "S", "I", "D", "dS", "dI", "dD")]

    def fmt(lang: str, b: dict) -> tuple[str, ...]:
        wb, ob = b["wer_breakdown"], b["oiwer_breakdown"]
        return (
            lang,
            str(b["utterances"]),
            f"{b['wer']:.4f}",
            f"{b['oiwer']:.4f}",
            str(ob["S"]), str(ob["I"]), str(ob["D"]),
            str(wb["S"] - ob["S"]), str(wb["I"] - ob["I"]), str(wb["D"] - ob["D"]),
        )

    for lang, bucket in report.by_language.items():
        rows.append(fmt(lang, bucket))
    rows.append(fmt("ALL", report.corpus))
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.append("")
    lines.append(f"macro wer={report.macro['wer']:.4f}  macro oiwer={report.macro['oiwer']:.4f}")
    lines.append(f"policy={report.policy}")
    return "\n".join(lines) + "\n"


def render_csv(report: CorpusReport) -> str:
    """Per-utterance scores as comma-separated values."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "id", "language",
        "wer_num", "wer_den", "wer",
        "oiwer_num", "oiwer_den", "oiwer",
        "wer_S", "wer_I", "wer_D", "wer_M",
        "oiwer_S", "oiwer_I", "oiwer_D", "oiwer_M",
    ])
    for s in report.scores:
        writer.writerow([
            s.id, s.language,
            s.wer_num, s.wer_den, f"{s.wer_ratio:.6f}",
            s.oiwer_num, s.oiwer_den, f"{s.oiwer_ratio:.6f}",
            s.wer_breakdown["S"], s.wer_breakdown["I"], s.wer_breakdown["D"], s.wer_breakdown["M"],
            s.oiwer_breakdown["S"], s.oiwer_breakdown["I"], s.oiwer_breakdown["D"], s.oiwer_breakdown["M"],
        ])
    return buf.getvalue()


def serialize_report(report: CorpusReport, extra: dict | None = None) -> str:
    """Stable JSON rendering; ``extra`` merges provenance fields in."""
    doc = report_to_dict(report)
    if extra:
        doc.update(extra)
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def dataset_stats_table(stats: dict) -> str:
    """Aligned-column rendering of dataset_stats output."""
    rows = [("lang", "utts", "words", "vars", "vars/word")]
    for lang, b in stats["by_language"].items():
        rows.append((lang, str(b["utterances"]), str(b["words"]), str(b["variations"]),
                     f"{b['variations_per_word']:.2f}"))
    t = stats["total"]
    rows.append(("ALL", str(t["utterances"]), str(t["words"]), str(t["variations"]),
                 f"{t['variations_per_word']:.2f}"))
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows) + "\n"
