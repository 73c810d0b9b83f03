"""Command-line entry point: eval, validate, generate, review, stats.

Exit codes are a stable contract: 0 success, 2 input or validation error,
3 total generation failure. Every subcommand is deterministic for fixed
inputs; parallelism changes wall time only, never output bytes.
"""

from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .align import POLICY_ORIGINAL, POLICY_PATH
from .errors import ConfigError, OiwerError, ParseError, ValidationError
from .genvar import GuidelineSet, ProviderConfig, run_generation
from .metrics import (
    aggregate,
    compare_reports,
    dataset_stats_table,
    error_shift,
    r_squared,
    render_csv,
    render_table,
    report_from_dict,
    score_utterance,
    serialize_report,
)
from .refmodel import (
    dataset_stats,
    parse_hypotheses,
    parse_manifest,
    reference_from_record,
    reference_to_record,
)
from .textnorm import NormConfig

EXIT_INPUT_ERROR = 2
EXIT_ALL_FAILED = 3


def _norm_config(
    case_sensitive: bool, keep_punct: bool, unicode_form: str, norm_config_path: Path | None = None
) -> NormConfig:
    if norm_config_path is not None:
        # a config file replaces the individual flags; mixing them is a
        # conflict we refuse rather than guess a precedence
        if (case_sensitive, keep_punct, unicode_form) != (True, False, "NFC"):
            _fail("--norm-config conflicts with --ignore-case/--keep-punct/--unicode-form")
        try:
            return NormConfig.from_dict(json.loads(norm_config_path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, TypeError, OiwerError) as exc:
            _fail(f"bad norm config {norm_config_path}: {exc}")
    return NormConfig(
        unicode_form=unicode_form,
        strip_punctuation=not keep_punct,
        lowercase=not case_sensitive,
    )


def _content_digest(records: list[dict]) -> str:
    """Digest of canonicalized content: stable under line reordering."""
    h = hashlib.sha256()
    for rec in sorted(json.dumps(r, ensure_ascii=False, sort_keys=True) for r in records):
        h.update(rec.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _fail(message: str, code: int = EXIT_INPUT_ERROR) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


norm_options = [
    click.option(
        "--case-sensitive/--ignore-case",
        "case_sensitive",
        default=True,
        show_default=True,
        help="Compare tokens case-sensitively (Indic scripts are caseless; use --ignore-case for Latin code-mixing).",
    ),
    click.option("--keep-punct", is_flag=True, help="Score punctuation instead of stripping it."),
    click.option(
        "--unicode-form",
        type=click.Choice(["NFC", "NFD", "NFKC", "NFKD"]),
        default="NFC",
        show_default=True,
    ),
    click.option(
        "--norm-config",
        "norm_config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="JSON file with the full normalization config; conflicts with the individual flags.",
    ),
]


def _with_norm_options(fn):
    for opt in reversed(norm_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="oiwer")
def main() -> None:
    """Orthographically-informed ASR evaluation toolkit."""


@main.command("eval")
@click.option("--refs", "refs_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--hyps", "hyps_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--policy", type=click.Choice(["original", "path"]), default="original", show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads; never changes output bytes.")
@click.option("--allow-missing", is_flag=True, help="Skip references without a hypothesis instead of failing.")
@_with_norm_options
def cmd_eval(refs_path, hyps_path, out_dir, policy, jobs, allow_missing, case_sensitive, keep_punct, unicode_form, norm_config_path):
    """Score a hypothesis manifest against a reference manifest (WER + OIWER)."""
    cfg = _norm_config(case_sensitive, keep_punct, unicode_form, norm_config_path)
    score_policy = POLICY_ORIGINAL if policy == "original" else POLICY_PATH
    try:
        with refs_path.open(encoding="utf-8") as fh:
            refs = parse_manifest(fh, cfg)
        with hyps_path.open(encoding="utf-8") as fh:
            hyps = parse_hypotheses(fh)
    except OiwerError as exc:
        _fail(str(exc))
    if not refs:
        _fail("reference manifest contains no records")

    missing = sorted(r.utterance.id for r in refs if r.utterance.id not in hyps)
    if missing:
        if not allow_missing:
            for mid in missing:
                click.echo(f"missing hypothesis for reference id {mid!r}", err=True)
            sys.exit(EXIT_INPUT_ERROR)
        click.echo(f"warning: skipping {len(missing)} references without hypotheses", err=True)
    pairs = [(r, hyps[r.utterance.id]) for r in refs if r.utterance.id in hyps]
    if not pairs:
        _fail("no reference/hypothesis pairs to score")

    def score(pair):
        ref, hyp_text = pair
        return score_utterance(ref, hyp_text, cfg, score_policy)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(score, pairs))
    else:
        scores = [score(p) for p in pairs]

    report = aggregate(scores, cfg, score_policy)
    extra = {
        "tool": {"name": "oiwer", "version": __version__},
        "inputs": {
            "refs_digest": _content_digest([reference_to_record(r) for r, _ in pairs]),
            "hyps_digest": _content_digest([{"id": r.utterance.id, "text": h} for r, h in pairs]),
            "utterances_scored": len(pairs),
        },
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(serialize_report(report, extra), encoding="utf-8")
    (out_dir / "report.txt").write_text(render_table(report), encoding="utf-8")
    (out_dir / "report.csv").write_text(render_csv(report), encoding="utf-8")
    click.echo(
        f"scored {len(pairs)} utterances: wer={report.corpus['wer']:.4f} oiwer={report.corpus['oiwer']:.4f}"
    )


@main.command("validate")
@click.option("--refs", "refs_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_with_norm_options
def cmd_validate(refs_path, case_sensitive, keep_punct, unicode_form, norm_config_path):
    """Check every manifest record against the model invariants."""
    cfg = _norm_config(case_sensitive, keep_punct, unicode_form, norm_config_path)
    diagnostics = []
    seen: set[str] = set()
    with refs_path.open(encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                diagnostics.append({"line": n, "rule": "json", "message": exc.msg})
                continue
            if not isinstance(rec, dict):
                diagnostics.append({"line": n, "rule": "json", "message": "record must be an object"})
                continue
            if "manifest_version" in rec and "id" not in rec:
                declared = rec.get("norm")
                if declared is not None and declared != cfg.name:
                    diagnostics.append({
                        "line": n, "rule": "norm-config-mismatch",
                        "message": f"manifest norm {declared!r} differs from run norm {cfg.name!r}",
                    })
                continue
            try:
                ref = reference_from_record(rec, cfg, line=n)
            except (ParseError, ValidationError) as exc:
                diagnostics.append({
                    "line": n,
                    "id": rec.get("id"),
                    "segment": getattr(exc, "segment_index", None),
                    "rule": getattr(exc, "rule", None) or "parse",
                    "message": str(exc),
                })
                continue
            if ref.utterance.id in seen:
                diagnostics.append({
                    "line": n, "id": ref.utterance.id, "rule": "id-unique",
                    "message": f"duplicate utterance id {ref.utterance.id!r}",
                })
            seen.add(ref.utterance.id)
    for diag in diagnostics:
        click.echo(json.dumps(diag, ensure_ascii=False))
    if diagnostics:
        sys.exit(EXIT_INPUT_ERROR)
    click.echo(json.dumps({"ok": True, "records": len(seen)}))


@main.command("generate")
@click.option("--refs", "refs_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--guidelines", "guidelines_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--provider-config", "provider_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--dry-run", is_flag=True, help="Write prompts only; no network traffic.")
@_with_norm_options
def cmd_generate(refs_path, guidelines_path, out_dir, provider_path, dry_run, case_sensitive, keep_punct, unicode_form, norm_config_path):
    """Ask an LLM for candidate variation annotations, resumably."""
    cfg = _norm_config(case_sensitive, keep_punct, unicode_form, norm_config_path)
    try:
        with refs_path.open(encoding="utf-8") as fh:
            refs = parse_manifest(fh, cfg)
        guide = GuidelineSet.load(guidelines_path)
        provider = ProviderConfig.load(provider_path) if provider_path else None
    except OiwerError as exc:
        _fail(str(exc))
    if not dry_run and provider is None:
        _fail("--provider-config is required unless --dry-run is given")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        summary = run_generation(
            [r.utterance for r in refs],
            guide,
            provider,
            out_dir / "candidates.jsonl",
            out_dir / "journal.jsonl",
            cfg=cfg,
            dry_run=dry_run,
            prompt_dir=out_dir / "prompts",
        )
    except ConfigError as exc:
        _fail(str(exc))
    click.echo(
        f"requested={summary.requested} skipped={summary.skipped} "
        f"succeeded={summary.succeeded} failed={summary.failed}"
    )
    if summary.succeeded == 0 and summary.skipped == 0 and summary.requested > 0:
        sys.exit(EXIT_ALL_FAILED)


@main.command("review")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui-dir", type=click.Path(file_okay=False, path_type=Path), help="Directory with the built review UI.")
@_with_norm_options
def cmd_review(data_path, port, host, ui_dir, case_sensitive, keep_punct, unicode_form, norm_config_path):
    """Serve the human post-editing API and UI over the given dataset."""
    import uvicorn

    from .review import ReviewStore, create_app

    cfg = _norm_config(case_sensitive, keep_punct, unicode_form, norm_config_path)
    try:
        store = ReviewStore(data_path, cfg)
    except OiwerError as exc:
        _fail(str(exc))
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        ui_dir = default_ui if default_ui.is_dir() else None
    app = create_app(store, ui_dir)
    click.echo(f"serving {len(store.records)} records on http://{host}:{port}")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        _fail(f"cannot bind {host}:{port}: {exc}")


@main.command("stats")
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--report-a", "report_a", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--report-b", "report_b", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_with_norm_options
def cmd_stats(refs_path, report_a, report_b, case_sensitive, keep_punct, unicode_form, norm_config_path):
    """Dataset statistics and cross-report analysis (error shift, R^2)."""
    cfg = _norm_config(case_sensitive, keep_punct, unicode_form, norm_config_path)
    if refs_path is None and (report_a is None or report_b is None):
        _fail("provide --refs, or both --report-a and --report-b")
    out: dict = {}
    if refs_path is not None:
        try:
            with refs_path.open(encoding="utf-8") as fh:
                refs = parse_manifest(fh, cfg)
        except OiwerError as exc:
            _fail(str(exc))
        out["dataset"] = dataset_stats(refs)
        click.echo(dataset_stats_table(out["dataset"]), err=False, nl=False)
    if report_a is not None and report_b is not None:
        try:
            a = report_from_dict(json.loads(report_a.read_text(encoding="utf-8")))
            b = report_from_dict(json.loads(report_b.read_text(encoding="utf-8")))
            diff = compare_reports(a, b)
        except (OiwerError, json.JSONDecodeError, KeyError) as exc:
            _fail(str(exc))
        by_id_b = {s.id: s for s in b.scores}
        pairs = [(s.oiwer_ratio, by_id_b[s.id].oiwer_ratio) for s in a.scores]
        out["comparison"] = diff
        out["error_shift"] = {"a": error_shift(a), "b": error_shift(b)}
        try:
            out["r_squared_oiwer"] = r_squared(pairs)
        except OiwerError as exc:
            out["r_squared_oiwer"] = None
            out["r_squared_note"] = str(exc)
    click.echo(json.dumps(out, ensure_ascii=False, sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
