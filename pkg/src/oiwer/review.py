"""Local HTTP service for human post-editing of candidate annotations.

One dataset file per server instance, held in memory and rewritten
atomically on every mutation; an append-only journal records each edit.
Annotators add or remove variants, adjust spans, and mark records
reviewed; the export endpoint emits a clean reference manifest.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .errors import InputError, OiwerError, ParseError
from .genvar import CandidateAnnotation
from .refmodel import (
    iter_violations,
    reference_from_record,
    reference_to_record,
)
from .textnorm import DEFAULT_CONFIG, NormConfig, tokenize

MANIFEST_HEADER_KEY = "manifest_version"


class EditRejected(OiwerError):
    """An edit or review request violated a rule; carries the rule name."""

    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(message)


class NotFound(OiwerError):
    pass


@dataclass
class ReviewRecord:
    candidate: CandidateAnnotation
    reviewer: str = ""
    updated_at: float | None = None
    review_status: str = "pending"  # pending | reviewed
    edit_log: list[dict] = field(default_factory=list)
    review_seconds: float = 0.0

    def to_record(self) -> dict:
        rec = self.candidate.to_record()
        rec["review"] = {
            "status": self.review_status,
            "reviewer": self.reviewer,
            "updated_at": self.updated_at,
            "seconds": self.review_seconds,
        }
        rec["edit_log"] = self.edit_log
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ReviewRecord":
        review = rec.get("review", {})
        return cls(
            candidate=CandidateAnnotation.from_record(rec),
            reviewer=review.get("reviewer", ""),
            updated_at=review.get("updated_at"),
            review_status=review.get("status", "pending"),
            edit_log=list(rec.get("edit_log", [])),
            review_seconds=review.get("seconds", 0.0),
        )

    def summary(self) -> dict:
        return {
            "id": self.candidate.utterance_id,
            "language": self.candidate.language,
            "text": self.candidate.text,
            "status": self.candidate.status,
            "review_status": self.review_status,
            "segment_count": len(self.candidate.segments),
            "pending_diagnostics": len(self.candidate.diagnostics),
        }

    def detail(self) -> dict:
        return self.to_record()


def _candidate_from_manifest_record(rec: dict, cfg: NormConfig) -> CandidateAnnotation:
    ref = reference_from_record(rec, cfg)
    return CandidateAnnotation(
        utterance_id=ref.utterance.id,
        language=ref.utterance.language,
        text=ref.utterance.text,
        raw="",
        segments=ref.segments,
        diagnostics=(),
        status="parsed",
    )


class ReviewStore:
    """In-memory dataset with atomic whole-file persistence.

    All mutations funnel through one lock, so concurrent edit submissions
    serialize into a total order that the edit log records.
    """

    def __init__(self, path: str | Path, cfg: NormConfig = DEFAULT_CONFIG):
        self.path = Path(path)
        self.cfg = cfg
        self.journal_path = self.path.with_name(self.path.name + ".edits")
        self._lock = threading.Lock()
        self.records: dict[str, ReviewRecord] = {}
        self.header_line: str | None = None
        self._first_view: dict[str, float] = {}
        self.load()

    # -- persistence ---------------------------------------------------------

    def load(self) -> None:
        self.records = {}
        self.header_line = None
        if not self.path.exists():
            raise InputError(f"dataset file not found: {self.path}")
        with self.path.open(encoding="utf-8") as fh:
            for n, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON in dataset: {exc.msg}", line=n) from exc
                if not isinstance(rec, dict):
                    raise ParseError("dataset line must be a JSON object", line=n)
                if MANIFEST_HEADER_KEY in rec and "id" not in rec:
                    self.header_line = line
                    continue
                if "review" in rec or "raw" in rec or "status" in rec:
                    record = ReviewRecord.from_record(rec)
                else:
                    record = ReviewRecord(candidate=_candidate_from_manifest_record(rec, self.cfg))
                rid = record.candidate.utterance_id
                if rid in self.records:
                    raise ParseError(f"duplicate id {rid!r} in dataset", line=n)
                self.records[rid] = record

    def save(self) -> None:
        """Atomic whole-file replacement; the dataset is never half-written."""
        tmp = self.path.with_name(self.path.name + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            if self.header_line is not None:
                fh.write(self.header_line + "\n")
            for rid in sorted(self.records):
                fh.write(json.dumps(self.records[rid].to_record(), ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def _journal(self, entry: dict) -> None:
        with self.journal_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    # -- queries --------------------------------------------------------------

    def list_utterances(
        self,
        status: str | None = None,
        language: str | None = None,
        q: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ) -> tuple[list[dict], int]:
        items = []
        for rid in sorted(self.records):
            rec = self.records[rid]
            if language and rec.candidate.language != language:
                continue
            if status and status not in (rec.candidate.status, rec.review_status):
                continue
            if q and q not in rec.candidate.text and q not in rid:
                continue
            items.append(rec.summary())
        total = len(items)
        lo = (max(page, 1) - 1) * page_size
        return items[lo:lo + page_size], total

    def get(self, rid: str) -> ReviewRecord:
        rec = self.records.get(rid)
        if rec is None:
            raise NotFound(f"no utterance with id {rid!r}")
        self._first_view.setdefault(rid, time.monotonic())
        return rec

    # -- mutations -------------------------------------------------------------

    def _validate_candidate(self, cand: CandidateAnnotation) -> None:
        ref = cand.to_reference(self.cfg)
        for err in iter_violations(ref, self.cfg):
            raise EditRejected(err.rule or "invalid", str(err))

    def apply_edit(self, rid: str, edit: dict) -> ReviewRecord:
        with self._lock:
            rec = self.records.get(rid)
            if rec is None:
                raise NotFound(f"no utterance with id {rid!r}")
            cand = rec.candidate
            op = edit.get("op")
            seg_idx = edit.get("segment")
            if not isinstance(seg_idx, int) or not (0 <= seg_idx < len(cand.segments)):
                raise EditRejected("unknown-segment", f"segment {seg_idx!r} does not exist")
            seg = cand.segments[seg_idx]

            if op == "add_variant":
                variant = edit.get("variant", "")
                toks = tokenize(variant, self.cfg)
                if not toks:
                    raise EditRejected("variant-non-empty", "variant normalizes to zero tokens")
                if any(tokenize(v, self.cfg) == toks for v in seg.variants):
                    raise EditRejected("variants-distinct", f"variant {variant!r} already present")
                new_seg = type(seg)(seg.start, seg.end, seg.variants + (variant,))
            elif op == "remove_variant":
                idx = edit.get("variant_index")
                if not isinstance(idx, int) or not (0 <= idx < len(seg.variants)):
                    raise EditRejected("unknown-variant", f"variant index {idx!r} does not exist")
                if idx == 0:
                    raise EditRejected(
                        "canonical-variant-protected",
                        "variants[0] is the original transcript form and cannot be removed",
                    )
                new_seg = type(seg)(seg.start, seg.end, seg.variants[:idx] + seg.variants[idx + 1:])
            elif op == "adjust_span":
                start, end = edit.get("start"), edit.get("end")
                if not isinstance(start, int) or not isinstance(end, int):
                    raise EditRejected("span-in-bounds", "start and end must be integers")
                utt_tokens = cand.to_reference(self.cfg).utterance.tokens
                if not (0 <= start < end <= len(utt_tokens)):
                    raise EditRejected("span-in-bounds", f"span [{start},{end}) out of bounds")
                canonical = " ".join(utt_tokens[start:end])
                rest = [v for v in seg.variants[1:] if tokenize(v, self.cfg) != tuple(canonical.split())]
                new_seg = type(seg)(start, end, (canonical, *rest))
            else:
                raise EditRejected("unknown-operation", f"unsupported edit op {op!r}")

            segments = list(cand.segments)
            segments[seg_idx] = new_seg
            segments.sort(key=lambda s: (s.start, s.end))
            new_cand = CandidateAnnotation(
                utterance_id=cand.utterance_id,
                language=cand.language,
                text=cand.text,
                raw=cand.raw,
                segments=tuple(segments),
                diagnostics=cand.diagnostics,
                status=cand.status,
            )
            self._validate_candidate(new_cand)

            entry = {"op": op, "segment": seg_idx, "payload": edit, "ts": time.time()}
            rec.candidate = new_cand
            rec.edit_log.append(entry)
            rec.updated_at = time.time()
            self.save()
            self._journal({"id": rid, **entry})
            return rec

    def mark_reviewed(self, rid: str, reviewer: str) -> ReviewRecord:
        with self._lock:
            rec = self.records.get(rid)
            if rec is None:
                raise NotFound(f"no utterance with id {rid!r}")
            fatals = rec.candidate.fatal_diagnostics
            if fatals:
                raise EditRejected(
                    "fatal-diagnostics",
                    "cannot review a record with fatal diagnostics: "
                    + "; ".join(f.code for f in fatals),
                )
            self._validate_candidate(rec.candidate)
            started = self._first_view.pop(rid, None)
            if started is not None:
                rec.review_seconds += time.monotonic() - started
            rec.candidate = CandidateAnnotation(
                utterance_id=rec.candidate.utterance_id,
                language=rec.candidate.language,
                text=rec.candidate.text,
                raw=rec.candidate.raw,
                segments=rec.candidate.segments,
                diagnostics=rec.candidate.diagnostics,
                status="accepted",
            )
            rec.review_status = "reviewed"
            rec.reviewer = reviewer
            rec.updated_at = time.time()
            self.save()
            self._journal({"id": rid, "op": "mark_reviewed", "reviewer": reviewer, "ts": rec.updated_at})
            return rec

    # -- export and stats --------------------------------------------------------

    def export_manifest(self, reviewed_only: bool = False) -> str:
        lines = []
        if self.header_line is not None:
            lines.append(self.header_line)
        for rid in sorted(self.records):
            rec = self.records[rid]
            if reviewed_only and rec.review_status != "reviewed":
                continue
            if rec.candidate.status == "unparsed":
                continue
            ref = rec.candidate.to_reference(self.cfg)
            lines.append(json.dumps(reference_to_record(ref), ensure_ascii=False))
        return "\n".join(lines) + "\n" if lines else ""

    def stats(self) -> dict:
        by_status: dict[str, int] = {}
        by_language: dict[str, dict[str, int]] = {}
        reviewed = 0
        review_time = 0.0
        timed = 0
        for rec in self.records.values():
            by_status[rec.candidate.status] = by_status.get(rec.candidate.status, 0) + 1
            lang = by_language.setdefault(rec.candidate.language, {"total": 0, "reviewed": 0})
            lang["total"] += 1
            if rec.review_status == "reviewed":
                reviewed += 1
                lang["reviewed"] += 1
                if rec.review_seconds > 0:
                    review_time += rec.review_seconds
                    timed += 1
        return {
            "total": len(self.records),
            "reviewed": reviewed,
            "by_status": dict(sorted(by_status.items())),
            "by_language": dict(sorted(by_language.items())),
            "mean_review_seconds": (review_time / timed) if timed else None,
        }


# --- HTTP layer -----------------------------------------------------------------


class EditRequest(BaseModel):
    op: str
    segment: int
    variant: str | None = None
    variant_index: int | None = None
    start: int | None = None
    end: int | None = None


class ReviewRequest(BaseModel):
    reviewer: str = ""


_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>oiwer review</title></head>
<body><h1>oiwer review server</h1>
<p>The review UI bundle was not found. Build the frontend and pass its
directory with <code>--ui-dir</code>, or use the HTTP API directly
(<code>/api/utterances</code>, <code>/api/export</code>, ...).</p>
</body></html>
"""


def create_app(store: ReviewStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="oiwer review", docs_url=None, redoc_url=None)

    @app.exception_handler(EditRejected)
    async def _rejected(_, exc: EditRejected):
        return JSONResponse(status_code=409, content={"error": exc.rule, "message": str(exc)})

    @app.exception_handler(NotFound)
    async def _missing(_, exc: NotFound):
        return JSONResponse(status_code=404, content={"error": "not-found", "message": str(exc)})

    @app.get("/api/utterances")
    def list_utterances(
        status: str | None = None,
        language: str | None = None,
        q: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ):
        items, total = store.list_utterances(status, language, q, page, page_size)
        return {"items": items, "total": total, "page": page, "page_size": page_size}

    @app.get("/api/utterances/{rid}")
    def get_utterance(rid: str):
        return store.get(rid).detail()

    @app.post("/api/utterances/{rid}/edits")
    def post_edit(rid: str, edit: EditRequest):
        rec = store.apply_edit(rid, edit.model_dump(exclude_none=True))
        return rec.detail()

    @app.post("/api/utterances/{rid}/review")
    def post_review(rid: str, body: ReviewRequest):
        rec = store.mark_reviewed(rid, body.reviewer)
        return rec.detail()

    @app.get("/api/export")
    def export(reviewed_only: bool = False):
        return PlainTextResponse(store.export_manifest(reviewed_only), media_type="application/x-ndjson")

    @app.get("/api/stats")
    def stats():
        return store.stats()

    ui_path = Path(ui_dir) if ui_dir else None
    if ui_path and ui_path.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_path, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
