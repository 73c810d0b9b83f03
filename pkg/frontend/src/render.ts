// Pure HTML renderers: state in, markup out. main.ts owns mounting and
// event delegation, so everything here is unit-testable without a DOM.

import type { UIState } from "./state";
import type { Finding, Segment, Summary, UtteranceDetail } from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function tokensOf(text: string): string[] {
  return text.split(/\s+/).filter(Boolean);
}

function statusBadge(detail: UtteranceDetail): string {
  const cls: Record<string, string> = {
    needs_review: "badge warn",
    unparsed: "badge fatal",
    accepted: "badge ok",
    parsed: "badge",
  };
  const klass = cls[detail.status] ?? "badge";
  return `<span class="${klass}" data-status="${escapeHtml(detail.status)}">${escapeHtml(detail.status)}</span>`;
}

/**
 * The transcript with each explicit segment highlighted in place.
 * Tokens not covered by a segment render as plain text.
 */
export function renderTranscript(detail: UtteranceDetail, cursor: number): string {
  const tokens = tokensOf(detail.text);
  const bySpanStart = new Map<number, { seg: Segment; index: number }>();
  detail.segments.forEach((seg, index) => bySpanStart.set(seg.start, { seg, index }));
  const parts: string[] = [];
  let t = 0;
  while (t < tokens.length) {
    const hit = bySpanStart.get(t);
    if (hit) {
      const text = tokens.slice(hit.seg.start, hit.seg.end).join(" ");
      const active = hit.index === cursor ? " active" : "";
      parts.push(
        `<mark class="segment${active}" data-segment="${hit.index}">${escapeHtml(text)}</mark>`,
      );
      t = hit.seg.end;
    } else {
      parts.push(escapeHtml(tokens[t] ?? ""));
      t += 1;
    }
  }
  return `<p class="transcript">${parts.join(" ")}</p>`;
}

function renderVariantChips(seg: Segment, segIndex: number): string {
  const chips = seg.variants
    .map((v, vi) => {
      const dismiss =
        vi === 0
          ? `<span class="lock" title="original form; cannot be removed">&#9679;</span>`
          : `<button class="dismiss" data-action="remove-variant" data-segment="${segIndex}" data-variant-index="${vi}" title="remove variant">&times;</button>`;
      const canonical = vi === 0 ? " canonical" : "";
      return `<span class="chip${canonical}">${escapeHtml(v)}${dismiss}</span>`;
    })
    .join("");
  const addForm = `
    <form class="add-variant" data-action="add-variant" data-segment="${segIndex}">
      <input type="text" name="variant" placeholder="add variant" autocomplete="off">
      <button type="submit">add</button>
    </form>`;
  return `<div class="variants" data-segment="${segIndex}">${chips}${addForm}</div>`;
}

export function renderSegments(detail: UtteranceDetail, cursor: number): string {
  if (!detail.segments.length) {
    return `<p class="empty-note">no variants on this utterance</p>`;
  }
  return detail.segments
    .map((seg, i) => {
      const active = i === cursor ? " active" : "";
      return `
      <section class="segment-card${active}" data-segment="${i}">
        <header>tokens ${seg.start}&ndash;${seg.end - 1}</header>
        ${renderVariantChips(seg, i)}
      </section>`;
    })
    .join("");
}

export function renderDiagnostics(diagnostics: Finding[]): string {
  if (!diagnostics.length) return "";
  const rows = diagnostics
    .map(
      (f) =>
        `<li class="diag ${escapeHtml(f.severity)}"><code>${escapeHtml(f.code)}</code> ${escapeHtml(f.message)}</li>`,
    )
    .join("");
  return `<ul class="diagnostics">${rows}</ul>`;
}

export function renderUtterance(detail: UtteranceDetail, cursor: number): string {
  const reviewed =
    detail.review.status === "reviewed"
      ? `<span class="badge ok">reviewed by ${escapeHtml(detail.review.reviewer || "?")}</span>`
      : "";
  return `
  <article class="utterance" data-id="${escapeHtml(detail.id)}">
    <header>
      <h2>${escapeHtml(detail.id)}</h2>
      <span class="lang">${escapeHtml(detail.language)}</span>
      ${statusBadge(detail)}
      ${reviewed}
    </header>
    ${renderTranscript(detail, cursor)}
    ${renderDiagnostics(detail.diagnostics)}
    ${renderSegments(detail, cursor)}
    <footer>
      <button data-action="mark-reviewed">mark reviewed (r)</button>
    </footer>
  </article>`;
}

export function renderListItem(item: Summary, activeId: string | null): string {
  const active = item.id === activeId ? " active" : "";
  const reviewed = item.review_status === "reviewed" ? " reviewed" : "";
  const warn = item.pending_diagnostics > 0 ? `<span class="badge warn">!</span>` : "";
  return `
  <li class="list-item${active}${reviewed}" data-action="open" data-id="${escapeHtml(item.id)}">
    <span class="id">${escapeHtml(item.id)}</span>
    <span class="lang">${escapeHtml(item.language)}</span>
    <span class="snippet">${escapeHtml(item.text.slice(0, 60))}</span>
    <span class="segments">${item.segment_count} seg</span>
    ${warn}
  </li>`;
}

export function renderError(state: UIState): string {
  const bits: string[] = [];
  if (state.error) {
    bits.push(
      `<div class="flash error">${escapeHtml(state.error)} <button data-action="dismiss">dismiss</button></div>`,
    );
  }
  if (state.notice) {
    const retry = state.dirty.length
      ? ` <button data-action="retry-dirty">retry (u)</button> <button data-action="discard-dirty">discard</button>`
      : "";
    bits.push(`<div class="flash notice">${escapeHtml(state.notice)}${retry}</div>`);
  }
  return bits.join("");
}

export function renderProgress(state: UIState): string {
  const { reviewed, total } = state.progress;
  const dirty = state.dirty.length ? ` &middot; ${state.dirty.length} queued` : "";
  return `<span class="progress">${reviewed}/${total} reviewed${dirty}</span>`;
}

export function renderApp(state: UIState): string {
  const list = state.items.map((item) => renderListItem(item, state.current?.id ?? null)).join("");
  const detail = state.current
    ? renderUtterance(state.current, state.segmentCursor)
    : `<p class="empty-note">select an utterance</p>`;
  return `
  <div class="layout">
    <aside>
      <form class="filters" data-action="filter">
        <input name="q" placeholder="search" value="${escapeHtml(state.filters.q ?? "")}">
        <select name="status">
          <option value="">any status</option>
          ${["pending", "reviewed", "parsed", "needs_review", "unparsed", "accepted"]
            .map(
              (s) =>
                `<option value="${s}"${state.filters.status === s ? " selected" : ""}>${s}</option>`,
            )
            .join("")}
        </select>
        <input name="language" placeholder="language" value="${escapeHtml(state.filters.language ?? "")}">
        <button type="submit">filter</button>
      </form>
      <ul class="list">${list}</ul>
      ${renderProgress(state)}
    </aside>
    <main>
      ${renderError(state)}
      ${detail}
      <p class="help">j/k next/prev &middot; n/p segment &middot; a add variant &middot; r mark reviewed &middot; u retry queued</p>
    </main>
  </div>`;
}
