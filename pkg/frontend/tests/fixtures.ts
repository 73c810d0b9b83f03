// Response shapes copied from the review server contract (the Python test
// suite pins these end-to-end; keep in sync with src/oiwer/review.py).

import type { Edit, Page, Stats, Summary, UtteranceDetail } from "../src/types";

export function detailFixture(overrides: Partial<UtteranceDetail> = {}): UtteranceDetail {
  return {
    id: "u1",
    language: "en",
    text: "the blue coloured catalogue",
    raw: "",
    segments: [{ start: 2, end: 3, variants: ["coloured", "colored"] }],
    diagnostics: [],
    status: "parsed",
    review: { status: "pending", reviewer: "", updated_at: null, seconds: 0 },
    edit_log: [],
    ...overrides,
  };
}

export function summaryFixture(overrides: Partial<Summary> = {}): Summary {
  return {
    id: "u1",
    language: "en",
    text: "the blue coloured catalogue",
    status: "parsed",
    review_status: "pending",
    segment_count: 1,
    pending_diagnostics: 0,
    ...overrides,
  };
}

export function pageFixture(items: Summary[]): Page {
  return { items, total: items.length, page: 1, page_size: 50 };
}

export function statsFixture(overrides: Partial<Stats> = {}): Stats {
  return {
    total: 3,
    reviewed: 1,
    by_status: { parsed: 2, accepted: 1 },
    by_language: { en: { total: 3, reviewed: 1 } },
    mean_review_seconds: 42,
    ...overrides,
  };
}

export type MockRoute = (init: { method: string; body: unknown; url: string }) =>
  | { status: number; json: unknown }
  | "network-error";

/** fetch stub: routes by "METHOD pathname" with exact-prefix fallbacks. */
export function mockFetch(routes: Record<string, MockRoute>): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "").split("?")[0] ?? url;
    const method = (init?.method ?? "GET").toUpperCase();
    const key = `${method} ${path}`;
    const route = routes[key];
    if (!route) {
      throw new Error(`no mock route for ${key}`);
    }
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    const result = route({ method, body, url });
    if (result === "network-error") {
      throw new TypeError("fetch failed");
    }
    return {
      ok: result.status >= 200 && result.status < 300,
      status: result.status,
      json: async () => result.json,
    } as Response;
  }) as typeof fetch;
}

/** Server-faithful add/remove behavior used by the mock edit endpoint. */
export function serverApplyEdit(
  detail: UtteranceDetail,
  edit: Edit,
): { status: number; json: unknown } {
  const next: UtteranceDetail = JSON.parse(JSON.stringify(detail));
  const seg = next.segments[edit.segment];
  if (!seg) {
    return { status: 409, json: { error: "unknown-segment", message: `segment ${edit.segment} does not exist` } };
  }
  if (edit.op === "add_variant") {
    if (seg.variants.includes(edit.variant)) {
      return { status: 409, json: { error: "variants-distinct", message: `variant already present` } };
    }
    seg.variants.push(edit.variant);
  } else if (edit.op === "remove_variant") {
    if (edit.variant_index === 0) {
      return {
        status: 409,
        json: {
          error: "canonical-variant-protected",
          message: "variants[0] is the original transcript form and cannot be removed",
        },
      };
    }
    if (edit.variant_index < 0 || edit.variant_index >= seg.variants.length) {
      return { status: 409, json: { error: "unknown-variant", message: "no such variant" } };
    }
    seg.variants.splice(edit.variant_index, 1);
  } else {
    seg.start = edit.start;
    seg.end = edit.end;
  }
  next.edit_log = [...next.edit_log, { op: edit.op }];
  return { status: 200, json: next };
}
