import type { Edit, Filters, Page, Stats, UtteranceDetail } from "./types";

/** Server-side rejection: carries the rule name the server reported. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly rule: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Network-level failure (offline, server down): retryable. */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

type FetchLike = typeof fetch;

async function parseRejection(resp: Response): Promise<ApiError> {
  let rule = "unknown";
  let message = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: string; message?: string };
    if (body.error) rule = body.error;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep defaults
  }
  return new ApiError(resp.status, rule, message);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new NetworkError(err instanceof Error ? err.message : String(err));
    }
    if (!resp.ok) {
      throw await parseRejection(resp);
    }
    return (await resp.json()) as T;
  }

  listUtterances(filters: Filters = {}, page = 1, pageSize = 50): Promise<Page> {
    const params = new URLSearchParams();
    if (filters.status) params.set("status", filters.status);
    if (filters.language) params.set("language", filters.language);
    if (filters.q) params.set("q", filters.q);
    params.set("page", String(page));
    params.set("page_size", String(pageSize));
    return this.request<Page>(`/api/utterances?${params.toString()}`);
  }

  getUtterance(id: string): Promise<UtteranceDetail> {
    return this.request<UtteranceDetail>(`/api/utterances/${encodeURIComponent(id)}`);
  }

  submitEdit(id: string, edit: Edit): Promise<UtteranceDetail> {
    return this.request<UtteranceDetail>(`/api/utterances/${encodeURIComponent(id)}/edits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(edit),
    });
  }

  markReviewed(id: string, reviewer: string): Promise<UtteranceDetail> {
    return this.request<UtteranceDetail>(`/api/utterances/${encodeURIComponent(id)}/review`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ reviewer }),
    });
  }

  stats(): Promise<Stats> {
    return this.request<Stats>("/api/stats");
  }
}
