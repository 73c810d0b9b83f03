import { ApiClient, ApiError, NetworkError } from "./api";
import type { Edit, Filters, Summary, UtteranceDetail } from "./types";

export type PendingEdit = {
  utteranceId: string;
  edit: Edit;
};

export type UIState = {
  items: Summary[];
  total: number;
  page: number;
  pageSize: number;
  filters: Filters;
  current: UtteranceDetail | null;
  /** last server-acknowledged copy of `current`; rollback target */
  committed: UtteranceDetail | null;
  segmentCursor: number;
  dirty: PendingEdit[];
  progress: { reviewed: number; total: number };
  reviewer: string;
  error: string | null;
  notice: string | null;
  loading: boolean;
};

function initialState(): UIState {
  return {
    items: [],
    total: 0,
    page: 1,
    pageSize: 50,
    filters: {},
    current: null,
    committed: null,
    segmentCursor: 0,
    dirty: [],
    progress: { reviewed: 0, total: 0 },
    reviewer: "",
    error: null,
    notice: null,
    loading: false,
  };
}

function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

/**
 * Apply an edit to a detail record the way the server would, for optimistic
 * display only — the server response always replaces this.
 */
export function applyEditLocally(detail: UtteranceDetail, edit: Edit): UtteranceDetail {
  const next = clone(detail);
  const seg = next.segments[edit.segment];
  if (!seg) return next;
  if (edit.op === "add_variant") {
    seg.variants.push(edit.variant);
  } else if (edit.op === "remove_variant") {
    if (edit.variant_index > 0 && edit.variant_index < seg.variants.length) {
      seg.variants.splice(edit.variant_index, 1);
    }
  } else if (edit.op === "adjust_span") {
    seg.start = edit.start;
    seg.end = edit.end;
  }
  return next;
}

export type Listener = (state: UIState) => void;

/**
 * Single store driving the review UI.
 *
 * Mutations are optimistic: the edit is shown immediately, then reconciled
 * with the server response. A rejection rolls back to the last committed
 * state and surfaces the violated rule; a network failure keeps the edit
 * in the dirty buffer for retry. Navigation refuses to move while the
 * dirty buffer is non-empty unless the caller discards it explicitly.
 */
export class ReviewUIStore {
  state: UIState = initialState();
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  private patch(partial: Partial<UIState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  get hasDirtyEdits(): boolean {
    return this.state.dirty.length > 0;
  }

  async loadList(filters: Filters = this.state.filters, page = 1): Promise<void> {
    this.patch({ loading: true, error: null });
    try {
      const pageData = await this.api.listUtterances(filters, page, this.state.pageSize);
      this.patch({
        items: pageData.items,
        total: pageData.total,
        page: pageData.page,
        filters,
        loading: false,
      });
    } catch (err) {
      this.patch({ loading: false, error: describeError(err) });
    }
  }

  async refreshStats(): Promise<void> {
    try {
      const stats = await this.api.stats();
      this.patch({ progress: { reviewed: stats.reviewed, total: stats.total } });
    } catch (err) {
      this.patch({ error: describeError(err) });
    }
  }

  async open(id: string): Promise<void> {
    this.patch({ loading: true, error: null });
    try {
      const detail = await this.api.getUtterance(id);
      this.patch({
        current: detail,
        committed: clone(detail),
        segmentCursor: 0,
        dirty: [],
        loading: false,
      });
    } catch (err) {
      this.patch({ loading: false, error: describeError(err) });
    }
  }

  /** Reload the current record from the server, dropping local state. */
  async discardDirty(): Promise<void> {
    const id = this.state.current?.id;
    this.patch({ dirty: [], notice: null });
    if (id) await this.open(id);
  }

  /**
   * Optimistically apply and submit one edit.
   * Returns true when the server accepted it.
   */
  async submitEdit(edit: Edit): Promise<boolean> {
    const current = this.state.current;
    if (!current) return false;
    const optimistic = applyEditLocally(current, edit);
    this.patch({ current: optimistic, error: null });
    try {
      const confirmed = await this.api.submitEdit(current.id, edit);
      this.patch({ current: confirmed, committed: clone(confirmed), notice: null });
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        // rejection: restore the last committed state and name the rule
        this.patch({
          current: clone(this.state.committed!),
          error: `${err.rule}: ${err.message}`,
        });
        return false;
      }
      if (err instanceof NetworkError) {
        // offline: keep the optimistic view, queue for retry
        this.patch({
          dirty: [...this.state.dirty, { utteranceId: current.id, edit }],
          notice: "offline: edit queued, retry when connected",
        });
        return false;
      }
      throw err;
    }
  }

  /** Retry everything in the dirty buffer, in order. */
  async flushDirty(): Promise<void> {
    const queue = [...this.state.dirty];
    if (!queue.length) return;
    this.patch({ dirty: [], notice: null });
    for (const pending of queue) {
      try {
        const confirmed = await this.api.submitEdit(pending.utteranceId, pending.edit);
        if (this.state.current?.id === pending.utteranceId) {
          this.patch({ current: confirmed, committed: clone(confirmed) });
        }
      } catch (err) {
        if (err instanceof NetworkError) {
          this.patch({
            dirty: [...this.state.dirty, pending],
            notice: "still offline: edit kept in queue",
          });
        } else if (err instanceof ApiError) {
          // stale queued edit the server now rejects: drop it, restore truth
          this.patch({ error: `${err.rule}: ${err.message}` });
          if (this.state.current?.id === pending.utteranceId) {
            await this.open(pending.utteranceId);
          }
        } else {
          throw err;
        }
      }
    }
  }

  async markReviewed(): Promise<boolean> {
    const current = this.state.current;
    if (!current) return false;
    if (this.hasDirtyEdits) {
      this.patch({ error: "dirty-buffer: flush or discard queued edits before reviewing" });
      return false;
    }
    try {
      const confirmed = await this.api.markReviewed(current.id, this.state.reviewer);
      this.patch({ current: confirmed, committed: clone(confirmed), error: null });
      await this.refreshStats();
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.patch({ error: `${err.rule}: ${err.message}` });
        return false;
      }
      if (err instanceof NetworkError) {
        this.patch({ notice: "offline: review not recorded" });
        return false;
      }
      throw err;
    }
  }

  /** id of the neighbouring list entry, or null at the edges. */
  neighbour(offset: 1 | -1): string | null {
    const { items, current } = this.state;
    if (!items.length) return null;
    if (!current) return items[0]?.id ?? null;
    const idx = items.findIndex((s) => s.id === current.id);
    if (idx === -1) return items[0]?.id ?? null;
    return items[idx + offset]?.id ?? null;
  }

  /** First list entry after the current one still pending review. */
  nextPendingId(): string | null {
    const { items, current } = this.state;
    const start = current ? items.findIndex((s) => s.id === current.id) + 1 : 0;
    for (const s of [...items.slice(start), ...items.slice(0, start)]) {
      if (s.review_status !== "reviewed" && s.id !== current?.id) return s.id;
    }
    return null;
  }

  /**
   * Navigate to another record. Refuses while the dirty buffer holds
   * unacknowledged edits unless `discard` is set (the UI asks first).
   */
  async navigate(id: string | null, opts: { discard?: boolean } = {}): Promise<boolean> {
    if (!id) return false;
    if (this.hasDirtyEdits && !opts.discard) {
      this.patch({ notice: "unsaved edits: retry or discard before navigating" });
      return false;
    }
    if (this.hasDirtyEdits) {
      this.patch({ dirty: [] });
    }
    await this.open(id);
    return true;
  }

  moveSegmentCursor(offset: 1 | -1): void {
    const count = this.state.current?.segments.length ?? 0;
    if (!count) return;
    const next = (this.state.segmentCursor + offset + count) % count;
    this.patch({ segmentCursor: next });
  }

  setReviewer(name: string): void {
    this.patch({ reviewer: name });
  }

  clearError(): void {
    this.patch({ error: null, notice: null });
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.rule}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}
