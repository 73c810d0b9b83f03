// Payload shapes mirror the review server API exactly; the server is the
// source of truth and every mutation round-trips through its validation.

export type Segment = {
  start: number;
  end: number;
  variants: string[];
};

export type Finding = {
  severity: "fatal" | "repairable" | string;
  code: string;
  message: string;
  offset?: number;
};

export type ReviewMeta = {
  status: "pending" | "reviewed";
  reviewer: string;
  updated_at: number | null;
  seconds: number;
};

export type UtteranceDetail = {
  id: string;
  language: string;
  text: string;
  raw: string;
  segments: Segment[];
  diagnostics: Finding[];
  status: "unparsed" | "parsed" | "needs_review" | "accepted" | "rejected" | string;
  review: ReviewMeta;
  edit_log: unknown[];
};

export type Summary = {
  id: string;
  language: string;
  text: string;
  status: string;
  review_status: string;
  segment_count: number;
  pending_diagnostics: number;
};

export type Page = {
  items: Summary[];
  total: number;
  page: number;
  page_size: number;
};

export type Stats = {
  total: number;
  reviewed: number;
  by_status: Record<string, number>;
  by_language: Record<string, { total: number; reviewed: number }>;
  mean_review_seconds: number | null;
};

export type Edit =
  | { op: "add_variant"; segment: number; variant: string }
  | { op: "remove_variant"; segment: number; variant_index: number }
  | { op: "adjust_span"; segment: number; start: number; end: number };

export type Filters = {
  status?: string;
  language?: string;
  q?: string;
};
