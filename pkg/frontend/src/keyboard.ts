// Pointer-free workflow: everything an annotator does per utterance is a
// single keystroke away.

export type Action =
  | "next"
  | "prev"
  | "next_segment"
  | "prev_segment"
  | "mark_reviewed"
  | "focus_add"
  | "retry_dirty"
  | "dismiss";

export type KeyLike = {
  key: string;
  ctrlKey?: boolean;
  metaKey?: boolean;
  altKey?: boolean;
  targetTag?: string;
};

const BINDINGS: Record<string, Action> = {
  j: "next",
  ArrowDown: "next",
  k: "prev",
  ArrowUp: "prev",
  n: "next_segment",
  p: "prev_segment",
  r: "mark_reviewed",
  a: "focus_add",
  u: "retry_dirty",
  Escape: "dismiss",
};

/** Map a key event to an action; typing in a field suppresses everything but Escape. */
export function actionForKey(e: KeyLike): Action | null {
  if (e.ctrlKey || e.metaKey || e.altKey) return null;
  const tag = (e.targetTag ?? "").toLowerCase();
  if ((tag === "input" || tag === "textarea" || tag === "select") && e.key !== "Escape") {
    return null;
  }
  return BINDINGS[e.key] ?? null;
}
