import { ApiClient } from "./api";
import { actionForKey } from "./keyboard";
import { renderApp } from "./render";
import { ReviewUIStore } from "./state";

const api = new ApiClient("");
const store = new ReviewUIStore(api);
const root = document.getElementById("app") as HTMLElement;

store.subscribe((state) => {
  root.innerHTML = renderApp(state);
  const active = root.querySelector(".list-item.active");
  if (active) active.scrollIntoView({ block: "nearest" });
});

async function go(offset: 1 | -1): Promise<void> {
  const id = store.neighbour(offset);
  if (!id) return;
  if (store.hasDirtyEdits) {
    const discard = window.confirm("You have unsent edits. Discard them and navigate?");
    if (!discard) return;
    await store.navigate(id, { discard: true });
    return;
  }
  await store.navigate(id);
}

async function markReviewedAndAdvance(): Promise<void> {
  const ok = await store.markReviewed();
  if (ok) {
    await store.loadList(store.state.filters, store.state.page);
    const next = store.nextPendingId();
    if (next) await store.navigate(next);
  }
}

root.addEventListener("click", (ev) => {
  const el = (ev.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (!el) return;
  const action = el.dataset.action;
  if (action === "open") {
    ev.preventDefault();
    void store.navigate(el.dataset.id ?? null, { discard: false }).then((moved) => {
      if (!moved && store.hasDirtyEdits) {
        if (window.confirm("You have unsent edits. Discard them and navigate?")) {
          void store.navigate(el.dataset.id ?? null, { discard: true });
        }
      }
    });
  } else if (action === "remove-variant") {
    ev.preventDefault();
    void store.submitEdit({
      op: "remove_variant",
      segment: Number(el.dataset.segment),
      variant_index: Number(el.dataset.variantIndex),
    });
  } else if (action === "mark-reviewed") {
    ev.preventDefault();
    void markReviewedAndAdvance();
  } else if (action === "retry-dirty") {
    ev.preventDefault();
    void store.flushDirty();
  } else if (action === "discard-dirty") {
    ev.preventDefault();
    void store.discardDirty();
  } else if (action === "dismiss") {
    ev.preventDefault();
    store.clearError();
  }
});

root.addEventListener("submit", (ev) => {
  const form = ev.target as HTMLFormElement;
  const action = form.dataset.action;
  if (action === "add-variant") {
    ev.preventDefault();
    const input = form.elements.namedItem("variant") as HTMLInputElement;
    const variant = input.value.trim();
    if (!variant) return;
    void store
      .submitEdit({ op: "add_variant", segment: Number(form.dataset.segment), variant })
      .then((ok) => {
        if (ok) input.value = "";
      });
  } else if (action === "filter") {
    ev.preventDefault();
    const data = new FormData(form);
    void store.loadList(
      {
        q: String(data.get("q") ?? "") || undefined,
        status: String(data.get("status") ?? "") || undefined,
        language: String(data.get("language") ?? "") || undefined,
      },
      1,
    );
  }
});

document.addEventListener("keydown", (ev) => {
  const action = actionForKey({
    key: ev.key,
    ctrlKey: ev.ctrlKey,
    metaKey: ev.metaKey,
    altKey: ev.altKey,
    targetTag: (ev.target as HTMLElement | null)?.tagName,
  });
  if (!action) return;
  ev.preventDefault();
  if (action === "next") void go(1);
  else if (action === "prev") void go(-1);
  else if (action === "next_segment") store.moveSegmentCursor(1);
  else if (action === "prev_segment") store.moveSegmentCursor(-1);
  else if (action === "mark_reviewed") void markReviewedAndAdvance();
  else if (action === "retry_dirty") void store.flushDirty();
  else if (action === "dismiss") store.clearError();
  else if (action === "focus_add") {
    const input = root.querySelector<HTMLInputElement>(".segment-card.active .add-variant input");
    input?.focus();
  }
});

window.addEventListener("beforeunload", (ev) => {
  if (store.hasDirtyEdits) {
    ev.preventDefault();
  }
});

async function boot(): Promise<void> {
  const reviewer = window.localStorage.getItem("oiwer.reviewer") ?? "";
  if (reviewer) {
    store.setReviewer(reviewer);
  } else {
    const name = window.prompt("Reviewer name (recorded on reviewed records):") ?? "";
    store.setReviewer(name);
    window.localStorage.setItem("oiwer.reviewer", name);
  }
  await store.loadList();
  await store.refreshStats();
  const first = store.state.items[0];
  if (first) await store.navigate(first.id);
}

void boot();
