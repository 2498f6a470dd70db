// Browser entry point. Wires the form, card list, and knowledge panel to the
// /v1 API. All rendering goes through ui.ts; all state through state.ts.

import { ApiClient, ApiError, type KnowledgeSummary } from "./api.js";
import { canSubmit, SessionStore, type Card } from "./state.js";
import { renderCards, renderKnowledgePanel } from "./ui.js";

export function boot(doc: Document, api: ApiClient, store: SessionStore): void {
  const form = doc.getElementById("ask-form") as HTMLFormElement;
  const input = doc.getElementById("ask-input") as HTMLInputElement;
  const submitBtn = doc.getElementById("ask-submit") as HTMLButtonElement;
  const cardsEl = doc.getElementById("cards") as HTMLElement;
  const panelEl = doc.getElementById("panel") as HTMLElement;

  const openEditors = new Set<string>();
  let summary: KnowledgeSummary | null = null;
  // highest version seen anywhere; the panel is stale when it lags this
  let latestVersion = 0;

  function renderAll(): void {
    cardsEl.innerHTML = renderCards(store.list(), openEditors);
    const stale = summary !== null && summary.version < latestVersion;
    panelEl.innerHTML = renderKnowledgePanel(summary, { stale });
  }

  function flashError(cardId: string, message: string): void {
    const footer = cardsEl.querySelector(`[data-card-id="${cardId}"] footer`);
    if (!footer) {
      return;
    }
    let note = footer.querySelector("[data-role=\"feedback-error\"]");
    if (!note) {
      note = doc.createElement("p");
      note.className = "card-error";
      note.setAttribute("data-role", "feedback-error");
      footer.appendChild(note);
    }
    note.textContent = message;
  }

  async function refreshPanel(): Promise<void> {
    try {
      summary = await api.fetchSummary();
      latestVersion = Math.max(latestVersion, summary.version);
    } catch {
      // panel keeps its last snapshot; the stale badge covers the gap
    }
    renderAll();
  }

  async function run(card: Card): Promise<void> {
    try {
      const outcome = await api.submitQuery(card.nl);
      if (outcome.kind === "timeout") {
        store.markTimeout(card.id, outcome.error);
      } else {
        latestVersion = Math.max(latestVersion, outcome.response.knowledge_version);
        store.answer(card.id, outcome.response);
      }
    } catch (err) {
      store.markError(card.id, err instanceof Error ? err.message : String(err));
    }
    renderAll();
  }

  async function giveFeedback(
    card: Card,
    verdict: "accept" | "reject",
    correctedSql: string | null,
    note: string | null,
  ): Promise<void> {
    if (!card.response) {
      return;
    }
    try {
      const version = await api.sendFeedback({
        request_id: card.response.request_id,
        verdict,
        corrected_sql: correctedSql,
        note,
      });
      latestVersion = Math.max(latestVersion, version);
      store.recordFeedback(card.id, { verdict, knowledgeVersion: version, correctedSql, note });
      openEditors.delete(card.id);
      await refreshPanel();
    } catch (err) {
      renderAll();
      const message = err instanceof ApiError ? `feedback rejected: ${err.message}` : String(err);
      flashError(card.id, message);
    }
  }

  input.addEventListener("input", () => {
    submitBtn.disabled = !canSubmit(input.value);
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!canSubmit(input.value)) {
      return;
    }
    const card = store.createCard(input.value);
    input.value = "";
    submitBtn.disabled = true;
    renderAll();
    void run(card);
  });

  cardsEl.addEventListener("click", (event) => {
    const target = event.target as Element | null;
    const button = target?.closest("[data-action]");
    const article = target?.closest("[data-card-id]");
    if (!button || !article) {
      return;
    }
    const cardId = article.getAttribute("data-card-id") ?? "";
    const card = store.get(cardId);
    switch (button.getAttribute("data-action")) {
      case "accept":
        void giveFeedback(card, "accept", null, null);
        break;
      case "open-reject":
        openEditors.add(cardId);
        renderAll();
        break;
      case "cancel-reject":
        openEditors.delete(cardId);
        renderAll();
        break;
      case "submit-reject": {
        const sqlBox = article.querySelector("[data-role=\"corrected-sql\"]") as HTMLTextAreaElement | null;
        const noteBox = article.querySelector("[data-role=\"note\"]") as HTMLInputElement | null;
        const corrected = sqlBox && sqlBox.value.trim() ? sqlBox.value.trim() : null;
        const note = noteBox && noteBox.value.trim() ? noteBox.value.trim() : null;
        void giveFeedback(card, "reject", corrected, note);
        break;
      }
      case "retry": {
        const retried = store.retry(cardId);
        renderAll();
        void run(retried);
        break;
      }
      default:
        break;
    }
  });

  submitBtn.disabled = true;
  renderAll();
  void refreshPanel();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document, new ApiClient(""), new SessionStore(window.localStorage));
}
