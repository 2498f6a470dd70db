// HTML renderers. Pure string-in string-out so tests can assert on markup
// without a DOM; main.ts owns insertion and event wiring.

import type { KnowledgeSummary, QueryResponse } from "./api.js";
import { canGiveFeedback, type Card } from "./state.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const SQL_KEYWORDS = new Set([
  "WITH", "AS", "SELECT", "FROM", "WHERE", "GROUP", "BY", "ORDER", "HAVING",
  "LIMIT", "OFFSET", "JOIN", "CROSS", "LEFT", "RIGHT", "FULL", "OUTER", "ON",
  "AND", "OR", "NOT", "IN", "EXISTS", "CASE", "WHEN", "THEN", "ELSE", "END",
  "ASC", "DESC", "DISTINCT", "UNION", "ALL", "NULL", "IS", "BETWEEN", "LIKE",
  "OVER", "PARTITION", "CAST",
]);

export function highlightSql(sql: string): string {
  const tokens = /'(?:[^']|'')*'|\d+(?:\.\d+)?|[A-Za-z_][A-Za-z_0-9]*|[\s\S]/g;
  let out = "";
  for (const match of sql.matchAll(tokens)) {
    const tok = match[0];
    if (tok.startsWith("'")) {
      out += `<span class="sql-str">${esc(tok)}</span>`;
    } else if (/^\d/.test(tok)) {
      out += `<span class="sql-num">${esc(tok)}</span>`;
    } else if (SQL_KEYWORDS.has(tok.toUpperCase())) {
      out += `<span class="sql-kw">${esc(tok)}</span>`;
    } else {
      out += esc(tok);
    }
  }
  return out;
}

function scoredList(title: string, ranked: [string, number][]): string {
  const items = ranked
    .map(([id, score]) => `<li><code>${esc(id)}</code> <span class="score">${score.toFixed(3)}</span></li>`)
    .join("");
  return `<div class="retrieval-block"><h4>${esc(title)}</h4><ul>${items || "<li class=\"empty\">none</li>"}</ul></div>`;
}

function renderPlan(response: QueryResponse): string {
  const steps = response.plan
    .map((step) => {
      const pseudo = step.pseudo_sql
        ? `<code class="pseudo">${esc(step.pseudo_sql)}</code>`
        : "";
      const refs = step.refs.map((r) => `<span class="ref">${esc(r)}</span>`).join(" ");
      return `<li>${esc(step.description)} ${pseudo} ${refs}</li>`;
    })
    .join("");
  return `<section class="plan"><h4>Plan</h4><ol>${steps || "<li class=\"empty\">no steps</li>"}</ol></section>`;
}

function formatCell(value: unknown): string {
  if (value === null || value === undefined) {
    return "<td class=\"null\">NULL</td>";
  }
  return `<td>${esc(String(value))}</td>`;
}

function renderResults(response: QueryResponse): string {
  if (response.columns.length === 0) {
    return "<section class=\"results\"><h4>Results</h4><p class=\"empty\">no result set</p></section>";
  }
  const head = response.columns.map((c) => `<th>${esc(c)}</th>`).join("");
  const rows = response.preview
    .map((row) => `<tr>${row.map(formatCell).join("")}</tr>`)
    .join("");
  const body = rows || `<tr><td class="empty" colspan="${response.columns.length}">no rows</td></tr>`;
  return `<section class="results"><h4>Results (first ${response.preview.length} rows)</h4><table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table></section>`;
}

function renderHistory(response: QueryResponse): string {
  const rounds = response.history
    .map((round, idx) => {
      const notes = round.feedback
        .map(
          (fb) =>
            `<li><span class="fb-kind">${esc(fb.kind)}</span>${fb.criterion ? ` <span class="fb-criterion">${esc(fb.criterion)}</span>` : ""} ${esc(fb.message)}</li>`,
        )
        .join("");
      return `<li><span class="round-label">attempt ${idx + 1}</span><pre class="sql">${highlightSql(round.sql)}</pre><ul class="round-feedback">${notes || "<li class=\"empty\">accepted</li>"}</ul></li>`;
    })
    .join("");
  return `<section class="history"><h4>Correction history (${response.rounds_used} round${response.rounds_used === 1 ? "" : "s"})</h4><ol>${rounds}</ol></section>`;
}

function renderTimings(response: QueryResponse): string {
  const rows = response.timings
    .map(
      (t) =>
        `<tr${t.degraded ? " class=\"degraded\"" : ""}><td>${esc(t.stage)}</td><td>${t.seconds.toFixed(3)}s</td><td>${t.degraded ? "degraded" : "ok"}</td></tr>`,
    )
    .join("");
  return `<section class="timings"><h4>Stage timings</h4><table><tbody>${rows}</tbody></table></section>`;
}

function renderAnswer(response: QueryResponse): string {
  const error = response.error
    ? `<p class="card-error">error: ${esc(response.error)}</p>`
    : "";
  return [
    `<dl class="meta">`,
    `<dt>request</dt><dd><code>${esc(response.request_id)}</code></dd>`,
    `<dt>intent</dt><dd>${esc(response.intent)}</dd>`,
    `<dt>reformulated</dt><dd>${esc(response.reformulated)}</dd>`,
    `<dt>model calls</dt><dd>${response.model_calls}</dd>`,
    `<dt>knowledge version</dt><dd>${response.knowledge_version}</dd>`,
    `</dl>`,
    error,
    renderPlan(response),
    `<section class="retrieval"><h4>Retrieval</h4>${scoredList("Examples", response.retrieval.examples)}${scoredList("Instructions", response.retrieval.instructions)}</section>`,
    `<section class="sql-block"><h4>SQL</h4><pre class="sql">${highlightSql(response.sql)}</pre></section>`,
    renderResults(response),
    renderHistory(response),
    renderTimings(response),
  ].join("");
}

function renderControls(card: Card, editorOpen: boolean): string {
  switch (card.state) {
    case "pending":
      return "<p class=\"card-wait\">running…</p>";
    case "timeout":
    case "error":
    case "interrupted": {
      const label = card.state === "timeout" ? "timed out" : card.state;
      return `<p class="card-error">${esc(label)}: ${esc(card.error ?? "")}</p><button data-action="retry">Retry</button>`;
    }
    case "feedback-given": {
      const fb = card.feedback;
      if (!fb) {
        return "";
      }
      const badge =
        fb.verdict === "accept"
          ? `promoted, version ${fb.knowledgeVersion}`
          : `rejection recorded, version ${fb.knowledgeVersion}`;
      return `<span class="badge badge-${fb.verdict}">${esc(badge)}</span>`;
    }
    case "answered": {
      if (!canGiveFeedback(card)) {
        return "<p class=\"card-note\">request failed; feedback is disabled</p>";
      }
      if (editorOpen) {
        const sql = card.response ? card.response.sql : "";
        return [
          `<div class="reject-editor">`,
          `<label>Corrected SQL<textarea data-role="corrected-sql" rows="6">${esc(sql)}</textarea></label>`,
          `<label>Note<input data-role="note" type="text" placeholder="what was wrong?"></label>`,
          `<button data-action="submit-reject">Submit rejection</button>`,
          `<button data-action="cancel-reject">Cancel</button>`,
          `</div>`,
        ].join("");
      }
      return `<button data-action="accept">Accept</button><button data-action="open-reject">Reject</button>`;
    }
  }
}

export function renderCard(card: Card, editorOpen = false): string {
  const status = card.response ? card.response.status : card.state;
  const body = card.response ? renderAnswer(card.response) : "";
  return [
    `<article class="card card-${card.state}" data-card-id="${esc(card.id)}">`,
    `<header><span class="status-badge status-${esc(status)}">${esc(status)}</span><span class="card-nl">${esc(card.nl)}</span></header>`,
    body,
    `<footer class="controls">${renderControls(card, editorOpen)}</footer>`,
    `</article>`,
  ].join("");
}

export function renderCards(cards: readonly Card[], openEditors: ReadonlySet<string>): string {
  return [...cards]
    .reverse()
    .map((card) => renderCard(card, openEditors.has(card.id)))
    .join("");
}

export interface PanelOptions {
  stale?: boolean;
}

export function renderKnowledgePanel(
  summary: KnowledgeSummary | null,
  options: PanelOptions = {},
): string {
  if (!summary) {
    return "<aside class=\"panel\"><h3>Knowledge</h3><p class=\"empty\">loading…</p></aside>";
  }
  const stale = options.stale
    ? "<span class=\"badge badge-stale\">stale</span>"
    : "";
  if (summary.examples === 0 && summary.instructions === 0) {
    return [
      `<aside class="panel">`,
      `<h3>Knowledge ${stale}</h3>`,
      `<p class="zero-state">knowledge set is empty (version ${summary.version}); run preprocessing or accept an answer to seed it</p>`,
      `</aside>`,
    ].join("");
  }
  const intents = Object.entries(summary.partitions)
    .map(([intent, count]) => `<li><code>${esc(intent)}</code> <span class="score">${count}</span></li>`)
    .join("");
  const tables = summary.tables.map((t) => `<li><code>${esc(t)}</code></li>`).join("");
  return [
    `<aside class="panel">`,
    `<h3>Knowledge ${stale}</h3>`,
    `<dl class="tiles">`,
    `<dt>version</dt><dd class="panel-version">${summary.version}</dd>`,
    `<dt>examples</dt><dd>${summary.examples}</dd>`,
    `<dt>instructions</dt><dd>${summary.instructions}</dd>`,
    `</dl>`,
    `<h4>Examples per intent</h4><ul class="intents">${intents || "<li class=\"empty\">none</li>"}</ul>`,
    `<h4>Tables</h4><ul class="tables">${tables || "<li class=\"empty\">none</li>"}</ul>`,
    `</aside>`,
  ].join("");
}
