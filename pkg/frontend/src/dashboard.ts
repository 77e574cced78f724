/** Dashboard controller: renders the run view and forwards author actions.
 *
 * No pipeline logic lives here — controls are enabled only when the server
 * reports the matching checkpoint, and every action is one documented POST.
 * After submitting feedback the panel stays disabled until a later poll
 * confirms the revision was applied (or rejected).
 */

import { ApiClient, ConflictError } from "./api.js";
import { RunPoller } from "./poll.js";
import type { RunEvent, TemplateCard } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function parseFilterText(text: string): Record<string, string> {
  const filters: Record<string, string> = {};
  for (const part of text.split(",")) {
    const item = part.trim();
    if (!item) continue;
    const eq = item.indexOf("=");
    if (eq <= 0) throw new Error(`filter must look like key=value: "${item}"`);
    filters[item.slice(0, eq).trim()] = item.slice(eq + 1).trim();
  }
  return filters;
}

export class Dashboard {
  readonly poller: RunPoller;
  awaitingAck = false;
  lastError: string | null = null;
  templateCards: TemplateCard[] | null = null;
  filterText = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly runId: string,
  ) {
    this.poller = new RunPoller(api, runId);
  }

  /** One poll round plus re-render. */
  async tick(): Promise<void> {
    const events = await this.poller.tick();
    if (this.awaitingAck && hasFeedbackResolution(events)) {
      this.awaitingAck = false;
    }
    const view = this.poller.view;
    if (view?.pending_checkpoint === "template" && this.templateCards === null) {
      await this.loadTemplates({});
    }
    if (view?.pending_checkpoint !== "template") {
      this.templateCards = null;
    }
    this.render();
  }

  async submitFeedback(stage: "content" | "html", text: string): Promise<void> {
    this.lastError = null;
    this.awaitingAck = true;
    this.render();
    try {
      await this.api.submitFeedback(this.runId, stage, text);
    } catch (err) {
      // 409 conflicts come back verbatim; the panel re-enables.
      this.lastError = err instanceof ConflictError ? err.message : String(err);
      this.awaitingAck = false;
    }
    this.render();
  }

  async approve(stage: "content" | "html"): Promise<void> {
    this.lastError = null;
    try {
      await this.api.approve(this.runId, stage);
    } catch (err) {
      this.lastError = err instanceof ConflictError ? err.message : String(err);
    }
    this.render();
  }

  async loadTemplates(filters: Record<string, string>): Promise<void> {
    this.lastError = null;
    try {
      this.templateCards = await this.api.getTemplates(filters);
    } catch (err) {
      this.lastError = String(err);
      this.templateCards = [];
    }
  }

  async applyFilterText(text: string): Promise<void> {
    this.filterText = text;
    try {
      await this.loadTemplates(parseFilterText(text));
    } catch (err) {
      this.lastError = (err as Error).message;
    }
    this.render();
  }

  async chooseTemplate(templateId: string): Promise<void> {
    this.lastError = null;
    try {
      await this.api.chooseTemplate(this.runId, templateId);
    } catch (err) {
      this.lastError = err instanceof ConflictError ? err.message : String(err);
    }
    this.render();
  }

  // -- rendering ---------------------------------------------------------------

  render(): void {
    const view = this.poller.view;
    if (!view) {
      this.root.innerHTML = `<p id="loading">Connecting to run…</p>`;
      return;
    }
    const pending = view.pending_checkpoint;
    const contentEnabled = pending === "content" && !this.awaitingAck;
    const htmlEnabled = pending === "html" && !this.awaitingAck;
    const showPreview = [
      "rendered",
      "html_approved",
      "done",
    ].includes(view.stage) || pending === "html";

    const sections = view.sections
      .map(
        (section) => `
        <article class="section-card" data-name="${escapeHtml(section.name)}">
          <h3>${escapeHtml(section.name)}</h3>
          <p class="excerpt">${escapeHtml(section.excerpt)}</p>
          <div class="thumbs">${section.placements
            .map(
              (p) =>
                `<span class="thumb" data-index="${p.index}">#${p.index} ${escapeHtml(
                  p.path,
                )}</span>`,
            )
            .join("")}</div>
        </article>`,
      )
      .join("");

    const banners = [
      this.poller.stale
        ? `<div id="banner-stale" class="banner warn">Connection lost — showing last known state, retrying…</div>`
        : "",
      view.failure
        ? `<div id="banner-failure" class="banner error">Run failed: ${escapeHtml(view.failure)}</div>`
        : "",
      this.lastError
        ? `<div id="banner-error" class="banner error">${escapeHtml(this.lastError)}</div>`
        : "",
    ].join("");

    const templatePanel =
      pending === "template"
        ? `
      <section id="template-panel" class="panel">
        <h2>Pick a template</h2>
        <div class="filter-row">
          <input id="template-filter" placeholder="has_navigation=true" value="${escapeHtml(
            this.filterText,
          )}">
          <button id="template-filter-apply">Filter</button>
        </div>
        ${
          this.templateCards && this.templateCards.length
            ? `<div id="template-cards">${this.templateCards
                .map(
                  (card) => `
                <button class="template-card" data-id="${escapeHtml(card.template_id)}">
                  <strong>${escapeHtml(card.template_id)}</strong>
                  <span class="badges">${Object.entries(card.tags)
                    .map(([k, v]) => `<em class="badge">${escapeHtml(`${k}=${v}`)}</em>`)
                    .join("")}</span>
                  <span class="complexity">${card.complexity} nodes</span>
                </button>`,
                )
                .join("")}</div>`
            : `<p id="template-empty">No templates match — adjust the filters.</p>`
        }
      </section>`
        : "";

    this.root.innerHTML = `
      ${banners}
      <header>
        <h1>Run ${escapeHtml(view.run_id)}</h1>
        <span id="run-stage" class="stage">${escapeHtml(view.stage)}</span>
        <span id="pending" data-kind="${pending ?? ""}">${
          pending ? `waiting at ${pending} checkpoint` : "running…"
        }</span>
      </header>
      <section id="sections">${sections}</section>
      <section id="content-panel" class="panel">
        <h2>Content feedback</h2>
        <textarea id="content-feedback-text" ${contentEnabled ? "" : "disabled"}></textarea>
        <button id="content-feedback-submit" ${contentEnabled ? "" : "disabled"}>Send feedback</button>
        <button id="content-approve" ${contentEnabled ? "" : "disabled"}>Approve content</button>
      </section>
      ${templatePanel}
      <section id="html-panel" class="panel">
        <h2>Style feedback</h2>
        <textarea id="style-feedback-text" ${htmlEnabled ? "" : "disabled"}></textarea>
        <button id="style-feedback-submit" ${htmlEnabled ? "" : "disabled"}>Send feedback</button>
        <button id="html-approve" ${htmlEnabled ? "" : "disabled"}>Approve page</button>
      </section>
      ${
        showPreview
          ? `<section id="preview" class="panel"><h2>Preview</h2>
             <iframe id="preview-frame" sandbox="allow-scripts" src="${this.api.previewUrl(
               this.runId,
             )}"></iframe></section>`
          : ""
      }
    `;
    this.wire();
  }

  private wire(): void {
    const byId = (id: string) => this.root.querySelector<HTMLElement>(`#${id}`);
    byId("content-feedback-submit")?.addEventListener("click", () => {
      const text = (byId("content-feedback-text") as HTMLTextAreaElement).value;
      void this.submitFeedback("content", text);
    });
    byId("content-approve")?.addEventListener("click", () => void this.approve("content"));
    byId("style-feedback-submit")?.addEventListener("click", () => {
      const text = (byId("style-feedback-text") as HTMLTextAreaElement).value;
      void this.submitFeedback("html", text);
    });
    byId("html-approve")?.addEventListener("click", () => void this.approve("html"));
    byId("template-filter-apply")?.addEventListener("click", () => {
      const text = (byId("template-filter") as HTMLInputElement).value;
      void this.applyFilterText(text);
    });
    for (const card of this.root.querySelectorAll<HTMLElement>(".template-card")) {
      card.addEventListener("click", () => {
        void this.chooseTemplate(card.dataset.id ?? "");
      });
    }
  }
}

function hasFeedbackResolution(events: RunEvent[]): boolean {
  return events.some(
    (e) => e.type === "feedback_applied" || e.type === "feedback_rejected",
  );
}
