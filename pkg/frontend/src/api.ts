/** Typed client for the run service.
 *
 * Exactly the documented endpoints and nothing else; every state change the
 * dashboard makes round-trips through these calls.
 */

import type { RunEvent, RunView, TemplateCard } from "./types.js";

export class ConflictError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "ConflictError";
  }
}

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ServiceError";
  }
}

async function throwOnError(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  if (resp.status === 409) throw new ConflictError(detail);
  throw new ServiceError(resp.status, detail);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.base}${path}`);
    await throwOnError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const resp = await fetch(`${this.base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    await throwOnError(resp);
    return (await resp.json()) as T;
  }

  getState(runId: string): Promise<RunView> {
    return this.getJson(`/runs/${runId}/state`);
  }

  async getEvents(runId: string, since: number): Promise<RunEvent[]> {
    const body = await this.getJson<{ events: RunEvent[] }>(
      `/runs/${runId}/events?since=${since}`,
    );
    return body.events;
  }

  async getTemplates(filters: Record<string, string>): Promise<TemplateCard[]> {
    const parts = Object.entries(filters).map(
      ([key, value]) => `tags=${encodeURIComponent(`${key}=${value}`)}`,
    );
    const query = parts.length ? `?${parts.join("&")}` : "";
    const body = await this.getJson<{ templates: TemplateCard[] }>(`/templates${query}`);
    return body.templates;
  }

  submitFeedback(runId: string, stage: string, text: string): Promise<unknown> {
    return this.postJson(`/runs/${runId}/feedback`, { stage, text });
  }

  approve(runId: string, stage: string): Promise<unknown> {
    return this.postJson(`/runs/${runId}/approve`, { stage });
  }

  chooseTemplate(runId: string, templateId: string): Promise<unknown> {
    return this.postJson(`/runs/${runId}/template`, { template_id: templateId });
  }

  previewUrl(runId: string): string {
    return `${this.base}/runs/${runId}/preview`;
  }
}
