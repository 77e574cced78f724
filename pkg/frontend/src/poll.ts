/** Polling loop: the view is whatever the service last reported.
 *
 * On a failed poll the previous view is kept and flagged stale; the retry
 * delay backs off exponentially and snaps back to the base interval on the
 * next success.
 */

import type { ApiClient } from "./api.js";
import type { RunEvent, RunView } from "./types.js";

export const BASE_INTERVAL_MS = 1000;
const MAX_INTERVAL_MS = 8000;

export class RunPoller {
  view: RunView | null = null;
  stale = false;
  cursor = 0;
  intervalMs = BASE_INTERVAL_MS;

  constructor(
    private readonly api: ApiClient,
    private readonly runId: string,
  ) {}

  /** One poll round; returns the fresh events (empty on failure). */
  async tick(): Promise<RunEvent[]> {
    try {
      const view = await this.api.getState(this.runId);
      const events = await this.api.getEvents(this.runId, this.cursor);
      for (const event of events) {
        if (event.index > this.cursor) this.cursor = event.index;
      }
      this.view = view;
      this.stale = false;
      this.intervalMs = BASE_INTERVAL_MS;
      return events;
    } catch {
      this.stale = true;
      this.intervalMs = Math.min(this.intervalMs * 2, MAX_INTERVAL_MS);
      return [];
    }
  }
}
