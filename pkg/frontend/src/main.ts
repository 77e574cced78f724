/** Entry point: wire the dashboard to a run and poll it. */

import { ApiClient } from "./api.js";
import { Dashboard } from "./dashboard.js";

async function discoverRunId(api: ApiClient): Promise<string> {
  const resp = await fetch(`${api.base}/runs`);
  const body = (await resp.json()) as { runs: string[] };
  const first = body.runs[0];
  if (!first) throw new Error("no runs on the service yet");
  return first;
}

export async function start(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get("api") ?? "");
  const runId = params.get("run") ?? (await discoverRunId(api));
  const dashboard = new Dashboard(root, api, runId);

  const loop = async (): Promise<void> => {
    await dashboard.tick();
    window.setTimeout(() => void loop(), dashboard.poller.intervalMs);
  };
  await loop();
}

const rootElement = document.getElementById("app");
if (rootElement) {
  void start(rootElement);
}
