/** Entry point: fetch the starting configuration and mount the panel.
 *
 * Served from the analysis service at /ui, so API calls are same-origin;
 * set window.PDHLOCK_BASE_URL before loading to point elsewhere. */

import { ApiClient } from "./api.js";
import { Panel } from "./panel.js";
import { DEFAULT_CONFIG } from "./default_config.js";
import type { ProjectConfig } from "./types.js";

declare global {
  interface Window {
    PDHLOCK_BASE_URL?: string;
    pdhlockPanel?: Panel;
  }
}

async function boot(): Promise<void> {
  const base = window.PDHLOCK_BASE_URL ?? "";
  const api = new ApiClient(base);
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const config = JSON.parse(JSON.stringify(DEFAULT_CONFIG)) as ProjectConfig;
  const panel = new Panel(root, api, config, { session: "ui" });
  window.pdhlockPanel = panel;
  await panel.evaluateNow();
}

void boot();
