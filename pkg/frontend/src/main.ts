/** Bootstrap: fetch graph metadata, wire store, controller and view. */

import { ApiClient } from "./api.js";
import { InferController } from "./controller.js";
import type { TimerHost } from "./controller.js";
import { EvidenceStore } from "./store.js";
import { ExplorerView } from "./render.js";

const windowTimers: TimerHost = {
  set: (fn, ms) => window.setTimeout(fn, ms),
  clear: (id) => window.clearTimeout(id),
};

async function boot(): Promise<void> {
  const root = document.getElementById("app") as HTMLElement;
  const api = new ApiClient((url, init) => fetch(url, init));
  let graph, health;
  try {
    [graph, health] = await Promise.all([api.graph(), api.health()]);
  } catch (err) {
    root.textContent = `service unreachable: ${String(err)}`;
    return;
  }
  const store = new EvidenceStore(graph);
  const controller = new InferController(store, api, windowTimers, () => view.render());
  const view = new ExplorerView(root, store, controller, health);
  view.render();
  // first marginals without waiting for a toggle
  controller.flush();
}

void boot();
