// Dashboard entry point: one store, five panels, re-rendered on every
// snapshot change pushed by service responses.

import { ApiClient } from "./api.js";
import { Store } from "./state.js";
import {
  renderBuilder,
  renderGraph,
  renderProposals,
  renderSummary,
  renderTrees,
  renderTriage,
} from "./dom.js";

export async function boot(baseUrl: string, admin: string): Promise<Store> {
  const store = new Store(new ApiClient(baseUrl));
  const panels = {
    summary: document.getElementById("summary")!,
    trees: document.getElementById("trees")!,
    graph: document.getElementById("graph")!,
    triage: document.getElementById("triage")!,
    proposals: document.getElementById("proposals")!,
    builder: document.getElementById("builder")!,
  };
  store.subscribe(() => {
    renderSummary(store, panels.summary);
    renderTrees(store, panels.trees);
    renderGraph(store, panels.graph);
    renderTriage(store, panels.triage);
    renderProposals(store, panels.proposals);
    renderBuilder(store, panels.builder, admin);
  });
  await store.refresh();
  return store;
}

declare global {
  interface Window {
    policyweaveBoot: typeof boot;
  }
}

if (typeof window !== "undefined") {
  window.policyweaveBoot = boot;
}
