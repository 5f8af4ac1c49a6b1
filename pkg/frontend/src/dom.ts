// Thin DOM bindings for the view models.  All interaction handlers delegate
// to the store; nothing here owns state.

import type { Store } from "./state.js";
import {
  layoutGraph,
  maskedRows,
  proposalRows,
  tieRows,
  treeRows,
  triageRows,
} from "./views.js";
import { pickOptions, serializeDraft, type PolicyDraft } from "./builder.js";

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

export function renderSummary(store: Store, target: HTMLElement): void {
  const { summary } = store.current();
  target.replaceChildren(
    el("span", { class: "chip" }, `snapshot ${summary.snapshot}`),
    el("span", { class: "chip" }, `${summary.policies} policies`),
    el("span", { class: summary.unresolved ? "chip warn" : "chip" },
      `${summary.unresolved} unresolved`),
    ...Object.entries(summary.findings)
      .filter(([, count]) => count > 0)
      .map(([kind, count]) => el("span", { class: "chip" }, `${kind}: ${count}`)),
  );
}

const expandedPaths = new Set<string>();

export function renderTrees(store: Store, target: HTMLElement): void {
  const { trees } = store.current();
  target.replaceChildren();
  for (const tree of trees.trees) {
    const box = el("div", { class: "tree" });
    box.append(el("h3", {}, `${tree.tree} (owner: ${tree.owner})`));
    for (const row of treeRows(tree, expandedPaths)) {
      const line = el("div", {
        class: "tree-row",
        style: `padding-left:${row.depth * 18}px`,
      });
      if (row.expandable) {
        const toggle = el("button", { class: "toggle" },
          expandedPaths.has(row.path) ? "▾" : "▸");
        toggle.addEventListener("click", () => {
          if (!expandedPaths.delete(row.path)) expandedPaths.add(row.path);
          renderTrees(store, target);
        });
        line.append(toggle);
      }
      line.append(el("span", {}, ` ${row.label} `),
        el("small", {}, `${row.dimension} · ${row.leafCount} leaves`));
      box.append(line);
    }
    target.append(box);
  }
}

export function renderGraph(store: Store, target: HTMLElement): void {
  const { graph } = store.current();
  const layout = layoutGraph(graph);
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("width", "900");
  svg.setAttribute("height", String(140 + Math.ceil(layout.islands / 3) * 260));
  const at = new Map(layout.nodes.map((n) => [n.id, n]));
  for (const edge of layout.edges) {
    const a = at.get(edge.from);
    const b = at.get(edge.to);
    if (!a || !b) continue;
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", "edge");
    const title = document.createElementNS(svgNs, "title");
    title.textContent = edge.label;
    line.append(title);
    svg.append(line);
  }
  for (const node of layout.nodes) {
    const circle = document.createElementNS(svgNs, "circle");
    circle.setAttribute("cx", String(node.x));
    circle.setAttribute("cy", String(node.y));
    circle.setAttribute("r", "14");
    circle.setAttribute("class", "node");
    const title = document.createElementNS(svgNs, "title");
    title.textContent = node.label;
    circle.append(title);
    svg.append(circle);
  }
  const maskedBox = el("div", { class: "masked" });
  maskedBox.append(el("h3", {}, "Masked fragments"));
  for (const row of maskedRows(graph)) {
    maskedBox.append(el("div", {},
      `${row.policy} masked by ${row.winner}${row.tie ? " (tie)" : ""} on ${row.overlap}`));
  }
  target.replaceChildren(svg, maskedBox);
}

export function renderTriage(store: Store, target: HTMLElement): void {
  const { findings, graph } = store.current();
  target.replaceChildren();
  const list = el("div", { class: "findings" });
  list.append(el("h3", {}, "Findings"));
  for (const row of triageRows(findings)) {
    const line = el("div", { class: `finding ${row.kind.toLowerCase()}` });
    line.append(
      el("b", {}, row.rank !== null ? `#${row.rank} ${row.kind}` : row.kind),
      el("span", {}, ` ${row.policies}: ${row.summary}`),
    );
    list.append(line);
  }
  const ties = el("div", { class: "ties" });
  ties.append(el("h3", {}, "Unresolved conflicts"));
  for (const tie of tieRows(graph.conflicts)) {
    const line = el("div", { class: "tie" },
      `#${tie.recordId} ${tie.policies.join(" vs ")} on ${tie.overlap}: `);
    for (const winner of tie.policies) {
      const button = el("button", {}, `keep ${winner}`);
      button.addEventListener("click", () => {
        void store.resolveConflict(tie.recordId, winner);
      });
      line.append(button);
    }
    ties.append(line);
  }
  target.append(list, ties);
}

export function renderProposals(store: Store, target: HTMLElement): void {
  const { proposals } = store.current();
  target.replaceChildren(el("h3", {}, "Inferred proposals"));
  for (const row of proposalRows(proposals.proposals)) {
    const box = el("div", { class: `proposal ${row.status.toLowerCase()}` });
    box.append(
      el("b", {}, `${row.id} (${row.findingKind}, replaces ${row.replaces}) [${row.status}]`),
      el("p", {}, row.rationale),
      el("pre", {}, row.policyText),
    );
    if (row.status === "Pending") {
      const accept = el("button", {}, "Yes, apply");
      accept.addEventListener("click", () => void store.acceptProposal(row.id));
      const reject = el("button", {}, "No, reject");
      reject.addEventListener("click", () => void store.rejectProposal(row.id));
      box.append(accept, reject);
    }
    target.append(box);
  }
}

export function renderBuilder(store: Store, target: HTMLElement, admin: string): void {
  const { trees } = store.current();
  const options = pickOptions(trees.trees, admin);
  target.replaceChildren(el("h3", {}, `Policy builder (${admin})`));
  const selects = {
    source: el("select", { id: "builder-source" }) as HTMLSelectElement,
    target: el("select", { id: "builder-target" }) as HTMLSelectElement,
  };
  for (const select of Object.values(selects)) {
    for (const option of options) {
      const item = el("option", { value: JSON.stringify(option.pick) },
        `${option.pick.labels.join(" → ")} (${option.deviceCount})`);
      select.append(item);
    }
  }
  const idInput = el("input", { placeholder: "policy id" }) as HTMLInputElement;
  const windowInput = el("input", { placeholder: "HH:MM-HH:MM (optional)" }) as HTMLInputElement;
  const attrInput = el("input", { placeholder: "action attribute" }) as HTMLInputElement;
  const valueInput = el("input", { placeholder: "action value" }) as HTMLInputElement;
  const errors = el("div", { class: "errors" });
  const submit = el("button", {}, "Post policy");
  submit.addEventListener("click", () => {
    const draft: PolicyDraft = {
      id: idInput.value,
      admin,
      source: JSON.parse(selects.source.value),
      target: JSON.parse(selects.target.value),
      conditions: windowInput.value ? [{ kind: "time", window: windowInput.value }] : [],
      actions: [{ attr: attrInput.value, value: valueInput.value }],
    };
    try {
      const text = serializeDraft(draft);
      void store.addPolicy(text).catch((error) => {
        errors.textContent = String(error);
      });
      errors.textContent = "";
    } catch (error) {
      errors.textContent = String(error);
    }
  });
  target.append(idInput, selects.source, selects.target, windowInput,
    attrInput, valueInput, submit, errors);
}
