// Policy builder: turns node picks from the administrator's own trees into
// the engine's policy syntax.  Restricting the pick lists to owned trees
// prevents rogue drafts by construction; drafts are validated server-side
// regardless when posted.

import type { TreeDoc, TreeNodeDoc } from "./types.js";

export interface NodePick {
  keyword: string;        // dimension keyword or tree name
  labels: string[];       // descent path
}

export interface ConditionDraft {
  kind: "time" | "compare";
  window?: string;        // "HH:MM-HH:MM"
  attr?: string;
  op?: "=" | "!" | "<" | ">";
  value?: string;
}

export interface ActionDraft {
  attr: string;
  value: string;
  target?: NodePick;      // defaults to the policy target
  notify?: string;        // notification channel instead of a command
}

export interface PolicyDraft {
  id: string;
  admin: string;
  source: NodePick;
  target: NodePick;
  conditions: ConditionDraft[];
  actions: ActionDraft[];
}

export function renderNodePick(pick: NodePick): string {
  return `${pick.keyword}{"${pick.labels.join("→")}"}`;
}

export function validateDraft(draft: PolicyDraft): string[] {
  const problems: string[] = [];
  if (!draft.id) problems.push("policy needs an id");
  if (!draft.admin) problems.push("policy needs an authoring administrator");
  if (!draft.source?.labels?.length) problems.push("pick a source node");
  if (!draft.target?.labels?.length) problems.push("pick a target node");
  if (!draft.actions.length) problems.push("add at least one action");
  for (const cond of draft.conditions) {
    if (cond.kind === "time" && !/^\d{2}:\d{2}-\d{2}:\d{2}$/.test(cond.window ?? "")) {
      problems.push(`bad time window: ${cond.window}`);
    }
    if (cond.kind === "compare" && (!cond.attr || !cond.op || cond.value === undefined)) {
      problems.push("comparison conditions need attribute, comparator and value");
    }
  }
  for (const action of draft.actions) {
    if (!action.notify && (!action.attr || !action.value)) {
      problems.push("commands need attribute and value");
    }
  }
  return problems;
}

export function serializeDraft(draft: PolicyDraft): string {
  const problems = validateDraft(draft);
  if (problems.length) {
    throw new Error(`draft is incomplete: ${problems.join("; ")}`);
  }
  const parts: string[] = [`source-node{${renderNodePick(draft.source)}}`];
  for (const cond of draft.conditions) {
    if (cond.kind === "time") {
      parts.push(`time{"${cond.window}"}`);
    } else {
      parts.push(`${cond.attr}{${cond.op}${cond.value}}`);
    }
  }
  const actions = draft.actions.map((action) => {
    if (action.notify) {
      return `notify{"${action.notify}"}`;
    }
    const target = action.target ? `@${renderNodePick(action.target)}` : "";
    return `iot-commands-action{${action.attr}=${action.value}}${target}`;
  });
  parts.push(actions.join(" >> "));
  parts.push(`target-node{${renderNodePick(draft.target)}}`);
  return `policy{"${draft.id}"} @admin{"${draft.admin}"} :\n    ` + parts.join("\n    -> ");
}

export interface PickOption {
  pick: NodePick;
  tree: string;
  deviceCount: number;
}

// Node positions the builder offers: every named node of the administrator's
// own trees, addressed by dimension when unambiguous, else by full tree path.
export function pickOptions(trees: TreeDoc[], admin: string): PickOption[] {
  const options: PickOption[] = [];
  for (const tree of trees) {
    if (tree.owner !== admin) continue;
    const walk = (node: TreeNodeDoc, path: string[]) => {
      const fullPath = [...path, node.label];
      options.push({
        pick: { keyword: "group", labels: fullPath },
        tree: tree.tree,
        deviceCount: node.device_count,
      });
      for (const child of node.children ?? []) walk(child, fullPath);
    };
    walk(tree.root, []);
  }
  options.sort((a, b) =>
    a.tree.localeCompare(b.tree) || a.pick.labels.join("/").localeCompare(b.pick.labels.join("/")));
  return options;
}
