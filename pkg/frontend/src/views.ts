// View models: pure projections of service documents into render-ready
// structures.  The DOM layer in dom.ts binds these; keeping them pure keeps
// the logic testable without a browser.

import type {
  ConflictDoc,
  FindingDoc,
  FindingsDocument,
  GraphDocument,
  ProposalDoc,
  TreeDoc,
  TreeNodeDoc,
} from "./types.js";

// --- tree browser -----------------------------------------------------------

export interface TreeRow {
  label: string;
  depth: number;
  dimension: string;
  leafCount: number;
  expandable: boolean;
  path: string;
}

export function treeRows(tree: TreeDoc, expanded: Set<string>): TreeRow[] {
  const rows: TreeRow[] = [];
  const walk = (node: TreeNodeDoc, depth: number, path: string) => {
    const here = path ? `${path}/${node.label}` : node.label;
    const children = node.children ?? [];
    rows.push({
      label: node.label,
      depth,
      dimension: node.dimension,
      leafCount: node.values?.length ?? node.device_count,
      expandable: children.length > 0,
      path: here,
    });
    if (children.length && expanded.has(here)) {
      for (const child of children) walk(child, depth + 1, here);
    }
  };
  walk(tree.root, 0, "");
  return rows;
}

// --- graph layout ------------------------------------------------------------

export interface LaidOutNode {
  id: string;
  x: number;
  y: number;
  label: string;
  island: number;
}

export interface LaidOutEdge {
  id: string;
  from: string;
  to: string;
  label: string;
  masked: boolean;
}

export interface GraphLayout {
  nodes: LaidOutNode[];
  edges: LaidOutEdge[];
  islands: number;
}

// Deterministic layout: islands in columns, nodes on a ring per island,
// ordering fixed by node id.  Same document, same pixels.
export function layoutGraph(doc: GraphDocument, width = 900, rowHeight = 260): GraphLayout {
  const islandOf = new Map<string, number>();
  doc.islands.forEach((devices, index) => {
    for (const device of devices) islandOf.set(device, index);
  });
  const nodeIsland = (node: { id: string; devices: string[] }) =>
    node.devices.length ? islandOf.get(node.devices[0]) ?? doc.islands.length : doc.islands.length;

  const groups = new Map<number, string[]>();
  const byId = new Map(doc.nodes.map((n) => [n.id, n]));
  for (const node of [...doc.nodes].sort((a, b) => a.id.localeCompare(b.id))) {
    const island = nodeIsland(node);
    if (!groups.has(island)) groups.set(island, []);
    groups.get(island)!.push(node.id);
  }
  const islandIds = [...groups.keys()].sort((a, b) => a - b);
  const perRow = Math.max(1, Math.floor(width / 300));
  const nodes: LaidOutNode[] = [];
  islandIds.forEach((island, islandIndex) => {
    const cx = 150 + (islandIndex % perRow) * 300;
    const cy = 130 + Math.floor(islandIndex / perRow) * rowHeight;
    const members = groups.get(island)!;
    members.forEach((id, i) => {
      const angle = (2 * Math.PI * i) / members.length;
      const radius = members.length === 1 ? 0 : 90;
      const node = byId.get(id)!;
      nodes.push({
        id,
        x: Math.round(cx + radius * Math.cos(angle)),
        y: Math.round(cy + radius * Math.sin(angle)),
        label: node.devices.length <= 2 ? node.devices.join(",") : `${node.devices.length} devices`,
        island,
      });
    });
  });
  const edges: LaidOutEdge[] = [...doc.edges]
    .sort((a, b) => a.id.localeCompare(b.id))
    .map((edge) => ({
      id: edge.id,
      from: edge.source,
      to: edge.target,
      label: `${edge.policy}: ${edge.action.join(" ")}`,
      masked: false,
    }));
  return { nodes, edges, islands: islandIds.length };
}

export interface MaskedRow {
  policy: string;
  winner: string;
  overlap: string;
  tie: boolean;
}

export function maskedRows(doc: GraphDocument): MaskedRow[] {
  return doc.masked
    .filter((m) => !m.tombstone)
    .map((m) => ({
      policy: m.policy,
      winner: m.winner,
      overlap: m.overlap.join(", "),
      tie: m.tie,
    }))
    .sort((a, b) => a.policy.localeCompare(b.policy) || a.winner.localeCompare(b.winner));
}

// --- findings triage -----------------------------------------------------------

export interface TriageRow {
  kind: string;
  policies: string;
  severity: number | null;
  rank: number | null;
  summary: string;
  evidence: Record<string, unknown>;
}

const EVIDENCE_SUMMARY: Record<string, (f: FindingDoc) => string> = {
  Gap: (f) => `uncovered ${(f.evidence.uncovered as string[])?.join(", ")} (${f.evidence.attribute})`,
  Loop: (f) => (f.evidence.toggling ? "toggling loop" : "cycle"),
  Chain: (f) => `chain ${(f.evidence.chain as string[])?.join(" → ")}`,
  Rogue: (f) => `outside author's trees: ${Object.keys(f.evidence.outside ?? {}).join(", ")}`,
  PotentialRuntime: (f) =>
    `conflicting actions, cluster distance ${(f.evidence.cluster_distance as number)?.toFixed(2)}`,
  AccessViolation: (f) => `window ${f.evidence.window_minutes} min with no revoke`,
};

export function triageRows(doc: FindingsDocument): TriageRow[] {
  const rows: TriageRow[] = [];
  for (const [kind, findings] of Object.entries(doc.findings)) {
    for (const finding of findings) {
      rows.push({
        kind,
        policies: [...finding.policies].sort().join(", "),
        severity: finding.severity ?? null,
        rank: finding.rank ?? null,
        summary: EVIDENCE_SUMMARY[kind]?.(finding) ?? "",
        evidence: finding.evidence,
      });
    }
  }
  // ranked findings first in rank order, then by kind/policies for stability
  rows.sort((a, b) => {
    if (a.rank !== null && b.rank !== null) return a.rank - b.rank;
    if (a.rank !== null) return -1;
    if (b.rank !== null) return 1;
    return a.kind.localeCompare(b.kind) || a.policies.localeCompare(b.policies);
  });
  return rows;
}

export interface TieRow {
  recordId: number;
  policies: string[];
  actions: string[];
  overlap: string;
}

export function tieRows(conflicts: ConflictDoc[]): TieRow[] {
  return conflicts
    .filter((c) => c.kind === "Unresolved")
    .map((c) => ({
      recordId: c.id,
      policies: [...c.policies].sort(),
      actions: c.actions.map((a) => a.join(" ")),
      overlap: c.overlap.join(", "),
    }))
    .sort((a, b) => a.recordId - b.recordId);
}

export interface ProposalRow {
  id: string;
  replaces: string;
  findingKind: string;
  rationale: string;
  status: ProposalDoc["status"];
  policyText: string;
}

export function proposalRows(proposals: ProposalDoc[]): ProposalRow[] {
  return proposals
    .map((p) => ({
      id: p.id,
      replaces: p.replaces,
      findingKind: p.finding_kind,
      rationale: p.rationale,
      status: p.status,
      policyText: p.policy_text,
    }))
    .sort((a, b) => a.id.localeCompare(b.id));
}
