// Wire types for the policy-engine service documents.

export interface TreeNodeDoc {
  label: string;
  level: number;
  dimension: string;
  device_count: number;
  values?: string[];
  children?: TreeNodeDoc[];
  devices?: string[];
}

export interface TreeDoc {
  tree: string;
  owner: string;
  root: TreeNodeDoc;
}

export interface TreesDocument {
  snapshot: number;
  trees: TreeDoc[];
}

export interface PolicyEntry {
  id: string;
  author: string;
  variant: string;
  origin_app: string;
  text: string;
}

export interface PoliciesDocument {
  snapshot: number;
  policies: PolicyEntry[];
}

export interface GraphNodeDoc {
  id: string;
  devices: string[];
}

export interface GraphEdgeDoc {
  id: string;
  source: string;
  target: string;
  conditions: string[];
  action: string[];
  policy: string;
}

export interface ConflictDoc {
  id: number;
  kind: "Duplicate" | "Resolved" | "Unresolved";
  policies: string[];
  overlap: string[];
  actions: string[][];
  winner: string;
  rule: string;
}

export interface MaskedDoc {
  id: number;
  policy: string;
  overlap: string[];
  winner: string;
  record: number;
  tie: boolean;
  tombstone: boolean;
}

export interface GraphDocument {
  snapshot: number;
  nodes: GraphNodeDoc[];
  edges: GraphEdgeDoc[];
  islands: string[][];
  conflicts: ConflictDoc[];
  masked: MaskedDoc[];
  policies: string[];
}

export interface FindingDoc {
  kind: string;
  policies: string[];
  evidence: Record<string, unknown>;
  severity?: number;
  rank?: number;
}

export interface FindingsDocument {
  snapshot: number;
  findings: Record<string, FindingDoc[]>;
  sanity: Record<string, { app: string; findings: unknown[] }>;
  validation_errors: Record<string, string[]>;
}

export interface ProposalDoc {
  id: string;
  replaces: string;
  policy_text: string;
  rationale: string;
  status: "Pending" | "Accepted" | "Rejected" | "Obsolete";
  finding_kind: string;
}

export interface ProposalsDocument {
  snapshot: number;
  proposals: ProposalDoc[];
}

export interface Summary {
  snapshot: number;
  policies: number;
  unresolved: number;
  findings: Record<string, number>;
  critical_sanity: number;
}

export interface MutationResponse {
  summary: Summary;
  records?: ConflictDoc[];
  policy?: string;
  record?: ConflictDoc;
  proposal?: ProposalDoc;
}
