// View state: one snapshot-gated store.  Nothing mutates locally; every
// transition comes from a service response, and stale mutations trigger a
// refetch instead of a blind retry.

import { ApiClient, StaleSnapshotError } from "./api.js";
import type {
  FindingsDocument,
  GraphDocument,
  PoliciesDocument,
  ProposalsDocument,
  Summary,
  TreesDocument,
} from "./types.js";

export interface Snapshot {
  summary: Summary;
  trees: TreesDocument;
  policies: PoliciesDocument;
  graph: GraphDocument;
  findings: FindingsDocument;
  proposals: ProposalsDocument;
}

export type Listener = (snapshot: Snapshot) => void;

export class Store {
  private snapshot: Snapshot | null = null;
  private listeners: Listener[] = [];

  constructor(private client: ApiClient) {}

  current(): Snapshot {
    if (!this.snapshot) throw new Error("store not loaded yet");
    return this.snapshot;
  }

  get snapshotId(): number {
    return this.snapshot?.summary.snapshot ?? -1;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  async refresh(): Promise<Snapshot> {
    const [summary, trees, policies, graph, findings, proposals] = await Promise.all([
      this.client.summary(),
      this.client.trees(),
      this.client.policies(),
      this.client.graph(),
      this.client.findings(),
      this.client.proposals(),
    ]);
    this.snapshot = { summary, trees, policies, graph, findings, proposals };
    for (const listener of this.listeners) listener(this.snapshot);
    return this.snapshot;
  }

  // Run a mutation against the current snapshot; on staleness, refetch once
  // and surface the conflict to the caller for a deliberate retry.
  async mutate<T>(action: (client: ApiClient, snapshot: number) => Promise<T>): Promise<T> {
    try {
      const result = await action(this.client, this.snapshotId);
      await this.refresh();
      return result;
    } catch (error) {
      if (error instanceof StaleSnapshotError) {
        await this.refresh();
      }
      throw error;
    }
  }

  addPolicy(text: string) {
    return this.mutate((client, snapshot) => client.addPolicy(text, snapshot));
  }

  removePolicy(policyId: string) {
    return this.mutate((client, snapshot) => client.removePolicy(policyId, snapshot));
  }

  resolveConflict(recordId: number, winner: string) {
    return this.mutate((client) => client.resolveConflict(recordId, winner));
  }

  acceptProposal(proposalId: string) {
    return this.mutate((client) => client.acceptProposal(proposalId));
  }

  rejectProposal(proposalId: string) {
    return this.mutate((client) => client.rejectProposal(proposalId));
  }
}
