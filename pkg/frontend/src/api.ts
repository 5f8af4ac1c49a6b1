// Typed client for the policy-engine service.  Every mutation carries the
// snapshot id it was computed against; a 409 means the view is stale and the
// caller must refetch before retrying.

import type {
  FindingsDocument,
  GraphDocument,
  MutationResponse,
  PoliciesDocument,
  ProposalsDocument,
  Summary,
  TreesDocument,
} from "./types.js";

export class StaleSnapshotError extends Error {
  constructor() {
    super("snapshot is stale; refetch and retry");
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(private baseUrl: string,
              private fetchImpl: typeof fetch = fetch) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body ?? {}),
    });
    if (response.status === 409) {
      throw new StaleSnapshotError();
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  summary(): Promise<Summary> {
    return this.get("/summary");
  }

  trees(): Promise<TreesDocument> {
    return this.get("/trees");
  }

  policies(): Promise<PoliciesDocument> {
    return this.get("/policies");
  }

  graph(): Promise<GraphDocument> {
    return this.get("/graph");
  }

  findings(): Promise<FindingsDocument> {
    return this.get("/findings");
  }

  proposals(): Promise<ProposalsDocument> {
    return this.get("/proposals");
  }

  addPolicy(text: string, snapshot?: number): Promise<MutationResponse> {
    return this.post("/policies", snapshot === undefined ? { text } : { text, snapshot });
  }

  removePolicy(policyId: string, snapshot?: number): Promise<MutationResponse> {
    return this.post(`/policies/${encodeURIComponent(policyId)}/remove`,
      snapshot === undefined ? {} : { snapshot });
  }

  resolveConflict(recordId: number, winner: string): Promise<MutationResponse> {
    return this.post(`/conflicts/${recordId}/resolve`, { winner });
  }

  acceptProposal(proposalId: string): Promise<MutationResponse> {
    return this.post(`/proposals/${encodeURIComponent(proposalId)}/accept`, {});
  }

  rejectProposal(proposalId: string): Promise<MutationResponse> {
    return this.post(`/proposals/${encodeURIComponent(proposalId)}/reject`, {});
  }
}
