// Service round-trip: driving the dashboard client through build-S3,
// resolve-a-planted-ACL-tie, and accept-a-proposal must leave the service in
// exactly the state the equivalent engine-side mutation sequence produces.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, execFileSync, spawn } from "node:child_process";
import { cpSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ApiClient } from "../src/api.js";
import { Store } from "../src/state.js";
import { pickOptions, serializeDraft } from "../src/builder.js";
import { maskedRows, tieRows } from "../src/views.js";

const PORT = 8765 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

// endpoints no MUD profile covers, so exactly one conflict arises
const TIE_ALLOW = [
  'policy{"tie-allow"} @admin{"guest1"} :',
  '    source-node{devices{"motion-living"}} => target-node{devices{"siren-main"}}',
  '    . traffic-type{"alerts"}',
].join("\n");
const TIE_DENY = [
  'policy{"tie-deny"} @admin{"guest2"} :',
  '    source-node{devices{"motion-living"}} !=> target-node{devices{"siren-main"}}',
  '    . traffic-type{"alerts"}',
].join("\n");

let projectDir: string;
let server: ChildProcess | undefined;

function corpusPath(): string {
  return execFileSync(
    "python3", ["-c", "import policyweave; print(policyweave.corpus_path())"],
    { encoding: "utf-8" }).trim();
}

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const response = await fetch(`${BASE}/summary`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  projectDir = mkdtempSync(join(tmpdir(), "pw-ui-"));
  cpSync(corpusPath(), projectDir, { recursive: true });
  // plant a precedence configuration under which ALLOW vs DENY is a true tie:
  // guest1/guest2 are unordered and the stock ACL action order is overridden
  const precedence = JSON.parse(readFileSync(join(projectDir, "precedence.json"), "utf-8"));
  precedence.action_order = [
    [{ attr: "acl", value: "QUARANTINE" }, { attr: "acl", value: "REDIRECT" }],
  ];
  writeFileSync(join(projectDir, "precedence.json"), JSON.stringify(precedence));
  server = spawn("policyweave",
    ["serve", "--config", join(projectDir, "project.json"), "--port", String(PORT)],
    { stdio: "ignore" });
  await waitForService();
}, 120_000);

afterAll(() => {
  server?.kill();
  rmSync(projectDir, { recursive: true, force: true });
});

describe("dashboard round-trip against the live service", () => {
  it("matches the engine-side mutation sequence state for state", async () => {
    const store = new Store(new ApiClient(BASE));
    await store.refresh();

    // 1. plant the ACL tie
    await store.addPolicy(TIE_ALLOW);
    const denyResponse = await store.addPolicy(TIE_DENY);
    const tie = (denyResponse.records ?? []).find(
      (r) => r.kind === "Unresolved"
        && [...r.policies].sort().join() === "tie-allow,tie-deny");
    expect(tie, "planted ACL pair must raise an unresolved tie").toBeDefined();

    // 2. build the night-lock policy in the builder from parent-owned picks
    const options = pickOptions(store.current().trees.trees, "parent");
    const outer = options.find((o) => o.pick.labels.join("/") === "OuterDoorsWindows");
    expect(outer).toBeDefined();
    const draftText = serializeDraft({
      id: "s3-ui",
      admin: "parent",
      source: outer!.pick,
      target: outer!.pick,
      conditions: [{ kind: "time", window: "22:00-07:00" }],
      actions: [{ attr: "lock_state", value: "locked" }],
    });
    await store.addPolicy(draftText);
    expect(store.current().policies.policies.map((p) => p.id)).toContain("s3-ui");

    // 3. resolve the planted tie choosing DENY; the masked ALLOW fragment
    //    must be visible in the graph view afterwards
    const tiesBefore = tieRows(store.current().graph.conflicts);
    expect(tiesBefore.some((t) => t.recordId === tie!.id)).toBe(true);
    await store.resolveConflict(tie!.id, "tie-deny");
    const masked = maskedRows(store.current().graph);
    expect(masked.some((m) => m.policy === "tie-allow" && m.winner === "tie-deny")).toBe(true);

    // 4. accept one inferred proposal (the thermostat schedule gap)
    const pending = store.current().proposals.proposals
      .filter((p) => p.status === "Pending" && p.finding_kind === "Gap");
    expect(pending.length).toBeGreaterThan(0);
    const accepted = await store.acceptProposal(pending[0].id);
    expect(accepted.proposal?.status).toBe("Accepted");

    // 5. the equivalent engine-side (CLI) mutation sequence
    const script = `
import json, sys
from policyweave.engine import Engine, ProjectConfig

engine = Engine(ProjectConfig.load(${JSON.stringify(join(projectDir, "project.json"))})).run()
engine.add_policy(${JSON.stringify(TIE_ALLOW)})
response = engine.add_policy(${JSON.stringify(TIE_DENY)})
tie = next(r for r in response["records"]
           if r["kind"] == "Unresolved" and sorted(r["policies"]) == ["tie-allow", "tie-deny"])
engine.add_policy(${JSON.stringify(draftText)})
engine.resolve_tie(tie["id"], "tie-deny")
pending = [p for p in engine.proposals_document()["proposals"]
           if p["status"] == "Pending" and p["finding_kind"] == "Gap"]
engine.accept_proposal(pending[0]["id"])
print(json.dumps({
    "summary": engine.summary(),
    "graph": engine.graph_document(),
    "findings": engine.findings_document(),
    "proposals": engine.proposals_document(),
}))
`;
    const mirror = JSON.parse(execFileSync("python3", ["-c", script], {
      encoding: "utf-8", maxBuffer: 64 * 1024 * 1024,
    }));

    // 6. snapshot diff: the service state equals the engine-side state
    await store.refresh();
    const state = store.current();
    expect(state.summary).toEqual(mirror.summary);
    expect(state.graph).toEqual(mirror.graph);
    expect(state.findings).toEqual(mirror.findings);
    expect(state.proposals).toEqual(mirror.proposals);
  }, 120_000);

  it("rejects stale mutations and recovers by refetching", async () => {
    const client = new ApiClient(BASE);
    const store = new Store(client);
    await store.refresh();
    // stale snapshot id must be rejected with 409 and surfaced as staleness
    await expect(client.addPolicy(TIE_ALLOW, -5)).rejects.toThrowError(/stale/);
    // the store recovers: a fresh mutation based on the refreshed snapshot works
    const before = store.snapshotId;
    const response = await store.addPolicy(
      TIE_ALLOW.replace("tie-allow", "tie-allow-2").replace("guest1", "guest9"));
    expect(response.summary.snapshot).toBeGreaterThan(before);
  }, 60_000);
});
