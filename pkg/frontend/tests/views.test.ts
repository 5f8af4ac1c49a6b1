import { describe, expect, it } from "vitest";

import { pickOptions, serializeDraft, validateDraft } from "../src/builder.js";
import { layoutGraph, tieRows, treeRows, triageRows } from "../src/views.js";
import type { FindingsDocument, GraphDocument, TreeDoc } from "../src/types.js";

const TREE: TreeDoc = {
  tree: "Home",
  owner: "parent",
  root: {
    label: "Home", level: 0, dimension: "root", device_count: 3,
    children: [
      { label: "Floor1", level: 1, dimension: "floors", device_count: 2,
        children: [
          { label: "cam-1", level: 2, dimension: "devices", device_count: 1, devices: ["cam-1"] },
          { label: "cam-2", level: 2, dimension: "devices", device_count: 1, devices: ["cam-2"] },
        ] },
      { label: "Floor2", level: 1, dimension: "floors", device_count: 1,
        children: [
          { label: "lock-1", level: 2, dimension: "devices", device_count: 1, devices: ["lock-1"] },
        ] },
    ],
  },
};

describe("tree browser", () => {
  it("collapses levels until expanded and shows leaf counts", () => {
    const collapsed = treeRows(TREE, new Set());
    expect(collapsed.map((r) => r.label)).toEqual(["Home"]);
    expect(collapsed[0].leafCount).toBe(3);
    expect(collapsed[0].expandable).toBe(true);

    const open = treeRows(TREE, new Set(["Home", "Home/Floor1"]));
    expect(open.map((r) => r.label)).toEqual(["Home", "Floor1", "cam-1", "cam-2", "Floor2"]);
    expect(open[1].leafCount).toBe(2);
  });

  it("renders a root-only tree as a single row", () => {
    const lonely: TreeDoc = {
      tree: "Empty", owner: "x",
      root: { label: "Empty", level: 0, dimension: "root", device_count: 0 },
    };
    const rows = treeRows(lonely, new Set(["Empty"]));
    expect(rows).toHaveLength(1);
    expect(rows[0].expandable).toBe(false);
  });
});

describe("policy builder", () => {
  it("offers picks from the administrator's own trees only", () => {
    const other: TreeDoc = { ...TREE, tree: "Climate", owner: "hvac" };
    const options = pickOptions([TREE, other], "parent");
    expect(options.every((o) => o.tree === "Home")).toBe(true);
    expect(options.some((o) => o.pick.labels.join("/") === "Home/Floor1")).toBe(true);
  });

  it("serializes a night-lock draft into the policy syntax", () => {
    const text = serializeDraft({
      id: "s3-ui",
      admin: "parent",
      source: { keyword: "device-types", labels: ["OuterDoorsWindows"] },
      target: { keyword: "device-types", labels: ["OuterDoorsWindows"] },
      conditions: [{ kind: "time", window: "22:00-07:00" }],
      actions: [{ attr: "lock_state", value: "locked" }],
    });
    expect(text).toContain('policy{"s3-ui"} @admin{"parent"}');
    expect(text).toContain('time{"22:00-07:00"}');
    expect(text).toContain("iot-commands-action{lock_state=locked}");
    expect(text.trim().endsWith('target-node{device-types{"OuterDoorsWindows"}}')).toBe(true);
  });

  it("rejects drafts without an action inline", () => {
    const problems = validateDraft({
      id: "x", admin: "a",
      source: { keyword: "devices", labels: ["d1"] },
      target: { keyword: "devices", labels: ["d1"] },
      conditions: [], actions: [],
    });
    expect(problems).toContain("add at least one action");
    expect(() => serializeDraft({
      id: "x", admin: "a",
      source: { keyword: "devices", labels: ["d1"] },
      target: { keyword: "devices", labels: ["d1"] },
      conditions: [], actions: [],
    })).toThrow(/incomplete/);
  });
});

const GRAPH: GraphDocument = {
  snapshot: 1,
  nodes: [
    { id: "n0", devices: ["a", "b"] },
    { id: "n1", devices: ["c"] },
    { id: "n2", devices: ["d"] },
  ],
  edges: [
    { id: "e1", source: "n0", target: "n1", conditions: [], action: ["cmd", "p", "on"], policy: "p1" },
    { id: "e2", source: "n2", target: "n2", conditions: [], action: ["cmd", "p", "off"], policy: "p2" },
  ],
  islands: [["a", "b", "c"], ["d"]],
  conflicts: [
    { id: 1, kind: "Unresolved", policies: ["p1", "p2"], overlap: ["c"],
      actions: [["cmd", "p", "on"], ["cmd", "p", "off"]], winner: "", rule: "" },
    { id: 2, kind: "Resolved", policies: ["p1", "p3"], overlap: ["a"],
      actions: [["cmd", "p", "on"], ["cmd", "p", "off"]], winner: "p1", rule: "admin" },
  ],
  masked: [],
  policies: ["p1", "p2"],
};

describe("graph layout", () => {
  it("is deterministic for the same document", () => {
    expect(layoutGraph(GRAPH)).toEqual(layoutGraph(GRAPH));
  });

  it("separates islands into distinct groups", () => {
    const layout = layoutGraph(GRAPH);
    expect(layout.islands).toBe(2);
    const islandOf = new Map(layout.nodes.map((n) => [n.id, n.island]));
    expect(islandOf.get("n0")).toBe(islandOf.get("n1"));
    expect(islandOf.get("n0")).not.toBe(islandOf.get("n2"));
  });
});

describe("triage", () => {
  it("lists ties with both resolution choices", () => {
    const ties = tieRows(GRAPH.conflicts);
    expect(ties).toHaveLength(1);
    expect(ties[0].policies).toEqual(["p1", "p2"]);
    expect(ties[0].recordId).toBe(1);
  });

  it("orders ranked findings by rank and carries the evidence payload", () => {
    const findings: FindingsDocument = {
      snapshot: 1,
      findings: {
        Gap: [{ kind: "Gap", policies: ["s12", "s5"],
                evidence: { attribute: "time", uncovered: ["21:00-09:00"] } }],
        PotentialRuntime: [
          { kind: "PotentialRuntime", policies: ["a", "b"], severity: 0.5, rank: 2,
            evidence: { cluster_distance: 0.4 } },
          { kind: "PotentialRuntime", policies: ["c", "d"], severity: 0.9, rank: 1,
            evidence: { cluster_distance: 0.1 } },
        ],
      },
      sanity: {}, validation_errors: {},
    };
    const rows = triageRows(findings);
    expect(rows[0].policies).toBe("c, d");
    expect(rows[1].policies).toBe("a, b");
    expect(rows[2].kind).toBe("Gap");
    expect(rows[2].summary).toContain("21:00-09:00");
    expect(rows[2].evidence).toEqual({ attribute: "time", uncovered: ["21:00-09:00"] });
  });
});
