"""Security analyses over policies and the composed graph.

Six finding kinds are produced:

* ``Rogue`` — a policy whose author-specified source or target devices fall
  outside the author's own abstraction trees.
* ``Gap`` — an uncovered region of a controlled attribute's domain for the
  device set of a state tree (time of day, numeric ranges, state values).
* ``Chain`` — a path in the trigger graph with more than one trigger-action
  pair: one policy's action satisfies another's trigger.
* ``Loop`` — a chain that re-triggers itself, or one whose re-evaluation
  selects contending actions (toggling); unresolved compile-time conflicts
  with a bounded temporal window also toggle, daily.
* ``PotentialRuntime`` — contradictory-action pairs whose conditions are not
  provably mutually exclusive and that no precedence rule or other finding
  already settles, ranked by severity.
* ``AccessViolation`` — an access grant with no terminating policy or
  condition inside the resource's allowed window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .composition import ComposedGraph, Fragment, action_pair, contradicts
from .cosat import DEFINITE, EXCLUSIVE, ConditionProfile, classify, windows_intersect
from .errors import TooFewPolicies
from .frontends.sanity import SanityReport
from .intervals import MINUTES_PER_DAY, Region, TimeWindow, arcs_complement, arcs_to_windows, arcs_union
from .inventory import InfrastructureDB
from .kmeans import elbow_k, kmeans
from .precedence import TIE, PrecedenceRules
from .trees import AbstractionTree, TreeSet
from .vigraph import VIPolicy
from .vocab import Vocabulary

FINDING_KINDS = ("Rogue", "Gap", "Loop", "Chain", "PotentialRuntime", "AccessViolation")


@dataclass
class Finding:
    kind: str
    policies: tuple[str, ...]
    evidence: dict
    severity: float | None = None
    rank: int | None = None

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "policies": sorted(self.policies), "evidence": self.evidence}
        if self.severity is not None:
            doc["severity"] = round(self.severity, 6)
        if self.rank is not None:
            doc["rank"] = self.rank
        return doc

    def sort_key(self) -> tuple:
        return (self.kind, tuple(sorted(self.policies)))


# ---------------------------------------------------------------------------
# rogue detection
# ---------------------------------------------------------------------------

def detect_rogue(policy: VIPolicy, admin_trees: TreeSet, all_trees: TreeSet) -> Finding | None:
    """Flag a policy whose author-specified nodes lie outside the union of the
    author's trees.  Implied actions added by the engine are not the author's
    doing and are skipped."""
    owned: frozenset[str] = frozenset()
    for tree in admin_trees:
        owned |= tree.device_set()

    offending: dict[str, list[str]] = {}

    def check(ref, role: str):
        try:
            devices = ref.resolve(all_trees, policy.author_admin or None)
        except Exception:
            return
        outside = devices - owned
        if outside:
            offending[role] = sorted(outside)

    check(policy.source, "source")
    check(policy.target, "target")
    for action in policy.action_nodes():
        if action.implied or action.kind != "IotCommand":
            continue
        if action.target is not None:
            check(action.target, f"action:{action.attr}={action.value}")
    if not offending:
        return None
    return Finding(
        kind="Rogue", policies=(policy.policy_id,),
        evidence={"author": policy.author_admin, "outside": offending})


# ---------------------------------------------------------------------------
# gap analysis
# ---------------------------------------------------------------------------

def gap_analysis(graph: ComposedGraph, state_trees: Sequence[AbstractionTree],
                 db: InfrastructureDB, vocab: Vocabulary) -> list[Finding]:
    """Uncovered regions per (state-tree device set, state dimension).

    Coverage comes from live edges commanding devices of the tree: for the
    time dimension, their temporal windows (event-only edges keep no schedule
    and do not cover); for numeric dimensions, explicit conditions on the
    attribute plus setpoint commands, which hold the attribute up to their
    target value; for enumerated dimensions, explicit condition values.
    Findings name the policies whose explicit conditions bound the coverage,
    including masked ones, so administrators see the full context."""
    findings: list[Finding] = []
    for tree in state_trees:
        attr = tree.state_dimension
        if attr is None:
            continue
        scope = tree.device_set()
        live = [e.fragment for e in graph.live_edges()
                if e.fragment.action_key[0] == "cmd" and e.fragment.target & scope]
        masked = [m.fragment for m in graph.active_masked()
                  if m.fragment.action_key[0] == "cmd" and m.fragment.target & scope]

        if attr == "time":
            windows = [w for frag in live for w in frag.profile.windows]
            covered = arcs_union(windows)
            gaps = arcs_to_windows(arcs_complement(covered))
            names = sorted({f.policy_id for f in live + masked if f.profile.windows})
            if gaps and names:
                findings.append(Finding(
                    kind="Gap", policies=tuple(names),
                    evidence={
                        "attribute": "time",
                        "devices": sorted(scope),
                        "uncovered": [str(w) for w in gaps],
                        "covered": [str(w) for w in arcs_to_windows(covered)],
                    }))
            continue

        domain = db.attribute_domain(attr)
        if domain is None:
            continue
        if domain.kind == "range":
            interval = domain.interval()
            covered_region = Region.empty()
            names = set()
            for frag in live:
                if attr in frag.profile.numeric:
                    covered_region = covered_region.union(frag.profile.numeric[attr])
                if attr in frag.profile.setpoints:
                    covered_region = covered_region.union(
                        Region.span(interval.lo, frag.profile.setpoints[attr],
                                    interval.lo_closed, True))
            for frag in live + masked:
                if attr in frag.profile.numeric and attr not in frag.profile.translated:
                    names.add(frag.policy_id)
            gaps_region = covered_region.complement_within(interval)
            if not gaps_region.is_empty() and (live or masked):
                findings.append(Finding(
                    kind="Gap", policies=tuple(sorted(names)) or _all_names(live + masked),
                    evidence={
                        "attribute": attr,
                        "devices": sorted(scope),
                        "uncovered": [str(iv) for iv in gaps_region.intervals],
                        "covered": [str(iv) for iv in covered_region.intervals],
                    }))
        else:
            covered_values: set[str] = set()
            names = set()
            for frag in live:
                if attr in frag.profile.values:
                    covered_values |= frag.profile.values[attr]
            for frag in live + masked:
                if attr in frag.profile.values and attr not in frag.profile.translated:
                    names.add(frag.policy_id)
            uncovered = domain.values - covered_values
            if uncovered and (live or masked):
                findings.append(Finding(
                    kind="Gap", policies=tuple(sorted(names)) or _all_names(live + masked),
                    evidence={
                        "attribute": attr,
                        "devices": sorted(scope),
                        "uncovered": sorted(uncovered),
                        "covered": sorted(covered_values),
                    }))
    return findings


def _all_names(fragments: Iterable[Fragment]) -> tuple[str, ...]:
    return tuple(sorted({f.policy_id for f in fragments}))


def coverage_partition(graph: ComposedGraph, tree: AbstractionTree,
                       db: InfrastructureDB, vocab: Vocabulary) -> tuple:
    """(covered, gaps) views used by the partition property tests."""
    attr = tree.state_dimension
    scope = tree.device_set()
    live = [e.fragment for e in graph.live_edges()
            if e.fragment.action_key[0] == "cmd" and e.fragment.target & scope]
    if attr == "time":
        covered = arcs_union([w for f in live for w in f.profile.windows])
        return covered, arcs_complement(covered)
    domain = db.attribute_domain(attr)
    if domain.kind == "range":
        interval = domain.interval()
        region = Region.empty()
        for frag in live:
            if attr in frag.profile.numeric:
                region = region.union(frag.profile.numeric[attr])
            if attr in frag.profile.setpoints:
                region = region.union(Region.span(interval.lo, frag.profile.setpoints[attr],
                                                  interval.lo_closed, True))
        return region, region.complement_within(interval)
    covered_values = set()
    for frag in live:
        if attr in frag.profile.values:
            covered_values |= frag.profile.values[attr]
    return covered_values, domain.values - covered_values


# ---------------------------------------------------------------------------
# chains and loops
# ---------------------------------------------------------------------------

def _policy_fragments(graph: ComposedGraph) -> dict[str, list[Fragment]]:
    return {pid: norm.fragments for pid, norm in graph.policies.items()}


def _state_changing(fragments: list[Fragment]) -> bool:
    return any(f.action_key[0] in ("cmd", "acl") for f in fragments)


def _effects_of(fragments: list[Fragment], vocab: Vocabulary) -> list[tuple[str, str, frozenset[str]]]:
    out = []
    for frag in fragments:
        if frag.action_key[0] != "cmd":
            continue
        attr, value = frag.action_key[1], frag.action_key[2]
        out.append((attr, value, frag.target))
        for eff in vocab.command_effects(attr, value):
            out.append((eff.attr, eff.value, frag.target))
    return out


def _condition_satisfied_by(profile: ConditionProfile, attr: str, value: str) -> bool:
    if attr in profile.values:
        return value in profile.values[attr]
    if attr in profile.numeric:
        try:
            return profile.numeric[attr].contains(float(value))
        except ValueError:
            return False
    return False


def detect_loops(graph: ComposedGraph, vocab: Vocabulary,
                 prec: PrecedenceRules) -> list[Finding]:
    fragments = _policy_fragments(graph)
    profiles = {pid: norm.fragments[0].profile if norm.fragments else ConditionProfile(pid)
                for pid, norm in graph.policies.items()}
    sources = {pid: norm.source_devices for pid, norm in graph.policies.items()}
    statically_recorded = {
        frozenset(c.policies) for c in graph.conflicts if c.kind in ("Resolved", "Unresolved")
    }

    # trigger edges: P's effect satisfies Q's explicit condition on overlapping devices
    edges: dict[str, list[str]] = {}
    for pid_p, frags_p in sorted(fragments.items()):
        if not _state_changing(frags_p):
            continue
        effects = _effects_of(frags_p, vocab)
        for pid_q, frags_q in sorted(fragments.items()):
            if pid_q == pid_p or not _state_changing(frags_q):
                continue
            if frozenset((pid_p, pid_q)) in statically_recorded:
                continue
            profile_q = profiles[pid_q]
            if not windows_intersect(profiles[pid_p].windows, profile_q.windows):
                continue
            for attr, value, devices in effects:
                if attr in profile_q.translated:
                    continue
                if devices & sources[pid_q] and _condition_satisfied_by(profile_q, attr, value):
                    edges.setdefault(pid_p, []).append(pid_q)
                    break

    findings: list[Finding] = []
    seen_sets: set[frozenset[str]] = set()

    # cycles: an action re-triggers an event earlier in the chain
    cycles = _find_cycles(edges)
    for cycle in cycles:
        key = frozenset(cycle)
        if key not in seen_sets:
            seen_sets.add(key)
            findings.append(Finding(
                kind="Loop", policies=tuple(sorted(key)),
                evidence={"cycle": cycle, "toggling": False}))

    # chains: maximal trigger paths; togglers upgrade a chain to a loop
    for path in _maximal_paths(edges):
        if frozenset(path) in seen_sets:
            continue
        togglers = _togglers_for_chain(path, graph, vocab, prec, statically_recorded)
        members = frozenset(path) | set(togglers)
        if members in seen_sets:
            continue
        seen_sets.add(members)
        if togglers:
            findings.append(Finding(
                kind="Loop", policies=tuple(sorted(members)),
                evidence={"chain": path, "togglers": sorted(togglers), "toggling": True}))
        else:
            findings.append(Finding(
                kind="Chain", policies=tuple(sorted(members)),
                evidence={"chain": path, "toggling": False}))

    # unresolved compile-time contradictions re-fire on a daily clock when a
    # bounded temporal window is involved: report the toggling loop
    for record in graph.active_conflicts("Unresolved"):
        pair = frozenset(record.policies)
        if pair in seen_sets:
            continue
        windows = []
        for pid in record.policies:
            windows.extend(profiles.get(pid, ConditionProfile(pid)).windows)
        if windows:
            seen_sets.add(pair)
            findings.append(Finding(
                kind="Loop", policies=tuple(sorted(pair)),
                evidence={"conflict_record": record.record_id, "toggling": True,
                          "windows": [str(w) for w in windows]}))

    findings.sort(key=lambda f: f.sort_key())
    return findings


def _find_cycles(edges: dict[str, list[str]]) -> list[list[str]]:
    cycles: list[list[str]] = []
    seen: set[frozenset[str]] = set()

    def dfs(start: str, node: str, path: list[str]):
        for nxt in sorted(edges.get(node, [])):
            if nxt == start and len(path) > 1:
                key = frozenset(path)
                if key not in seen:
                    seen.add(key)
                    cycles.append(path + [start])
            elif nxt not in path:
                dfs(start, nxt, path + [nxt])

    for start in sorted(edges):
        dfs(start, start, [start])
    return cycles


def _maximal_paths(edges: dict[str, list[str]]) -> list[list[str]]:
    all_nodes = set(edges) | {q for qs in edges.values() for q in qs}
    has_incoming = {q for qs in edges.values() for q in qs}
    roots = sorted(n for n in all_nodes if n not in has_incoming and n in edges)
    paths: list[list[str]] = []

    def extend(node: str, path: list[str]):
        nexts = [q for q in sorted(set(edges.get(node, []))) if q not in path]
        if not nexts:
            if len(path) >= 2:
                paths.append(path)
            return
        for nxt in nexts:
            extend(nxt, path + [nxt])

    for root in roots:
        extend(root, [root])
    return paths


def _togglers_for_chain(path: list[str], graph: ComposedGraph, vocab: Vocabulary,
                        prec: PrecedenceRules,
                        statically_recorded: set[frozenset[str]]) -> list[str]:
    """Policies outside the chain whose actions contend with a chain member's
    action on the same devices, with no precedence resolution, and whose
    conditions definitely co-satisfy the chain's activation context."""
    fragments = _policy_fragments(graph)
    context = ConditionProfile(policy_id="+".join(path))
    established: dict[str, str] = {}
    for pid in path:
        prof = fragments[pid][0].profile if fragments[pid] else None
        if prof is None:
            continue
        context.windows.extend(prof.windows)
        for attr, region in prof.numeric.items():
            context.numeric[attr] = context.numeric[attr].intersect(region) \
                if attr in context.numeric else region
        for attr, vals in prof.values.items():
            context.values[attr] = (context.values[attr] & vals) \
                if attr in context.values else vals
        context.translated |= prof.translated
        established.update(prof.facts)
    # states the chain itself brings about are facts, not open conditions
    for attr in established:
        context.values.pop(attr, None)
        context.numeric.pop(attr, None)
    context.facts.update(established)
    member_cmds = [
        (pid, frag) for pid in path for frag in fragments.get(pid, [])
        if frag.action_key[0] == "cmd"
    ]
    togglers: list[str] = []
    for pid_t, frags_t in sorted(fragments.items()):
        if pid_t in path:
            continue
        for frag_t in frags_t:
            if frag_t.action_key[0] != "cmd":
                continue
            hit = False
            for pid_m, frag_m in member_cmds:
                if frozenset((pid_t, pid_m)) in statically_recorded:
                    continue
                if not contradicts(frag_t.action_key, frag_m.action_key, vocab):
                    continue
                if not (frag_t.target & frag_m.target):
                    continue
                if prec.compare(frag_t.author, frag_m.author,
                                action_pair(frag_t.action_key), action_pair(frag_m.action_key),
                                frag_t.tags, frag_m.tags) != TIE:
                    continue
                if classify(frag_t.profile, context, vocab, graph.controlled_attrs) != DEFINITE:
                    continue
                hit = True
                break
            if hit:
                togglers.append(pid_t)
                break
    return sorted(set(togglers))


# ---------------------------------------------------------------------------
# potential run-time conflicts
# ---------------------------------------------------------------------------

@dataclass
class SeverityModel:
    w_missing_temporal: float = 0.4
    w_sanity: float = 0.3
    w_proximity: float = 0.3


def encode_policies(profiles: Mapping[str, ConditionProfile], db: InfrastructureDB,
                    n_time_bins: int = 6, n_value_bins: int = 6) -> tuple[list[str], np.ndarray]:
    """Fixed-length binary encodings of policy activation regions: temporal
    bins, discretized numeric attribute bins, one-hot enumerated values."""
    ids = sorted(profiles)
    numeric_attrs = sorted({a for p in profiles.values() for a in p.numeric})
    enum_attrs: dict[str, list[str]] = {}
    for prof in profiles.values():
        for attr, vals in prof.values.items():
            enum_attrs.setdefault(attr, [])
            for v in sorted(vals):
                if v not in enum_attrs[attr]:
                    enum_attrs[attr].append(v)
    for vals in enum_attrs.values():
        vals.sort()

    width = n_time_bins + n_value_bins * len(numeric_attrs) + sum(len(v) for v in enum_attrs.values())
    points = np.zeros((len(ids), max(width, 1)), dtype=float)
    bin_minutes = MINUTES_PER_DAY // n_time_bins
    for row, pid in enumerate(ids):
        prof = profiles[pid]
        col = 0
        for b in range(n_time_bins):
            window = TimeWindow(b * bin_minutes, (b + 1) * bin_minutes if b < n_time_bins - 1 else 0)
            if not prof.windows:
                pass
            elif any(w.intersects(window) for w in prof.windows):
                points[row, col + b] = 1.0
        col += n_time_bins
        for attr in numeric_attrs:
            domain = db.attribute_domain(attr)
            lo, hi = (domain.lo, domain.hi) if domain and domain.kind == "range" else (0.0, 100.0)
            if attr in prof.numeric and hi > lo:
                step = (hi - lo) / n_value_bins
                for b in range(n_value_bins):
                    bin_region = Region.span(lo + b * step, lo + (b + 1) * step)
                    if not prof.numeric[attr].intersect(bin_region).is_empty():
                        points[row, col + b] = 1.0
            col += n_value_bins
        for attr in sorted(enum_attrs):
            values = enum_attrs[attr]
            if attr in prof.values:
                for j, v in enumerate(values):
                    if v in prof.values[attr]:
                        points[row, col + j] = 1.0
            col += len(values)
    return ids, points


def detect_potential(policies: Sequence[VIPolicy], graph: ComposedGraph,
                     sanity: Mapping[str, SanityReport], prec: PrecedenceRules,
                     vocab: Vocabulary, db: InfrastructureDB,
                     loop_findings: Sequence[Finding] = (),
                     model: SeverityModel | None = None,
                     seed: int = 0) -> list[Finding]:
    """Contradictory pairs that nothing else settles, ranked by severity."""
    if len(policies) < 2:
        raise TooFewPolicies(len(policies))
    model = model or SeverityModel()
    fragments = _policy_fragments(graph)
    profiles = {pid: (frags[0].profile if frags else ConditionProfile(pid))
                for pid, frags in fragments.items()}
    recorded = {frozenset(c.policies) for c in graph.conflicts
                if c.kind in ("Resolved", "Unresolved", "Duplicate")}
    covered_by_structure = [set(f.policies) for f in loop_findings]

    candidates: list[tuple[str, str, Fragment, Fragment]] = []
    pids = sorted(fragments)
    for i, pid_a in enumerate(pids):
        for pid_b in pids[i + 1:]:
            pair = frozenset((pid_a, pid_b))
            if pair in recorded:
                continue
            if any(pair <= group for group in covered_by_structure):
                continue
            hit = None
            for fa in fragments[pid_a]:
                for fb in fragments[pid_b]:
                    if fa.action_key[0] == "notify" or fb.action_key[0] == "notify":
                        continue
                    if not contradicts(fa.action_key, fb.action_key, vocab):
                        continue
                    if fa.action_key[0] == "acl" and not (fa.source & fb.source):
                        continue
                    if not (fa.target & fb.target):
                        continue
                    if classify(fa.profile, fb.profile, vocab, graph.controlled_attrs) == EXCLUSIVE:
                        continue
                    if prec.compare(fa.author, fb.author, action_pair(fa.action_key),
                                    action_pair(fb.action_key), fa.tags, fb.tags) != TIE:
                        continue
                    hit = (fa, fb)
                    break
                if hit:
                    break
            if hit:
                candidates.append((pid_a, pid_b, hit[0], hit[1]))

    if not candidates:
        return []

    ids, points = encode_policies(profiles, db)
    index = {pid: i for i, pid in enumerate(ids)}
    k = elbow_k(points, k_max=min(10, len(ids)), seed=seed)
    labels, _, _ = kmeans(points, k, seed=seed)
    dists = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    max_dist = float(dists.max()) or 1.0

    origin = {p.policy_id: p.origin_app for p in policies}
    findings: list[Finding] = []
    for pid_a, pid_b, fa, fb in candidates:
        ia, ib = index[pid_a], index[pid_b]
        norm_dist = float(dists[ia, ib]) / max_dist
        missing_temporal = 1.0 if not (profiles[pid_a].windows or profiles[pid_b].windows) else 0.0
        crits = 0
        for pid in (pid_a, pid_b):
            report = sanity.get(origin.get(pid, ""), None)
            if report is not None:
                crits += len(report.critical)
        score = (model.w_missing_temporal * missing_temporal
                 + model.w_sanity * float(crits)
                 + model.w_proximity * (1.0 - norm_dist))
        findings.append(Finding(
            kind="PotentialRuntime", policies=(pid_a, pid_b),
            evidence={
                "actions": [list(fa.action_key), list(fb.action_key)],
                "devices": sorted(fa.target & fb.target),
                "same_cluster": bool(labels[ia] == labels[ib]),
                "cluster_distance": round(norm_dist, 6),
                "missing_temporal": bool(missing_temporal),
                "critical_sanity": crits,
            },
            severity=score))

    # standardized score ranking with a deterministic tie-break
    scores = np.array([f.severity for f in findings], dtype=float)
    std = scores.std()
    zscores = (scores - scores.mean()) / std if std > 1e-12 else np.zeros_like(scores)
    for finding, z in zip(findings, zscores):
        finding.evidence["zscore"] = round(float(z), 6)
    findings.sort(key=lambda f: (-(f.severity or 0.0), tuple(sorted(f.policies))))
    for rank, finding in enumerate(findings, start=1):
        finding.rank = rank
    return findings


# ---------------------------------------------------------------------------
# access violations
# ---------------------------------------------------------------------------

def detect_access_violations(policies: Sequence[VIPolicy], graph: ComposedGraph,
                             db: InfrastructureDB, vocab: Vocabulary) -> list[Finding]:
    """Grants (ALLOW ACLs, unlocking/enabling commands) on resources that
    declare an access window, with nothing that closes the grant in time."""
    fragments = _policy_fragments(graph)
    findings: list[Finding] = []
    for pid in sorted(fragments):
        for frag in fragments[pid]:
            grant = _is_grant(frag, vocab)
            if not grant:
                continue
            annotated = {
                d for d in frag.target
                if (dev := db.get(d)) is not None and dev.access_window_minutes is not None
            }
            if not annotated:
                continue
            window_limit = min(db.get(d).access_window_minutes for d in annotated)
            if _self_terminating(frag, window_limit):
                continue
            if _has_revoker(frag, fragments, vocab):
                continue
            findings.append(Finding(
                kind="AccessViolation", policies=(pid,),
                evidence={
                    "devices": sorted(annotated),
                    "window_minutes": window_limit,
                    "grant": list(frag.action_key),
                }))
    findings.sort(key=lambda f: f.sort_key())
    return findings


def _is_grant(frag: Fragment, vocab: Vocabulary) -> bool:
    if frag.action_key[0] == "acl" and frag.action_key[1] == "ALLOW":
        return True
    if frag.action_key[0] == "cmd":
        return (frag.action_key[1], frag.action_key[2]) in vocab.grants
    return False


def _self_terminating(frag: Fragment, window_limit: int) -> bool:
    for window in frag.profile.windows:
        arcs = window.arcs()
        duration = sum(hi - lo for lo, hi in arcs)
        if duration <= window_limit:
            return True
    return False


def _has_revoker(frag: Fragment, fragments: Mapping[str, list[Fragment]],
                 vocab: Vocabulary) -> bool:
    for pid, frags in fragments.items():
        if pid == frag.policy_id:
            continue
        for other in frags:
            if not (other.target & frag.target):
                continue
            if frag.action_key[0] == "acl":
                if other.action_key[0] == "acl" and other.action_key[1] != "ALLOW" \
                        and (other.source & frag.source):
                    return True
            elif other.action_key[0] == "cmd" and other.action_key[1] == frag.action_key[1] \
                    and other.action_key[2] != frag.action_key[2]:
                return True
    return False
