"""Reconciliation: translate the conflict-free composed graph back into
device-specific rules, place them evenly across capable devices, and draft
strawman policy proposals for findings.

Policies that came from parsed apps are re-emitted in their source dialect;
the emitted text uses explicit ``ref:``/``raw:`` selector terms, which every
frontend accepts, so the rules round-trip through the same pipeline.
Natively specified policies are emitted in the neutral policy syntax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .analysis import Finding
from .composition import ComposedGraph
from .errors import NoCapableDevice, UnsupportedFindingKind
from .frontends.lower import PolicyMapping
from .intervals import TimeWindow, arcs_complement, arcs_to_windows, arcs_union
from .inventory import InfrastructureDB
from .vigraph import ConditionNode, Constraint, VIPolicy, serialize_policy


@dataclass
class DeviceRule:
    rule_id: str
    device_id: str
    dialect: str
    text: str
    origin_policies: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "device": self.device_id,
            "dialect": self.dialect,
            "origin_policies": sorted(self.origin_policies),
            "text": self.text,
        }


@dataclass
class ProposedPolicy:
    proposal_id: str
    replaces: str
    proposal: VIPolicy
    rationale: str
    status: str = "Pending"  # Pending | Accepted | Rejected | Obsolete
    finding_kind: str = ""
    finding_key: tuple | None = None  # sort key of the originating finding

    def to_dict(self) -> dict:
        return {
            "id": self.proposal_id,
            "replaces": self.replaces,
            "policy_text": serialize_policy(self.proposal),
            "rationale": self.rationale,
            "status": self.status,
            "finding_kind": self.finding_kind,
        }


# ---------------------------------------------------------------------------
# rule placement
# ---------------------------------------------------------------------------

def place_rules(rules: Sequence[str], candidates: Mapping[str, Sequence[str]]) -> dict[str, str]:
    """Least-loaded greedy assignment; ties break on device id.  Minimizes the
    maximum per-device rule count on equal-candidate instances."""
    loads: dict[str, int] = {}
    assignment: dict[str, str] = {}
    for rule in rules:
        pool = candidates[rule]
        if not pool:
            raise NoCapableDevice(rule)
        chosen = min(pool, key=lambda d: (loads.get(d, 0), d))
        assignment[rule] = chosen
        loads[chosen] = loads.get(chosen, 0) + 1
    return assignment


# ---------------------------------------------------------------------------
# dialect emitters (inverse of the frontends)
# ---------------------------------------------------------------------------

def _emit_smartapp(policy: VIPolicy) -> str:
    lines = [f'definition(name: "{policy.policy_id}", author: "{policy.author_admin}")']
    inputs: dict[str, str] = {}

    def input_for(ref) -> str:
        key = ref.render().replace('"', "")
        if key not in inputs:
            inputs[key] = f"sel{len(inputs)}"
        return inputs[key]

    src_var = input_for(policy.source)
    actions = []
    for act in policy.action_nodes():
        if act.implied:
            continue
        if act.kind == "IotCommand":
            var = input_for(act.target) if act.target is not None else input_for(policy.target)
            actions.append(f'    {var}.set("{act.attr}", "{act.value}")')
        elif act.kind == "Notify":
            actions.append(f'    notify("{act.message}", "")')
    temporal = [c for c in policy.conditions if c.kind == "Temporal" and c.window]
    states = [c for c in policy.conditions if c.constraint is not None]
    if temporal:
        w = temporal[0].window
        start, _, end = str(w).partition("-")
        subscribe = f'subscribe(timeWindow("{start}", "{end}"), "enter", run)'
        guards = states
    elif states:
        first = states[0]
        subscribe = f'subscribe({src_var}, "raw:{first.attr}.{first.constraint.op}{first.constraint.value}", run)'
        guards = states[1:]
    else:
        subscribe = f'subscribe({src_var}, "always", run)'
        guards = []
    for name, var in sorted(inputs.items(), key=lambda kv: kv[1]):
        lines.append(f'input "{var}", "ref:{name}"')
    lines += ["", "def installed() {", f"    {subscribe}", "}", "", "def run(evt) {"]
    body = actions
    for guard in reversed(guards):
        c = guard.constraint
        op = {"=": "==", "!": "!=", "<": "<", ">": ">"}[c.op]
        body = [f'    if (state({_guard_subject(policy, inputs)}, "{c.attr}") {op} "{c.value}") {{'] \
            + ["    " + b for b in body] + ["    }"]
    lines += body + ["}"]
    return "\n".join(lines) + "\n"


def _guard_subject(policy: VIPolicy, inputs: dict[str, str]) -> str:
    return inputs.get(policy.source.render(), "sel0")


def _openhab_item_for(vocab, ref, attr: str | None = None) -> str:
    """Reverse vocabulary lookup: the item name whose mapping is this
    reference (and whose change attribute matches, when one is required)."""
    rendered = ref.render()
    for (dialect, term), value in vocab.terms.items():
        if dialect != "openhab" or term.endswith(".attr"):
            continue
        if value.strip() != rendered:
            continue
        if attr is not None:
            attr_term = vocab.terms.get(("openhab", f"{term}.attr"))
            if attr_term != attr:
                continue
        return term
    raise LookupError(f"no openhab item maps to {rendered}")


def _emit_openhab(policy: VIPolicy, vocab=None) -> str:
    if vocab is None:
        raise LookupError("openhab emission needs the vocabulary")
    lines = []
    if policy.author_admin:
        lines.append(f'author "{policy.author_admin}"')
        lines.append("")
    lines += [f'rule "{policy.policy_id}"', "when"]
    temporal = [c for c in policy.conditions if c.kind == "Temporal" and c.window]
    states = [c for c in policy.conditions if c.constraint is not None]
    sustained = next((c.sustained_minutes for c in policy.conditions if c.sustained_minutes), 0)
    if states:
        c = states[0].constraint
        suffix = f" for {sustained}min" if sustained else ""
        item = _openhab_item_for(vocab, policy.source, c.attr)
        lines.append(f'    Item {item} changed to "{c.value}"{suffix}')
        guards = states[1:]
    elif temporal:
        lines.append(f'    Time window "{temporal[0].window}"')
        guards = []
        temporal = temporal[1:]
    else:
        raise LookupError("openhab rules need a trigger")
    lines.append("then")
    body = []
    for act in policy.action_nodes():
        if act.implied:
            continue
        if act.kind == "IotCommand":
            item = _openhab_item_for(vocab, act.target or policy.target)
            body.append(f'    {item}.send("{act.attr}", "{act.value}")')
        elif act.kind == "Notify":
            body.append(f'    notify("{act.message}", "")')
    for guard in guards:
        c = guard.constraint
        op = {"=": "==", "!": "!=", "<": "<", ">": ">"}[c.op]
        subj = _openhab_item_for(vocab, policy.source)
        body = [f'    if (state({subj}, "{c.attr}") {op} "{c.value}") {{'] \
            + ["    " + b for b in body] + ["    }"]
    lines += body + ["end"]
    return "\n".join(lines) + "\n"


def _emit_ifttt(policy: VIPolicy) -> str:
    temporal = [c for c in policy.conditions if c.kind == "Temporal" and c.window]
    states = [c for c in policy.conditions if c.constraint is not None]
    doc: dict = {"name": policy.policy_id, "author": policy.author_admin}
    if states:
        c = states[0].constraint
        trigger: dict = {"service": f"ref:{policy.source.render()}", "event": f"raw:{c.attr}"}
        _attach_comparison(trigger, c)
        conditions = states[1:]
    elif temporal:
        trigger = {"service": f"ref:{policy.source.render()}", "window": str(temporal[0].window)}
        conditions = []
        temporal = temporal[1:]
    else:
        trigger = {"service": f"ref:{policy.source.render()}", "event": "always"}
        conditions = []
    doc["trigger"] = trigger
    conds = []
    for cond in conditions:
        entry = {"service": f"ref:{policy.source.render()}", "event": f"raw:{cond.constraint.attr}"}
        _attach_comparison(entry, cond.constraint)
        conds.append(entry)
    for w in temporal:
        conds.append({"window": str(w.window)})
    doc["conditions"] = conds
    doc["actions"] = [
        {"service": f"ref:{(a.target or policy.target).render()}",
         "command": a.attr, "value": a.value}
        if a.kind == "IotCommand" else
        {"service": "notify", "command": "notify", "channel": a.message, "value": ""}
        for a in policy.action_nodes() if not a.implied and a.kind in ("IotCommand", "Notify")
    ]
    return json.dumps(doc, indent=2) + "\n"


def _attach_comparison(entry: dict, c: Constraint) -> None:
    if c.is_range:
        lo, hi = c.range_bounds()
        entry["outside" if c.op == "!" else "range"] = [lo, hi]
    elif c.op == "<":
        entry["below"] = float(c.value)
    elif c.op == ">":
        entry["above"] = float(c.value)
    else:
        entry["value"] = c.value


def _emit_neutral(policy: VIPolicy) -> str:
    return serialize_policy(policy)


EMITTERS = {
    "smartapp": _emit_smartapp,
    "openhab": _emit_openhab,
    "ifttt": _emit_ifttt,
}


# ---------------------------------------------------------------------------
# reconciliation
# ---------------------------------------------------------------------------

def reconcile(graph: ComposedGraph, mappings: Mapping[str, PolicyMapping],
              db: InfrastructureDB) -> list[DeviceRule]:
    """Emit per-device rules for every live policy of a conflict-free graph."""
    unresolved = graph.active_conflicts("Unresolved")
    if unresolved:
        ids = [c.record_id for c in unresolved]
        raise ValueError(f"graph has unresolved conflicts {ids}; resolve them before reconciling")

    by_policy: dict[str, list] = {}
    for edge in graph.live_edges():
        by_policy.setdefault(edge.fragment.policy_id, []).append(edge.fragment)

    dialect_by_policy: dict[str, str] = {}
    for mapping in mappings.values():
        for pid in mapping.policy_ids:
            dialect_by_policy[pid] = mapping.dialect

    rules: list[DeviceRule] = []
    rule_texts: dict[str, tuple[str, str, tuple[str, ...]]] = {}
    candidates: dict[str, list[str]] = {}
    for pid in sorted(by_policy):
        norm = graph.policies.get(pid)
        if norm is None:
            continue
        policy = norm.policy
        dialect = dialect_by_policy.get(pid, "")
        emitter = EMITTERS.get(dialect)
        try:
            if emitter is _emit_openhab:
                text = emitter(policy, graph.vocab)
            elif emitter is not None:
                text = emitter(policy)
            else:
                dialect = ""
                text = _emit_neutral(policy)
        except LookupError:
            # no reverse vocabulary entry for this shape: fall back to the
            # neutral document rather than emitting something unparseable
            dialect = ""
            text = _emit_neutral(policy)
        # candidate devices: the devices the rule commands (trigger sources and
        # action targets narrow the vendor/location scope implicitly)
        fragments = by_policy[pid]
        targets = sorted(set().union(*(f.target for f in fragments)))
        command_targets = sorted(set().union(
            *(f.target for f in fragments if f.action_key[0] == "cmd")) or set())
        pool = command_targets or targets
        pool = [d for d in pool if db.get(d) is not None]
        if not pool:
            gateways = sorted(d.id for d in db if d.category in ("gateway", "hub"))
            pool = gateways
        rule_id = f"rule-{pid}"
        if not pool:
            raise NoCapableDevice(rule_id)
        rule_texts[rule_id] = (dialect or "neutral", text, (pid,))
        candidates[rule_id] = pool

    assignment = place_rules(sorted(rule_texts), candidates)
    for rule_id in sorted(rule_texts):
        dialect, text, origins = rule_texts[rule_id]
        rules.append(DeviceRule(rule_id=rule_id, device_id=assignment[rule_id],
                                dialect=dialect, text=text, origin_policies=origins))
    return rules


def write_rule_bundle(rules: Sequence[DeviceRule], out_dir) -> dict:
    """Directory of per-device rule files plus a manifest."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"rules": []}
    per_device: dict[str, list[DeviceRule]] = {}
    for rule in rules:
        per_device.setdefault(rule.device_id, []).append(rule)
    for device_id in sorted(per_device):
        device_dir = out / device_id
        device_dir.mkdir(exist_ok=True)
        for rule in per_device[device_id]:
            ext = {"smartapp": ".smartapp", "openhab": ".rules",
                   "ifttt": ".applet", "mud": ".mud"}.get(rule.dialect, ".vip")
            path = device_dir / f"{rule.rule_id}{ext}"
            path.write_text(rule.text)
            manifest["rules"].append({
                "rule": rule.rule_id, "device": rule.device_id,
                "file": str(path.relative_to(out)),
                "origin_policies": sorted(rule.origin_policies),
            })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


# ---------------------------------------------------------------------------
# policy inference (strawman; never auto-applied)
# ---------------------------------------------------------------------------

def infer_policy(finding: Finding, graph: ComposedGraph,
                 proposal_seq: int = 0) -> ProposedPolicy:
    if finding.kind == "Gap":
        return _propose_for_gap(finding, graph, proposal_seq)
    if finding.kind == "PotentialRuntime":
        return _propose_for_potential(finding, graph, proposal_seq)
    if finding.kind == "Loop":
        return _propose_for_loop(finding, graph, proposal_seq)
    raise UnsupportedFindingKind(finding.kind)


def _policy_of(graph: ComposedGraph, pid: str) -> VIPolicy:
    return graph.policies[pid].policy


def _propose_for_gap(finding: Finding, graph: ComposedGraph, seq: int) -> ProposedPolicy:
    names = [p for p in sorted(finding.policies) if p in graph.policies]
    attr = finding.evidence.get("attribute", "")
    uncovered = finding.evidence.get("uncovered", [])
    if attr == "time" and uncovered:
        window = TimeWindow.parse(uncovered[0])
        # nearest covering neighbor: the policy whose window adjoins the gap
        best, best_dist = None, None
        for pid in names:
            policy = _policy_of(graph, pid)
            for w in policy.temporal_windows():
                dist = min(_circular_distance(w.end, window.start),
                           _circular_distance(window.end, w.start))
                if best_dist is None or dist < best_dist:
                    best, best_dist = policy, dist
        template = best or _policy_of(graph, names[0])
        conds = tuple(c for c in template.conditions if c.kind != "Temporal")
        proposal = replace(
            template,
            policy_id=f"proposal-{seq}",
            conditions=(ConditionNode.temporal(window),) + conds,
        )
        rationale = (f"uncovered time {uncovered[0]} on {attr}: extend the nearest "
                     f"schedule ({template.policy_id}) to cover it")
        return ProposedPolicy(proposal_id=f"proposal-{seq}", replaces=template.policy_id,
                              proposal=proposal, rationale=rationale, finding_kind="Gap")
    # numeric / enum gap: clone a named policy constrained to the uncovered region
    template = _policy_of(graph, names[0])
    conds = tuple(c for c in template.conditions if c.attr != attr)
    hole = uncovered[0] if uncovered else ""
    constraint = _constraint_for_interval(attr, hole)
    proposal = replace(
        template,
        policy_id=f"proposal-{seq}",
        conditions=(ConditionNode.from_constraint(constraint),) + conds,
    )
    rationale = f"no policy covers {attr} {hole}; clone {template.policy_id} for that region"
    return ProposedPolicy(proposal_id=f"proposal-{seq}", replaces=template.policy_id,
                          proposal=proposal, rationale=rationale, finding_kind="Gap")


def _constraint_for_interval(attr: str, rendered: str) -> Constraint:
    # rendered like '(74, 95]' or a bare state value
    body = rendered.strip("[]()")
    parts = [p.strip() for p in body.split(",")]
    if len(parts) == 2:
        return Constraint(attr, "=", f"{parts[0]}-{parts[1]}")
    return Constraint(attr, "=", body)


def _circular_distance(a: int, b: int) -> int:
    from .intervals import MINUTES_PER_DAY

    d = abs(a - b) % MINUTES_PER_DAY
    return min(d, MINUTES_PER_DAY - d)


def _propose_for_potential(finding: Finding, graph: ComposedGraph, seq: int) -> ProposedPolicy:
    pid_a, pid_b = sorted(finding.policies)
    keep, adjust = _policy_of(graph, pid_a), _policy_of(graph, pid_b)
    guard = _disambiguating_guard(keep)
    proposal = replace(
        adjust,
        policy_id=f"proposal-{seq}",
        conditions=adjust.conditions + (guard,),
    )
    rationale = (f"{pid_a} and {pid_b} can fire together with contradictory actions; "
                 f"guard {pid_b} with the complement of {pid_a}'s trigger so the two "
                 f"are mutually exclusive")
    return ProposedPolicy(proposal_id=f"proposal-{seq}", replaces=adjust.policy_id,
                          proposal=proposal, rationale=rationale, finding_kind="PotentialRuntime")


def _disambiguating_guard(policy: VIPolicy) -> ConditionNode:
    for cond in policy.conditions:
        if cond.kind == "Temporal" and cond.window:
            w = cond.window
            return ConditionNode.temporal(TimeWindow(w.end, w.start))
        if cond.constraint is not None:
            c = cond.constraint
            flipped = {"=": "!", "!": "=", "<": ">", ">": "<"}[c.op]
            return ConditionNode.from_constraint(Constraint(c.attr, flipped, c.value))
    # unconditional counterpart: propose a nighttime guard to split the day
    return ConditionNode.temporal(TimeWindow.parse("07:00-22:00"))


def _propose_for_loop(finding: Finding, graph: ComposedGraph, seq: int) -> ProposedPolicy:
    togglers = finding.evidence.get("togglers") or []
    chain = finding.evidence.get("chain") or finding.evidence.get("cycle") or []
    target_pid = (togglers[0] if togglers
                  else (chain[-1] if chain else sorted(finding.policies)[-1]))
    other_pid = next(p for p in sorted(finding.policies) if p != target_pid)
    adjust = _policy_of(graph, target_pid)
    guard = _disambiguating_guard(_policy_of(graph, other_pid))
    proposal = replace(
        adjust,
        policy_id=f"proposal-{seq}",
        conditions=adjust.conditions + (guard,),
    )
    rationale = (f"break the re-trigger cycle {finding.evidence}: give {target_pid} a "
                 f"terminal condition excluding {other_pid}'s activation context")
    return ProposedPolicy(proposal_id=f"proposal-{seq}", replaces=target_pid,
                          proposal=proposal, rationale=rationale, finding_kind="Loop")
