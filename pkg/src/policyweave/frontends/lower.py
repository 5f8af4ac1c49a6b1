"""Lowering: app IR -> vendor-independent policies plus provenance mappings.

Every (subscription, leaf condition branch) pair with at least one action
becomes one policy.  Dialect terms are translated through the vocabulary
table; device selectors become node references resolved against the
abstraction trees.  Trigger-action policies implicitly gain ALLOW ACLs
between the trigger source and every action target, since enforcing the
action requires that traffic to flow.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import UnmappedAttribute, UnresolvedDevice
from ..intervals import TimeWindow
from ..trees import TreeSet
from ..vigraph import (
    AclSpec,
    ActionGroup,
    ActionNode,
    ConditionNode,
    Constraint,
    NodeRef,
    VIPolicy,
    parse_constraint_body,
)
from ..vocab import Vocabulary
from .ir import ActionStmt, AppIR, CondExpr, EventSpec

_NODEREF_RE = re.compile(r'^([A-Za-z0-9_-]+)\s*\{\s*"?([^"{}]*?)"?\s*\}$')


@dataclass
class SourceSpan:
    line: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {"line": self.line, "detail": self.detail}


@dataclass
class PolicyMapping:
    """app <-> policy provenance: which policies an app produced, where each
    came from in the source, and the device references it configures."""

    app_id: str
    dialect: str
    policy_ids: list[str] = field(default_factory=list)
    spans: dict[str, SourceSpan] = field(default_factory=dict)
    device_refs: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "app": self.app_id,
            "dialect": self.dialect,
            "policies": list(self.policy_ids),
            "spans": {k: v.to_dict() for k, v in self.spans.items()},
            "device_refs": dict(self.device_refs),
        }


def _term_to_noderef(vocab: Vocabulary, dialect: str, term: str) -> NodeRef:
    """Map a dialect device selector onto a node reference.  ``ref:``-prefixed
    terms carry a rendered reference verbatim (used by re-emitted rules)."""
    if term.startswith("ref:"):
        rendered = term[4:]
    elif vocab.has_term(dialect, term):
        rendered = vocab.map_term(dialect, term)
    elif term.startswith("device:"):
        rendered = f'devices{{"{term[7:]}"}}'
    else:
        raise UnmappedAttribute(term, dialect)
    m = _NODEREF_RE.match(rendered.strip())
    if not m:
        # bare attribute names are not node references
        raise UnmappedAttribute(term, dialect)
    keyword, body = m.group(1), m.group(2)
    labels = tuple(s.strip() for s in re.split(r"→|->", body) if s.strip())
    return NodeRef(keyword=keyword, labels=labels)


def _term_to_constraint(vocab: Vocabulary, dialect: str, term: str,
                        op: str = "", value: str = "") -> Constraint:
    """Map a dialect attribute/event term to an engine constraint.  ``raw:``
    terms name engine attributes directly (used by re-emitted rules)."""
    if term.startswith("raw:"):
        body = term[4:]
        attr, dot, rest = body.partition(".")
        if dot and rest:
            return parse_constraint_body(attr, rest)
        if op:
            return Constraint(attr, op, value)
        return Constraint(attr, "=", value)
    if vocab.has_term(dialect, term):
        mapped = vocab.map_term(dialect, term)
        m = _NODEREF_RE.match(mapped.strip())
        if m:  # full constraint like motion{=active}
            return parse_constraint_body(m.group(1), m.group(2))
        attr = mapped.strip()
    else:
        head = term.split(".")[0]
        if vocab.has_term(dialect, head):
            attr = vocab.map_term(dialect, head)
            rest = term[len(head) + 1:]
            if rest:
                return parse_constraint_body(attr, rest)
        else:
            raise UnmappedAttribute(term, dialect)
    if op:
        return Constraint(attr, op, value)
    return Constraint(attr, "=", value)


def _event_conditions(vocab: Vocabulary, dialect: str, sub_source: str,
                      event: EventSpec) -> list[ConditionNode]:
    conds: list[ConditionNode] = []
    if event.kind == "time":
        conds.append(ConditionNode.temporal(TimeWindow.parse(event.window)))
        return conds
    if event.kind == "always":
        return conds
    term = event.term
    constraint = None
    if dialect == "openhab":
        # 'Item.changed[.value]' -> the item's change attribute via vocabulary
        item, _, rest = term.partition(".changed")
        attr = vocab.map_term(dialect, f"{item}.attr")
        value = rest[1:] if rest.startswith(".") else ""
        if value:
            constraint = parse_constraint_body(attr, value)
    else:
        constraint = _term_to_constraint(vocab, dialect, term)
    if constraint is not None:
        conds.append(ConditionNode.from_constraint(constraint))
    if event.sustained_minutes:
        conds.append(ConditionNode(kind="Temporal", attr="sustained",
                                   sustained_minutes=event.sustained_minutes))
    return conds


def _cond_to_node(vocab: Vocabulary, dialect: str, ir: AppIR, cond: CondExpr) -> ConditionNode:
    if cond.kind == "time":
        return ConditionNode.temporal(TimeWindow.parse(cond.window))
    term = cond.term
    value = _deref_value(ir, cond.value)
    constraint = _term_to_constraint(vocab, dialect, term, cond.op, value)
    return ConditionNode.from_constraint(constraint)


def _deref_value(ir: AppIR, value: str) -> str:
    for decl in ir.declarations:
        if decl.kind == "val" and decl.name == value:
            return decl.value.strip().strip('"')
    return value


def _subject_ref(vocab: Vocabulary, dialect: str, ir: AppIR, subject: str) -> NodeRef:
    for decl in ir.declarations:
        if decl.name == subject and decl.kind == "input":
            if decl.value:  # explicit device id binding
                return NodeRef(keyword="devices", labels=(decl.value,))
            return _term_to_noderef(vocab, dialect, decl.selector)
    return _term_to_noderef(vocab, dialect, subject)


def _action_to_node(vocab: Vocabulary, dialect: str, ir: AppIR,
                    stmt: ActionStmt) -> ActionNode:
    if stmt.kind == "notify":
        return ActionNode(kind="Notify", message=stmt.term or stmt.message)
    target = _subject_ref(vocab, dialect, ir, stmt.subject)
    attr_term = stmt.term
    if vocab.has_term(dialect, f"command.{attr_term}"):
        attr = vocab.map_term(dialect, f"command.{attr_term}")
    elif vocab.has_term(dialect, attr_term):
        mapped = vocab.map_term(dialect, attr_term)
        attr = mapped if not _NODEREF_RE.match(mapped) else attr_term
    else:
        attr = attr_term
    return ActionNode(kind="IotCommand", attr=attr, value=_deref_value(ir, stmt.value),
                      target=target)


def lower(ir: AppIR, vocab: Vocabulary, trees: TreeSet) -> tuple[list[VIPolicy], PolicyMapping]:
    """Lower one app IR to policies.  Raises UnmappedAttribute for vocabulary
    holes and UnresolvedDevice for selectors no tree can resolve."""
    mapping = PolicyMapping(app_id=ir.app_id, dialect=ir.dialect)
    policies: list[VIPolicy] = []

    if ir.dialect == "mud":
        policies = _lower_mud(ir, vocab, trees, mapping)
        return policies, mapping

    serial = 0
    for sub in ir.subscriptions:
        source_ref: NodeRef | None = None
        if sub.source:
            source_ref = _subject_ref(vocab, ir.dialect, ir, sub.source)
        event_conds = _event_conditions(vocab, ir.dialect, sub.source, sub.event)
        branches = ir.branches(sub.handler)
        for conds, actions in branches:
            cond_nodes = list(event_conds)
            for cond in conds:
                cond_nodes.append(_cond_to_node(vocab, ir.dialect, ir, cond))
            action_nodes = [_action_to_node(vocab, ir.dialect, ir, a) for a in actions]
            commands = [a for a in action_nodes if a.kind == "IotCommand"]
            # implied companion commands declared in the vocabulary
            for cmd in list(commands):
                for attr, value in vocab.implied_commands(cmd.attr, cmd.value):
                    implied_target = _implied_target(vocab, ir.dialect, attr)
                    action_nodes.append(ActionNode(
                        kind="IotCommand", attr=attr, value=value,
                        target=implied_target or cmd.target, implied=True))
            if not action_nodes:
                continue
            target_ref = next((a.target for a in action_nodes if a.target is not None), None)
            src = source_ref or target_ref
            if target_ref is None:
                # notification-only policy: the subscription devices are both
                # endpoints of its self-loop edge
                target_ref = source_ref
            if src is None or target_ref is None:
                continue
            # implicit ALLOW ACLs between trigger source and action targets
            acl_nodes = []
            if source_ref is not None:
                seen_targets = set()
                for a in action_nodes:
                    if a.kind != "IotCommand" or a.target is None:
                        continue
                    key = a.target.render()
                    if key in seen_targets or key == src.render():
                        continue
                    seen_targets.add(key)
                    acl_nodes.append(ActionNode(kind="AclAdd", implied=True, acl=AclSpec(
                        source=src, target=a.target, verdict="ALLOW", traffic_type="commands")))
            serial += 1
            pid = f"{ir.app_id}" if len(ir.subscriptions) == 1 and len(branches) == 1 \
                else f"{ir.app_id}#{serial}"
            all_nodes = action_nodes + acl_nodes
            group = ActionGroup(op=">>", items=tuple(all_nodes))
            policy = VIPolicy(
                policy_id=pid, variant="TriggerAction", author_admin=ir.author_admin,
                source=src, target=target_ref, conditions=tuple(cond_nodes),
                actions=group, origin_app=ir.app_id,
            )
            _check_resolution(policy, trees)
            policies.append(policy)
            mapping.policy_ids.append(pid)
            mapping.spans[pid] = SourceSpan(line=sub.line, detail=f"subscription -> {sub.handler}")
            mapping.device_refs[pid] = sorted({
                a.target.render() for a in action_nodes if a.target is not None
            } | {src.render()})
    return policies, mapping


def _implied_target(vocab: Vocabulary, dialect: str, attr: str) -> NodeRef | None:
    term = f"target.{attr}"
    if vocab.has_term(dialect, term) or vocab.has_term("*", term):
        return _term_to_noderef(vocab, dialect, term)
    return None


def _check_resolution(policy: VIPolicy, trees: TreeSet) -> None:
    for ref, role in ((policy.source, "source"), (policy.target, "target")):
        try:
            ref.resolve(trees, policy.author_admin or None)
        except Exception as exc:
            raise UnresolvedDevice(f"{role} {ref.render()} of {policy.policy_id}: {exc}") from exc


def _lower_mud(ir: AppIR, vocab: Vocabulary, trees: TreeSet,
               mapping: PolicyMapping) -> list[VIPolicy]:
    device_ref = _term_to_noderef(vocab, "mud", ir.device_scope) \
        if vocab.has_term("mud", ir.device_scope) \
        else NodeRef(keyword="device-category", labels=(ir.device_scope,))
    policies: list[VIPolicy] = []
    serial = 0
    allowed_from_device = []
    for entry in ir.acl_entries:
        endpoint_ref = _endpoint_ref(vocab, entry.endpoint)
        if entry.direction == "from-device":
            src, dst = device_ref, endpoint_ref
        else:
            src, dst = endpoint_ref, device_ref
        serial += 1
        pid = f"{ir.app_id}#acl{serial}"
        verdict = "ALLOW" if entry.action == "accept" else "DENY"
        policy = VIPolicy(
            policy_id=pid, variant="Acl", author_admin=ir.author_admin,
            source=src, target=dst, verdict=verdict,
            traffic_type=entry.traffic, origin_app=ir.app_id,
        )
        policies.append(policy)
        mapping.policy_ids.append(pid)
        mapping.spans[pid] = SourceSpan(line=entry.line, detail=f"ace {entry.direction} {entry.endpoint}")
        if entry.direction == "from-device" and entry.action == "accept":
            allowed_from_device.append(entry.endpoint)
    # default-deny complement: the profiled device may reach only the listed
    # endpoints, so deny it everything else in the endpoint universe
    unlisted: frozenset[str] = frozenset()
    if vocab.has_term("mud", "endpoint.universe"):
        try:
            universe_ref = _term_to_noderef(vocab, "mud", "endpoint.universe")
            universe = universe_ref.resolve(trees)
            allowed: frozenset[str] = frozenset()
            for endpoint in allowed_from_device:
                allowed |= _endpoint_ref(vocab, endpoint).resolve(trees)
            profiled = device_ref.resolve(trees)
            unlisted = universe - allowed - profiled
        except Exception:
            unlisted = frozenset()
    if unlisted:
        pid = f"{ir.app_id}#default-deny"
        policy = VIPolicy(
            policy_id=pid, variant="Acl", author_admin=ir.author_admin,
            source=device_ref,
            target=NodeRef(keyword="device-set", labels=tuple(sorted(unlisted))),
            verdict="DENY", traffic_type="", origin_app=ir.app_id,
        )
        policies.append(policy)
        mapping.policy_ids.append(pid)
        mapping.spans[pid] = SourceSpan(line=0, detail="default-deny complement")
    return policies


def _endpoint_ref(vocab: Vocabulary, endpoint: str) -> NodeRef:
    if endpoint.startswith("device:"):
        return NodeRef(keyword="devices", labels=(endpoint[7:],))
    if vocab.has_term("mud", f"endpoint.{endpoint}"):
        return _term_to_noderef(vocab, "mud", f"endpoint.{endpoint}")
    return NodeRef(keyword="group", labels=(endpoint,))
