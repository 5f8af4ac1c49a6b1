"""Vendor-independent graph policies and their text syntax.

A policy is a path: source node (with optional state), condition nodes along
the edge, an action group, and a target node (with optional state).  Two
variants exist: trigger-action policies (flow arrow ``->``) and ACL policies
(verdict arrow ``=>`` for ALLOW, ``!=>`` for DENY, with an optional network
function chain and traffic type).

Text form, one policy per stanza, ``#`` comments::

    policy{"S3"} @admin{"parent"} :
        source-node{device-types{"OuterDoorsWindows"}}
        -> time{"22:00-07:00"}
        -> iot-commands-action{lock_state=locked}
        -> target-node{device-types{"OuterDoorsWindows"}}

    policy{"acl-feed"} @admin{"building"} :
        source-node{devices{"cam-entrance"}} => target-node{devices{"console-fire"}}
        . traffic-type{"video"} . nfc{"Firewall >> DPI"}

Comparators inside condition braces are limited to ``!``, ``=``, ``<``, ``>``;
ranges are written ``60-75`` (shorthand for ``=60-75``) and negated ranges
``!40-50``.  Temporal windows wrap midnight.  Action sequencing uses ``>>``
(serial) and ``||`` (parallel); ``+acl{...}`` / ``-acl{...}`` add and remove
ACLs from within a trigger-action policy, and ``notify{...}`` raises
user-facing notifications.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import AmbiguousNode, PolicySyntaxError, UnknownComparator, UnknownKeyword, UnknownNode
from .intervals import Interval, Region, TimeWindow
from .inventory import Domain, InfrastructureDB
from .trees import NodePath, TreeSet


def _split_multi(label: str) -> list[str]:
    """Comma-separated labels select the union of the named values."""
    return [part.strip() for part in label.split(",") if part.strip()]

COMPARATORS = ("!", "=", "<", ">")

NODE_KEYWORDS = {
    "devices", "device-type", "device-types", "device-category", "device-vendors",
    "vendor-type", "vendor-types", "location", "floors", "rooms", "group",
    "source-node", "target-node", "parent",
}

_DIMENSION_SYNONYMS = {
    "device-type": "device-category",
    "device-types": "device-category",
    "device-category": "device-category",
    "vendor-type": "vendor-type",
    "vendor-types": "vendor-type",
    "device-vendors": "vendor-type",
    "location": "location",
    "floors": "floors",
    "rooms": "rooms",
    "devices": "devices",
}


# ---------------------------------------------------------------------------
# constraints and condition nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    """One comparison over an attribute: op in {!, =, <, >}; ranges as 'a-b'."""

    attr: str
    op: str
    value: str

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise UnknownComparator(self.op)

    @property
    def is_range(self) -> bool:
        return bool(_RANGE_RE.match(self.value))

    def range_bounds(self) -> tuple[float, float]:
        m = _RANGE_RE.match(self.value)
        if not m:
            raise ValueError(f"{self.value!r} is not a range literal")
        return float(m.group(1)), float(m.group(2))

    def numeric_value(self) -> float | None:
        try:
            return float(self.value)
        except ValueError:
            return None

    def region(self, domain: Interval) -> Region:
        """Exact numeric region selected by this constraint within a domain."""
        full = Region([domain])
        if self.is_range:
            lo, hi = self.range_bounds()
            inside = Region.span(lo, hi)
            if self.op == "!":
                return inside.complement_within(domain)
            return inside.intersect(full)
        v = self.numeric_value()
        if v is None:
            raise ValueError(f"constraint value {self.value!r} is not numeric")
        if self.op == "<":
            return Region.span(domain.lo, v, domain.lo_closed, False).intersect(full)
        if self.op == ">":
            return Region.span(v, domain.hi, False, domain.hi_closed).intersect(full)
        if self.op == "=":
            return Region.point(v).intersect(full)
        return Region.point(v).complement_within(domain)

    def value_set(self, domain: Domain) -> frozenset[str]:
        """Values selected within an enumerated domain."""
        if self.op == "=":
            return frozenset({self.value}) & domain.values
        if self.op == "!":
            return domain.values - {self.value}
        raise ValueError(f"comparator {self.op!r} needs a numeric domain")

    def __str__(self) -> str:
        return f"{self.attr}{{{self.op}{self.value}}}"


_RANGE_RE = re.compile(r"^(-?\d+(?:\.\d+)?)\s*-\s*(-?\d+(?:\.\d+)?)$")


def parse_constraint_body(attr: str, body: str) -> Constraint:
    body = body.strip().strip('"')
    if not body:
        raise PolicySyntaxError(f"empty constraint for {attr!r}")
    head = body[0]
    if head in COMPARATORS:
        if len(body) > 1 and body[1] in "<>=!":
            raise UnknownComparator(body[:2])
        return Constraint(attr, head, body[1:].strip())
    if _RANGE_RE.match(body):
        return Constraint(attr, "=", body)
    return Constraint(attr, "=", body)


CONDITION_KINDS = ("Temporal", "Numeric", "StateEq", "Env")


@dataclass(frozen=True)
class ConditionNode:
    kind: str
    attr: str = ""
    constraint: Constraint | None = None
    window: TimeWindow | None = None
    sustained_minutes: int = 0

    @classmethod
    def temporal(cls, window: TimeWindow) -> "ConditionNode":
        return cls(kind="Temporal", attr="time", window=window)

    @classmethod
    def from_constraint(cls, constraint: Constraint) -> "ConditionNode":
        kind = "Numeric" if constraint.numeric_value() is not None or constraint.is_range else "StateEq"
        return cls(kind=kind, attr=constraint.attr, constraint=constraint)

    def as_env(self) -> "ConditionNode":
        return replace(self, kind="Env")

    def sort_key(self) -> tuple:
        return (self.kind, self.attr, str(self.constraint or self.window), self.sustained_minutes)

    def render(self) -> str:
        if self.sustained_minutes:
            return f"sustained{{>{self.sustained_minutes}}}"
        if self.kind == "Temporal":
            return f'time{{"{self.window}"}}'
        c = self.constraint
        return f"{c.attr}{{{c.op}{c.value}}}"


# ---------------------------------------------------------------------------
# node references
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeRef:
    """Reference to an abstraction-tree node: a keyword hint, a label descent
    path, optional `.`-chained refinements (set intersection), and an optional
    parent disambiguator."""

    keyword: str
    labels: tuple[str, ...]
    refinements: tuple["NodeRef", ...] = ()
    parent: tuple[str, ...] = ()

    def dimension_hint(self) -> str | None:
        return _DIMENSION_SYNONYMS.get(self.keyword)

    def resolve(self, trees: TreeSet, author: str | None = None) -> frozenset[str]:
        """Entity set of this reference.  Author-owned trees are preferred when
        the label is ambiguous across trees; refinements intersect."""
        base = self._resolve_primary(trees, author)
        for ref in self.refinements:
            base &= ref.resolve(trees, author)
        return base

    def locate(self, trees: TreeSet, author: str | None = None) -> list:
        """(tree, node) pairs the primary selector denotes.  Dimension-keyword
        references select by dimension value and union across positions; bare
        label paths use node identity and may be ambiguous."""
        dim = self.dimension_hint()
        if self.keyword == "device-set":
            return []
        if dim is not None:
            hits = []
            for label in _split_multi(self.labels[0]):
                hits.extend(trees.find_nodes(label, dimension=dim))
            for segment in self.labels[1:]:
                wanted = set(_split_multi(segment))
                hits = [(t, c) for t, n in hits for c in n.children
                        if segment == "*" or c.label in wanted]
            if self.parent:
                hits = [(t, n) for t, n in hits
                        if all(p in set(n.path[:-1]) for p in self.parent)]
        else:
            hits = trees.locate(NodePath(segments=self.labels, parent=self.parent))
        if author:
            owned = [(t, n) for t, n in hits if t.owner_admin == author]
            if owned:
                return owned
        return hits

    def _resolve_primary(self, trees: TreeSet, author: str | None) -> frozenset[str]:
        if self.keyword == "device-set":
            return frozenset(self.labels)
        hits = self.locate(trees, author)
        if not hits:
            raise UnknownNode("→".join(self.labels), self.keyword)
        if self.dimension_hint() is None:
            # node-identity reference: distinct entity sets are ambiguous
            entity_sets = {n.entity_set() for _, n in hits}
            if len(entity_sets) > 1 and "*" not in self.labels:
                paths = {n.path for _, n in hits}
                if len(paths) > 1:
                    raise AmbiguousNode("→".join(self.labels), len(paths))
        out: frozenset[str] = frozenset()
        for _, node in hits:
            # a structural dimension keyword selects devices even when the node
            # sits inside a state tree whose leaves are values
            out |= node.devices if self.dimension_hint() is not None else node.entity_set()
        return out

    def render(self) -> str:
        body = "→".join(self.labels)
        out = f'{self.keyword}{{"{body}"}}'
        if self.parent:
            parent_body = "→".join(self.parent)
            out += f'.parent{{"{parent_body}"}}'
        for ref in self.refinements:
            out += "." + ref.render()
        return out

    def describe(self) -> str:
        return self.render()


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------

ACTION_KINDS = ("IotCommand", "AclAdd", "AclRemove", "Notify")


@dataclass(frozen=True)
class AclSpec:
    source: NodeRef
    target: NodeRef
    verdict: str  # ALLOW | DENY
    traffic_type: str = ""
    nfc: tuple[str, ...] = ()

    def render(self) -> str:
        arrow = "=>" if self.verdict == "ALLOW" else "!=>"
        out = f"{self.source.render()} {arrow} {self.target.render()}"
        if self.traffic_type:
            out += f' . traffic-type{{"{self.traffic_type}"}}'
        if self.nfc:
            out += f' . nfc{{"{" >> ".join(self.nfc)}"}}'
        return out


@dataclass(frozen=True)
class ActionNode:
    kind: str
    attr: str = ""
    value: str = ""
    target: NodeRef | None = None  # None -> the policy target
    acl: AclSpec | None = None
    message: str = ""
    implied: bool = False  # engine-added (vocabulary implication / implicit ACL),
                           # not author-specified; rogue checks skip these

    def render(self) -> str:
        if self.kind == "IotCommand":
            out = f"iot-commands-action{{{self.attr}={self.value}}}"
            if self.target is not None:
                out += f"@{self.target.render()}"
            return out
        if self.kind == "Notify":
            return f'notify{{"{self.message}"}}'
        sign = "+" if self.kind == "AclAdd" else "-"
        return f"{sign}acl{{{self.acl.render()}}}"

    def sort_key(self) -> tuple:
        return (self.kind, self.attr, self.value, self.message)


@dataclass(frozen=True)
class ActionGroup:
    """Combinator tree over actions; op is '>>' (serial) or '||' (parallel).
    Leaves are stored in syntactic order."""

    op: str
    items: tuple["ActionGroup | ActionNode", ...]

    def leaves(self) -> list[ActionNode]:
        out: list[ActionNode] = []
        for item in self.items:
            if isinstance(item, ActionNode):
                out.append(item)
            else:
                out.extend(item.leaves())
        return out

    def render(self) -> str:
        parts = []
        for item in self.items:
            text = item.render()
            if isinstance(item, ActionGroup) and item.op != self.op:
                text = f"({text})"
            parts.append(text)
        return f" {self.op} ".join(parts)


def single_action(node: ActionNode) -> ActionGroup:
    return ActionGroup(op=">>", items=(node,))


# ---------------------------------------------------------------------------
# the policy itself
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VIPolicy:
    policy_id: str
    variant: str  # 'TriggerAction' | 'Acl'
    author_admin: str
    source: NodeRef
    target: NodeRef
    conditions: tuple[ConditionNode, ...] = ()
    actions: ActionGroup | None = None
    source_state: str = ""
    target_state: str = ""
    verdict: str = ""  # ACL only: ALLOW | DENY
    traffic_type: str = ""
    nfc: tuple[str, ...] = ()
    precedence_tags: tuple[str, ...] = ()
    origin_app: str = ""

    def __post_init__(self):
        # conditions are a conjunction; keep them in canonical order so
        # structural equality and the serialize/parse round trip are exact
        object.__setattr__(self, "conditions",
                           tuple(sorted(self.conditions, key=lambda c: c.sort_key())))

    def canonical_conditions(self) -> tuple[ConditionNode, ...]:
        return self.conditions

    def action_nodes(self) -> list[ActionNode]:
        if self.variant == "Acl":
            verdict_node = ActionNode(kind="AclAdd" if self.verdict == "ALLOW" else "AclRemove",
                                      acl=AclSpec(self.source, self.target, self.verdict,
                                                  self.traffic_type, self.nfc))
            return [verdict_node]
        return self.actions.leaves() if self.actions else []

    def temporal_windows(self) -> list[TimeWindow]:
        return [c.window for c in self.conditions if c.kind == "Temporal" and c.window]

    def to_tuple(self) -> tuple:
        """The 6-field tuple view used by composition and analysis."""
        return (
            self.source.render(),
            self.source_state,
            tuple(c.render() for c in self.canonical_conditions()),
            self.target.render(),
            self.target_state,
            tuple(a.render() for a in self.action_nodes()),
        )

    def to_graph_document(self) -> dict:
        """Node/edge list document for the UI."""
        nodes = [
            {"id": "source", "label": self.source.describe(), "kind": "source",
             "state": self.source_state},
        ]
        edges = []
        prev = "source"
        for i, cond in enumerate(self.canonical_conditions()):
            nid = f"cond{i}"
            nodes.append({"id": nid, "label": cond.render(), "kind": "condition"})
            edges.append({"from": prev, "to": nid, "verdict": ""})
            prev = nid
        for i, act in enumerate(self.action_nodes()):
            nid = f"act{i}"
            nodes.append({"id": nid, "label": act.render(), "kind": "action"})
            edges.append({"from": prev, "to": nid, "verdict": ""})
            prev = nid
        nodes.append({"id": "target", "label": self.target.describe(), "kind": "target",
                      "state": self.target_state})
        verdict = self.verdict if self.variant == "Acl" else ""
        edges.append({"from": prev, "to": "target", "verdict": verdict})
        return {"policy": self.policy_id, "variant": self.variant,
                "author": self.author_admin, "nodes": nodes, "edges": edges}


def _read_brace_body(text: str, open_pos: int) -> tuple[str, int]:
    """Raw text between balanced braces starting at open_pos ('{')."""
    depth = 0
    for j in range(open_pos, len(text)):
        if text[j] == "{":
            depth += 1
        elif text[j] == "}":
            depth -= 1
            if depth == 0:
                return text[open_pos + 1:j], j + 1
    raise PolicySyntaxError("unbalanced '{'", open_pos)


# ---------------------------------------------------------------------------
# recursive-descent parser over raw text
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    # -- low level ---------------------------------------------------------

    def skip_ws(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl + 1
            elif ch.isspace():
                self.pos += 1
            else:
                break

    def peek(self, literal: str) -> bool:
        self.skip_ws()
        return self.text.startswith(literal, self.pos)

    def eat(self, literal: str) -> bool:
        if self.peek(literal):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str):
        if not self.eat(literal):
            raise PolicySyntaxError(f"expected {literal!r}", self.pos)

    def word(self) -> str:
        self.skip_ws()
        m = re.match(r"[A-Za-z0-9_][A-Za-z0-9_-]*", self.text[self.pos:])
        if not m:
            raise PolicySyntaxError("expected a keyword", self.pos)
        self.pos += m.end()
        return m.group(0)

    def brace_body(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != "{":
            raise PolicySyntaxError("expected '{'", self.pos)
        body, end = _read_brace_body(self.text, self.pos)
        self.pos = end
        return body.strip()

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    # -- node references -----------------------------------------------------

    def node_ref(self, keyword: str | None = None) -> NodeRef:
        kw = keyword if keyword is not None else self.word()
        body = self.brace_body()
        if kw in ("source-node", "target-node"):
            inner = _Parser(body)
            ref = inner.node_ref()
            refinements = list(ref.refinements)
            parent = ref.parent
            while inner.eat("."):
                sub = inner.node_ref()
                if sub.keyword == "parent":
                    parent = sub.labels
                else:
                    refinements.append(sub)
            ref = NodeRef(ref.keyword, ref.labels, tuple(refinements), parent)
            return self._attach_refinements(ref)
        labels = tuple(s.strip() for s in re.split(r"→|->", body.strip().strip('"')) if s.strip())
        if not labels:
            raise PolicySyntaxError(f"empty node reference for {kw!r}", self.pos)
        ref = NodeRef(keyword=kw, labels=labels)
        return self._attach_refinements(ref)

    def _attach_refinements(self, ref: NodeRef) -> NodeRef:
        refinements = list(ref.refinements)
        parent = ref.parent
        while True:
            save = self.pos
            if not self.eat("."):
                break
            self.skip_ws()
            m = re.match(r"[A-Za-z0-9_][A-Za-z0-9_-]*\s*\{", self.text[self.pos:])
            if not m:
                self.pos = save
                break
            kw = self.word()
            if kw in ("source-state", "target-state", "traffic-type", "nfc", "time") or kw not in NODE_KEYWORDS:
                self.pos = save
                break
            sub = self.node_ref(kw)
            if sub.keyword == "parent":
                parent = sub.labels
            else:
                refinements.append(sub)
        return NodeRef(ref.keyword, ref.labels, tuple(refinements), parent)

    # -- conditions ----------------------------------------------------------

    def condition(self, attr: str) -> ConditionNode:
        body = self.brace_body()
        if attr == "time":
            return ConditionNode.temporal(TimeWindow.parse(body.strip().strip('"')))
        if attr == "sustained":
            c = parse_constraint_body(attr, body)
            return ConditionNode(kind="Temporal", attr="sustained",
                                 sustained_minutes=int(float(c.value)))
        return ConditionNode.from_constraint(parse_constraint_body(attr, body))

    # -- actions ---------------------------------------------------------------

    def action_atom(self) -> ActionGroup | ActionNode:
        if self.eat("("):
            group = self.action_expr()
            self.expect(")")
            return group
        self.skip_ws()
        if self.eat("+"):
            return self.acl_action("AclAdd")
        if self.eat("-"):
            return self.acl_action("AclRemove")
        kw = self.word()
        if kw == "iot-commands-action":
            body = self.brace_body()
            attr, _, value = body.strip().strip('"').partition("=")
            if not value:
                raise PolicySyntaxError("iot command must be attr=value", self.pos)
            target = None
            if self.eat("@"):
                target = self.node_ref()
            return ActionNode(kind="IotCommand", attr=attr.strip(), value=value.strip(), target=target)
        if kw == "notify":
            return ActionNode(kind="Notify", message=self.brace_body().strip().strip('"'))
        raise UnknownKeyword(kw)

    def acl_action(self, kind: str) -> ActionNode:
        kw = self.word()
        if kw != "acl":
            raise UnknownKeyword(f"{'+' if kind == 'AclAdd' else '-'}{kw}")
        body = self.brace_body()
        spec = parse_acl_spec(body)
        return ActionNode(kind=kind, acl=spec)

    def action_expr(self) -> ActionGroup:
        first = self.action_atom()
        items: list[ActionGroup | ActionNode] = [first]
        op = None
        while True:
            if self.eat(">>"):
                nxt_op = ">>"
            elif self.eat("||"):
                nxt_op = "||"
            else:
                break
            if op is None:
                op = nxt_op
            elif op != nxt_op:
                # different combinator binds the accumulated group as one item
                items = [ActionGroup(op=op, items=tuple(items))]
                op = nxt_op
            items.append(self.action_atom())
        return ActionGroup(op=op or ">>", items=tuple(items))


def parse_acl_spec(body: str) -> AclSpec:
    p = _Parser(body)
    src = p.node_ref()
    if p.eat("=>"):
        verdict = "ALLOW"
    elif p.eat("!=>"):
        verdict = "DENY"
    else:
        raise PolicySyntaxError("ACL needs '=>' or '!=>'", p.pos)
    tgt = p.node_ref()
    traffic, nfc = "", ()
    while p.eat("."):
        kw = p.word()
        if kw == "traffic-type":
            traffic = p.brace_body().strip().strip('"')
        elif kw == "nfc":
            nfc = tuple(s.strip() for s in p.brace_body().strip().strip('"').split(">>") if s.strip())
        else:
            raise UnknownKeyword(kw)
    return AclSpec(src, tgt, verdict, traffic, nfc)


def parse_policy(text: str) -> VIPolicy:
    """Parse a single policy stanza."""
    p = _Parser(text)
    p.skip_ws()
    kw = p.word()
    if kw != "policy":
        raise UnknownKeyword(kw)
    policy_id = p.brace_body().strip().strip('"')
    author = ""
    tags: tuple[str, ...] = ()
    while p.eat("@"):
        meta = p.word()
        body = p.brace_body().strip().strip('"')
        if meta == "admin":
            author = body
        elif meta == "precedence":
            tags = tuple(s.strip().strip('"') for s in body.split(",") if s.strip())
        else:
            raise UnknownKeyword(f"@{meta}")
    p.expect(":")

    kw = p.word()
    if kw != "source-node":
        raise UnknownKeyword(kw)
    source = p.node_ref("source-node")
    source_state = ""
    if p.peek(".") and re.match(r"\.\s*source-state", p.text[p.pos:]):
        p.expect(".")
        p.word()
        source_state = p.brace_body().strip().strip('"')

    # ACL variant: verdict arrow follows the source node
    if p.peek("=>") or p.peek("!=>"):
        verdict = "ALLOW" if p.eat("=>") else ("DENY" if p.eat("!=>") else "")
        kw = p.word()
        if kw != "target-node":
            raise UnknownKeyword(kw)
        target = p.node_ref("target-node")
        traffic, nfc, target_state = "", (), ""
        conditions: list[ConditionNode] = []
        while p.eat("."):
            kw = p.word()
            if kw == "traffic-type":
                traffic = p.brace_body().strip().strip('"')
            elif kw == "nfc":
                nfc = tuple(s.strip() for s in p.brace_body().strip().strip('"').split(">>") if s.strip())
            elif kw == "target-state":
                target_state = p.brace_body().strip().strip('"')
            else:
                conditions.append(p.condition(kw))
        if not p.at_end():
            raise PolicySyntaxError("trailing text after ACL policy", p.pos)
        return VIPolicy(
            policy_id=policy_id, variant="Acl", author_admin=author,
            source=source, target=target, conditions=tuple(conditions),
            source_state=source_state, target_state=target_state,
            verdict=verdict, traffic_type=traffic, nfc=nfc, precedence_tags=tags,
        )

    # trigger-action variant: arrow-separated condition and action nodes
    conditions = []
    actions: ActionGroup | None = None
    target: NodeRef | None = None
    target_state = ""
    while p.eat("->") or p.eat("→"):
        p.skip_ws()
        if p.peek("+") or p.peek("-") or p.peek("(") or p.peek("iot-commands-action") or p.peek("notify"):
            if actions is not None:
                raise PolicySyntaxError("multiple action groups in one policy", p.pos)
            actions = p.action_expr()
            continue
        kw = p.word()
        if kw == "target-node":
            target = p.node_ref("target-node")
            if p.peek(".") and re.match(r"\.\s*target-state", p.text[p.pos:]):
                p.expect(".")
                p.word()
                target_state = p.brace_body().strip().strip('"')
            break
        conditions.append(p.condition(kw))
        while p.eat("."):  # further conditions chained with the constraint operator
            conditions.append(p.condition(p.word()))
    if target is None:
        raise PolicySyntaxError("trigger-action policy must end at target-node{...}", p.pos)
    if not p.at_end():
        raise PolicySyntaxError("trailing text after policy", p.pos)
    if actions is None:
        raise PolicySyntaxError("trigger-action policy needs at least one action", p.pos)
    return VIPolicy(
        policy_id=policy_id, variant="TriggerAction", author_admin=author,
        source=source, target=target, conditions=tuple(conditions),
        actions=actions, source_state=source_state, target_state=target_state,
        precedence_tags=tags,
    )


def parse_policy_file(text: str) -> list[VIPolicy]:
    """Parse a file of stanzas; stanzas start at the ``policy`` keyword."""
    body = "\n".join(
        line for line in text.splitlines() if not line.strip().startswith("#")
    )
    chunks = re.split(r"(?=\bpolicy\s*\{)", body)
    return [parse_policy(c) for c in chunks if c.strip()]


def serialize_policy(p: VIPolicy) -> str:
    """Canonical text; parse(serialize(p)) is structurally equal to p."""
    head = f'policy{{"{p.policy_id}"}}'
    if p.author_admin:
        head += f' @admin{{"{p.author_admin}"}}'
    if p.precedence_tags:
        head += f' @precedence{{"{",".join(p.precedence_tags)}"}}'
    src = f"source-node{{{p.source.render()}}}"
    if p.source_state:
        src += f'.source-state{{"{p.source_state}"}}'
    if p.variant == "Acl":
        arrow = "=>" if p.verdict == "ALLOW" else "!=>"
        out = f"{head} :\n    {src} {arrow} target-node{{{p.target.render()}}}"
        if p.target_state:
            out += f'.target-state{{"{p.target_state}"}}'
        if p.traffic_type:
            out += f'\n    . traffic-type{{"{p.traffic_type}"}}'
        if p.nfc:
            out += f'\n    . nfc{{"{" >> ".join(p.nfc)}"}}'
        for cond in p.canonical_conditions():
            out += f"\n    . {cond.render()}"
        return out + "\n"
    parts = [src]
    parts.extend(c.render() for c in p.canonical_conditions())
    if p.actions:
        parts.append(p.actions.render())
    tgt = f"target-node{{{p.target.render()}}}"
    if p.target_state:
        tgt += f'.target-state{{"{p.target_state}"}}'
    parts.append(tgt)
    return f"{head} :\n    " + "\n    -> ".join(parts) + "\n"


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationError:
    code: str
    detail: str

    def __str__(self):
        return f"{self.code}: {self.detail}"


def validate(p: VIPolicy, trees: TreeSet, db: InfrastructureDB | None = None) -> list[ValidationError]:
    """Resolve node refs and check attribute names/state values against the
    inventory.  Authorship is not checked here (rogue detection owns that)."""
    errors: list[ValidationError] = []

    def check_ref(ref: NodeRef, role: str):
        try:
            entities = ref.resolve(trees)
            if not entities:
                errors.append(ValidationError("EmptyNode", f"{role} {ref.describe()} resolves to nothing"))
        except Exception as exc:
            errors.append(ValidationError(type(exc).__name__, f"{role}: {exc}"))

    check_ref(p.source, "source")
    check_ref(p.target, "target")
    for act in p.action_nodes():
        if act.target is not None:
            check_ref(act.target, f"action target of {act.render()}")
        if act.acl is not None:
            check_ref(act.acl.source, "acl source")
            check_ref(act.acl.target, "acl target")
    if db is not None:
        for cond in p.conditions:
            if cond.kind == "Temporal":
                continue
            domain = db.attribute_domain(cond.attr)
            if domain is None:
                errors.append(ValidationError("UnknownAttribute", cond.attr))
                continue
            c = cond.constraint
            if domain.kind in ("enum", "boolean") and c is not None and not c.is_range:
                if c.numeric_value() is None and c.value not in domain.values:
                    errors.append(ValidationError(
                        "UnknownStateValue",
                        f"{cond.attr}={c.value!r} not in {sorted(domain.values)}"))
        for act in p.action_nodes():
            if act.kind != "IotCommand":
                continue
            domain = db.attribute_domain(act.attr)
            if domain is not None and domain.kind in ("enum", "boolean"):
                if act.value not in domain.values:
                    errors.append(ValidationError(
                        "UnknownStateValue",
                        f"{act.attr}={act.value!r} not in {sorted(domain.values)}"))
    return errors
