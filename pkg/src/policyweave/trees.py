"""Abstraction trees: per-administrator namespaces over the inventory.

A mapping expression declares one tree::

    abstraction-tree{"Nest-Firmware{<17.01}"} =
        location{BLDG1}.floors{*}:
        vendor-type{Nest}.device-category{*}:
        devices{*}

Levels are separated by ``:``.  Within a level, ``.``-joined clauses apply in
order; the final clause names the dimension whose distinct values become the
level's nodes, preceding clauses filter the device population.  A selector is
``*`` (any value), a literal, or a comparison (``<17.01``, ``>5``, ``=x``,
``!x``).  The quoted tree name may carry a filter of its own, applied to the
device field named by the last ``-``-separated token of the name
(``Nest-Firmware{<17.01}`` filters on firmware).

Sibling nodes union their device sets; each child's set refines its parent's,
so a parent's device set always equals the union of its children's.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import (
    AmbiguousNode,
    MappingSyntaxError,
    UnknownDimension,
    UnknownNode,
    UnknownTree,
)
from .inventory import Device, Domain, InfrastructureDB

MAX_LEVELS = 8

STRUCTURAL_DIMENSIONS = {
    "location", "floors", "rooms", "vendor-type", "device-category", "devices",
}
VALUE_DIMENSIONS = {"capabilities"}


class Relation(Enum):
    EQUAL = "equal"
    SUBSET = "subset"
    SUPERSET = "superset"
    OVERLAP = "overlap"
    DISJOINT = "disjoint"


@dataclass(frozen=True)
class Selector:
    """Level selector: wildcard, literal, or comparison constraint."""

    kind: str  # 'wildcard' | 'literal' | 'compare'
    op: str = ""
    value: str = ""

    @classmethod
    def parse(cls, text: str) -> "Selector":
        text = text.strip()
        if text == "*":
            return cls("wildcard")
        if text and text[0] in "<>=!":
            return cls("compare", op=text[0], value=text[1:].strip())
        return cls("literal", value=text)

    def matches(self, value: str | None) -> bool:
        if value is None:
            return False
        if self.kind == "wildcard":
            return value != ""
        if self.kind == "literal":
            if "," in self.value:
                return value in {v.strip() for v in self.value.split(",")}
            return value == self.value
        return _compare(value, self.op, self.value)

    def __str__(self) -> str:
        if self.kind == "wildcard":
            return "*"
        if self.kind == "literal":
            return self.value
        return f"{self.op}{self.value}"


def _version_key(text: str) -> list[float] | None:
    parts = text.split(".")
    try:
        return [float(p) for p in parts]
    except ValueError:
        return None


def _compare(value: str, op: str, ref: str) -> bool:
    """Dotted-segment numeric comparison when both sides parse, else string order."""
    vk, rk = _version_key(value), _version_key(ref)
    if vk is not None and rk is not None:
        a, b = vk, rk
    else:
        a, b = value, ref  # type: ignore[assignment]
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "=":
        return a == b
    if op == "!":
        return a != b
    raise UnknownDimension(op)


@dataclass(frozen=True)
class LevelSpec:
    dimension: str
    selector: Selector
    constraints: tuple[tuple[str, Selector], ...] = ()


@dataclass(frozen=True)
class AbstractionMapping:
    tree_name: str
    name_filter: tuple[str, Selector] | None
    levels: tuple[LevelSpec, ...]

    @property
    def depth(self) -> int:
        return len(self.levels)


_CLAUSE_RE = re.compile(r"([A-Za-z0-9_-]+)\s*\{([^{}]*)\}")


def parse_abstraction_mapping(text: str, known_dimensions: Iterable[str] = ()) -> AbstractionMapping:
    """Parse one ``abstraction-tree{...} = ...`` declaration."""
    known = set(known_dimensions)
    head, eq, body = text.partition("=")
    if not eq:
        raise MappingSyntaxError("expected '=' after abstraction-tree{...}", len(text))
    head = head.strip()
    m = re.match(r'abstraction-tree\s*\{\s*"(.*)"\s*\}\s*$', head, re.S)
    if not m:
        raise MappingSyntaxError("expected abstraction-tree{\"name\"}", 0)
    raw_name = m.group(1).strip()
    name_filter: tuple[str, Selector] | None = None
    fm = re.match(r"^(.*?)\{([^{}]*)\}$", raw_name)
    if fm:
        tree_name = fm.group(1)
        sel = Selector.parse(fm.group(2))
        if sel.kind != "wildcard":
            attr = tree_name.split("-")[-1].lower()
            name_filter = (attr, sel)
    else:
        tree_name = raw_name
    if not tree_name:
        raise MappingSyntaxError("empty tree name", 0)

    levels: list[LevelSpec] = []
    body = body.strip()
    if not body:
        raise MappingSyntaxError("mapping must declare at least one level", len(text))
    for level_text in body.split(":"):
        level_text = level_text.strip()
        if not level_text:
            raise MappingSyntaxError("empty level between ':' separators", text.find("::"))
        clauses = _CLAUSE_RE.findall(level_text)
        consumed = _CLAUSE_RE.sub("", level_text).replace(".", "").strip()
        if not clauses or consumed:
            raise MappingSyntaxError(f"cannot parse level {level_text!r}", text.find(level_text))
        parsed = [(dim.strip(), Selector.parse(sel)) for dim, sel in clauses]
        for dim, _ in parsed:
            if dim not in STRUCTURAL_DIMENSIONS and dim not in VALUE_DIMENSIONS and known and dim not in known:
                raise UnknownDimension(dim)
        *constraints, (dimension, selector) = parsed
        levels.append(LevelSpec(dimension, selector, tuple(constraints)))
    if not 1 <= len(levels) <= MAX_LEVELS:
        raise MappingSyntaxError(f"level count must be 1..{MAX_LEVELS}", 0)
    return AbstractionMapping(tree_name, name_filter, tuple(levels))


def parse_mapping_file(text: str, known_dimensions: Iterable[str] = ()) -> list[AbstractionMapping]:
    """Parse a file of declarations; blank lines and ``#`` comments ignored.
    A declaration runs until the next ``abstraction-tree`` keyword."""
    return [m for _, m in parse_mapping_declarations(text, known_dimensions)]


def parse_mapping_declarations(text: str, known_dimensions: Iterable[str] = ()
                               ) -> list[tuple[str, AbstractionMapping]]:
    """Like parse_mapping_file, but tracks ``owner <admin>`` lines: each sets
    the owning administrator for the declarations that follow."""
    owner = "global"
    out: list[tuple[str, AbstractionMapping]] = []
    pending: list[str] = []

    def flush():
        if pending:
            block = "\n".join(pending)
            for chunk in re.split(r"(?=abstraction-tree\s*\{)", block):
                if chunk.strip():
                    out.append((owner, parse_abstraction_mapping(chunk.strip(), known_dimensions)))
            pending.clear()

    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = re.match(r"owner\s+([A-Za-z0-9_-]+)\s*$", stripped)
        if m:
            flush()
            owner = m.group(1)
            continue
        pending.append(line)
    flush()
    return out


@dataclass
class TreeNode:
    label: str
    level: int
    dimension: str
    parent: "TreeNode | None" = None
    children: list["TreeNode"] = field(default_factory=list)
    devices: frozenset[str] = frozenset()
    values: frozenset[str] = frozenset()  # leaf state/capability values under this node

    @property
    def path(self) -> tuple[str, ...]:
        node, parts = self, []
        while node is not None:
            parts.append(node.label)
            node = node.parent
        return tuple(reversed(parts))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def entity_set(self) -> frozenset[str]:
        """What this node resolves to: values for value-leaf trees, else device ids."""
        return self.values if self.values else self.devices

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


class AbstractionTree:
    def __init__(self, name: str, owner_admin: str, mapping: AbstractionMapping, root: TreeNode):
        self.name = name
        self.owner_admin = owner_admin
        self.mapping = mapping
        self.root = root

    @property
    def state_dimension(self) -> str | None:
        """The attribute enumerated at the leaf level, when the last level is a
        capability or state dimension; None for device-leaf trees."""
        last = self.mapping.levels[-1].dimension
        if last in STRUCTURAL_DIMENSIONS:
            return None
        return last

    def nodes(self):
        return self.root.walk()

    def leaves(self) -> list[TreeNode]:
        """Leaf nodes; a root-only tree has zero leaves."""
        return [n for n in self.nodes() if n.is_leaf and n is not self.root]

    def device_set(self) -> frozenset[str]:
        return self.root.devices

    def depth(self) -> int:
        return max((n.level for n in self.nodes()), default=0)

    def to_document(self) -> dict:
        def encode(node: TreeNode) -> dict:
            doc = {
                "label": node.label,
                "level": node.level,
                "dimension": node.dimension,
                "device_count": len(node.devices),
            }
            if node.values:
                doc["values"] = sorted(node.values)
            if node.children:
                doc["children"] = [encode(c) for c in node.children]
            else:
                doc["devices"] = sorted(node.devices)
            return doc

        return {"tree": self.name, "owner": self.owner_admin, "root": encode(self.root)}


def _device_scalar(dev: Device, attr: str) -> str | None:
    """Scalar view of a device used by filters (name filter, constraints)."""
    if attr in ("id", "device", "devices"):
        return dev.id
    if attr in ("vendor", "vendor-type"):
        return dev.vendor
    if attr in ("category", "device-category"):
        return dev.category
    if attr == "firmware":
        return dev.firmware
    if attr == "location":
        return dev.location_at(0)
    if attr == "floors":
        return dev.location_at(1)
    if attr == "rooms":
        return dev.location_at(2)
    if attr in dev.dynamic_states:
        return dev.dynamic_states[attr]
    return None


def _dimension_value(dev: Device, dimension: str) -> str | None:
    if dimension in STRUCTURAL_DIMENSIONS or dimension == "firmware":
        return _device_scalar(dev, dimension)
    return dev.dynamic_states.get(dimension)


def build_tree(db: InfrastructureDB, mapping: AbstractionMapping, owner: str) -> AbstractionTree:
    """Construct the tree for one mapping.  A filter matching nothing yields a
    root-only tree; construction is deterministic (children ordered by label)."""
    population = _seed_population(db, mapping)
    if mapping.name_filter:
        attr, sel = mapping.name_filter
        population = [d for d in population if sel.matches(_device_scalar(d, attr))]
    for level in mapping.levels:
        for attr, sel in level.constraints:
            population = [d for d in population if sel.matches(_device_scalar(d, attr))]
        if level.dimension in STRUCTURAL_DIMENSIONS and level.selector.kind != "wildcard":
            population = [d for d in population if level.selector.matches(_dimension_value(d, level.dimension))]

    root = TreeNode(label=mapping.tree_name, level=0, dimension="root")

    def grow(node: TreeNode, devices: list[Device], level_index: int) -> frozenset[str]:
        if level_index == len(mapping.levels):
            ids = frozenset(d.id for d in devices)
            node.devices = ids
            return ids
        level = mapping.levels[level_index]
        dim = level.dimension
        collected: set[str] = set()
        if dim in STRUCTURAL_DIMENSIONS:
            groups: dict[str, list[Device]] = {}
            for dev in devices:
                value = _dimension_value(dev, dim)
                if value is None or not level.selector.matches(value):
                    continue
                groups.setdefault(value, []).append(dev)
            for label in sorted(groups):
                child = TreeNode(label=label, level=level_index + 1, dimension=dim, parent=node)
                ids = grow(child, groups[label], level_index + 1)
                if ids or child.children:
                    node.children.append(child)
                    collected.update(ids)
        else:
            # value level: expand capability values or declared state domains
            for dev in sorted(devices, key=lambda d: d.id):
                labels = _value_labels(db, dev, dim, level.selector)
                if not labels:
                    continue
                collected.add(dev.id)
                for label in labels:
                    child = TreeNode(
                        label=label, level=level_index + 1, dimension=dim, parent=node,
                        devices=frozenset({dev.id}), values=frozenset({label}),
                    )
                    node.children.append(child)
            node.values = frozenset(c.label for c in node.children) if node.children else frozenset()
        node.devices = frozenset(collected)
        for child in node.children:
            node.values = node.values | child.values
        return node.devices

    grow(root, population, 0)
    return AbstractionTree(mapping.tree_name, owner, mapping, root)


def _seed_population(db: InfrastructureDB, mapping: AbstractionMapping) -> list[Device]:
    """Start from the most selective single-literal slice the mapping offers;
    the remaining filters still apply afterwards."""
    best: list[Device] | None = None
    clauses: list[tuple[str, Selector]] = []
    for level in mapping.levels:
        clauses.extend(level.constraints)
        if level.dimension in STRUCTURAL_DIMENSIONS:
            clauses.append((level.dimension, level.selector))
    for attr, sel in clauses:
        if sel.kind != "literal" or "," in sel.value:
            continue
        groups = db.index_for(attr, _device_scalar)
        slice_ = groups.get(sel.value, [])
        if best is None or len(slice_) < len(best):
            best = slice_
    return list(db) if best is None else list(best)


def _value_labels(db: InfrastructureDB, dev: Device, dimension: str, selector: Selector) -> list[str]:
    if dimension == "capabilities":
        labels: list[str] = []
        for name, domain in sorted(dev.capabilities.items()):
            if domain.kind in ("enum", "boolean"):
                labels.extend(v for v in domain.leaf_labels() if selector.matches(v))
            else:
                if selector.matches(name):
                    labels.append(name)
        return labels
    if dimension == "time":
        return ["00:00..24:00"] if selector.kind == "wildcard" else [str(selector)]
    domain = dev.capabilities.get(dimension) or db.state_domains.get(dimension)
    if domain is None:
        if dimension in dev.dynamic_states:
            value = dev.dynamic_states[dimension]
            return [value] if selector.matches(value) else []
        return []
    return [v for v in domain.leaf_labels() if selector.kind == "wildcard" or selector.matches(v)]


@dataclass(frozen=True)
class NodePath:
    """A textual node reference: optional tree, ``:``-joined labels, optional
    parent disambiguator (the label path of an ancestor)."""

    segments: tuple[str, ...]
    tree: str | None = None
    parent: tuple[str, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "NodePath":
        tree = None
        body = text.strip()
        if "::" in body:
            tree, _, body = body.partition("::")
            tree = tree.strip()
        segments = tuple(s.strip() for s in re.split(r":|→|->", body) if s.strip())
        return cls(segments=segments, tree=tree)


class TreeSet:
    """All trees known to one engine instance; root names are unique."""

    def __init__(self, trees: Iterable[AbstractionTree] = ()):
        self.trees: dict[str, AbstractionTree] = {}
        for tree in trees:
            self.add(tree)

    def add(self, tree: AbstractionTree) -> None:
        if tree.name in self.trees:
            raise ValueError(f"tree name {tree.name!r} already registered; root names must be unique")
        self.trees[tree.name] = tree

    def __iter__(self):
        return iter(self.trees.values())

    def __len__(self):
        return len(self.trees)

    def get(self, name: str) -> AbstractionTree:
        if name not in self.trees:
            raise UnknownTree(name)
        return self.trees[name]

    def owned_by(self, admin: str) -> "TreeSet":
        subset = TreeSet()
        for tree in self:
            if tree.owner_admin == admin:
                subset.add(tree)
        return subset

    def find_nodes(self, label: str, dimension: str | None = None,
                   tree: str | None = None) -> list[tuple[AbstractionTree, TreeNode]]:
        pool = [self.get(tree)] if tree else list(self)
        hits: list[tuple[AbstractionTree, TreeNode]] = []
        for t in pool:
            for node in t.nodes():
                if node.label != label:
                    continue
                if dimension and node.dimension not in (dimension, "root"):
                    continue
                hits.append((t, node))
        return hits

    def locate(self, path: NodePath) -> list[tuple[AbstractionTree, TreeNode]]:
        """All (tree, node) pairs a path denotes, before ambiguity policy."""
        if not path.segments:
            raise UnknownNode("<empty>")
        first, *rest = path.segments
        if path.tree:
            candidates = [(self.get(path.tree), self.get(path.tree).root)] if first == path.tree else \
                self.find_nodes(first, tree=path.tree)
        elif first in self.trees:
            candidates = [(self.trees[first], self.trees[first].root)]
        else:
            candidates = self.find_nodes(first)
        resolved: list[tuple[AbstractionTree, TreeNode]] = []
        for tree, node in candidates:
            current: list[TreeNode] = [node]
            for segment in rest:
                nxt: list[TreeNode] = []
                for cn in current:
                    if segment == "*":
                        nxt.extend(cn.children)
                    else:
                        nxt.extend(c for c in cn.children if c.label == segment)
                current = nxt
            resolved.extend((tree, n) for n in current)
        if path.parent:
            resolved = [(t, n) for t, n in resolved if _has_ancestry(n, path.parent)]
        return resolved

    def resolve(self, path: NodePath) -> frozenset[str]:
        """Resolve a node path to its entity set (device ids, or leaf values
        for value-dimension trees).  A wildcard final segment unions all
        siblings, which equals the parent's own set."""
        located = self.locate(path)
        if not located:
            raise UnknownNode(":".join(path.segments),
                              path.tree or ("->".join(path.parent) or None))
        distinct = {id(n): n for _, n in located}
        if "*" in path.segments:
            # a wildcard segment unions over all matched siblings
            out: frozenset[str] = frozenset()
            for node in distinct.values():
                out |= node.entity_set()
            return out
        if len(distinct) > 1:
            paths = {n.path for n in distinct.values()}
            if len(paths) > 1:
                raise AmbiguousNode(":".join(path.segments), len(paths))
        node = next(iter(distinct.values()))
        return node.entity_set()

    def resolve_label(self, label: str, parent: tuple[str, ...] = (),
                      tree: str | None = None) -> frozenset[str]:
        return self.resolve(NodePath(segments=(label,), tree=tree, parent=parent))


def _has_ancestry(node: TreeNode, parent_path: tuple[str, ...]) -> bool:
    labels = set(node.path[:-1])
    return all(p in labels for p in parent_path)


def relate(a: frozenset[str], b: frozenset[str]) -> Relation:
    """Set relation between two resolved entity sets."""
    if a == b:
        return Relation.EQUAL
    if a < b:
        return Relation.SUBSET
    if a > b:
        return Relation.SUPERSET
    if a & b:
        return Relation.OVERLAP
    return Relation.DISJOINT
