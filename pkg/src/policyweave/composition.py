"""Graph composition: normalization to a common enforcement level, conflict
detection with precedence resolution, and incremental add/remove with
restoration of masked fragments.

The composed graph's nodes are normalized device sets; each policy action
contributes one edge fragment (source set, target set, conditions, action).
An incoming fragment is checked against live fragments that share target
devices: an identical fragment is a duplicate and is dropped; a fragment
with a contradictory action whose conditions definitely co-satisfy is a
conflict, resolved by precedence (the loser's overlapping device region is
masked and logged; its remainder survives); indefinitely co-satisfiable
contradictions are left for the chain/loop and potential analyses.

Fast paths: fragments are found through a device-membership hash instead of
pairwise set comparison, and set-relation outcomes are cached keyed by set
identity.  Probe counters expose the cost model for benchmarks; both paths
can be disabled to compare against the quadratic baseline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .cosat import DEFINITE, ConditionProfile, build_profile, classify
from .errors import UnknownPolicyId
from .inventory import InfrastructureDB
from .precedence import TIE, WIN_A, WIN_B, PrecedenceRules
from .trees import NodePath, TreeSet, TreeNode
from .vigraph import ConditionNode, NodeRef, VIPolicy
from .vocab import Vocabulary


# ---------------------------------------------------------------------------
# enforcement level and normalization
# ---------------------------------------------------------------------------

def locate_nodes(trees: TreeSet, ref: NodeRef, author: str | None = None) -> list[tuple[str, TreeNode]]:
    """Tree nodes a reference touches (primary selector and refinements)."""
    hits: list[tuple[str, TreeNode]] = []
    for part in (ref,) + ref.refinements:
        if part.keyword == "device-set":
            continue
        single = NodeRef(part.keyword, part.labels, (), part.parent)
        hits.extend((t.name, n) for t, n in single.locate(trees, author))
    return hits


def compute_elevel(policies: Sequence[VIPolicy], trees: TreeSet) -> dict[str, int]:
    """Per-tree enforcement level: the deepest node depth any policy uses."""
    levels: dict[str, int] = {}
    for policy in policies:
        refs = [policy.source, policy.target]
        for act in policy.action_nodes():
            if act.target is not None:
                refs.append(act.target)
        for ref in refs:
            try:
                for tree_name, node in locate_nodes(trees, ref, policy.author_admin or None):
                    levels[tree_name] = max(levels.get(tree_name, 0), node.level)
            except Exception:
                continue
    return levels


@dataclass(frozen=True)
class Unit:
    """One normalized node: a tree node at the enforcement level."""

    tree: str
    path: tuple[str, ...]
    devices: frozenset[str]


def _units_for_ref(trees: TreeSet, ref: NodeRef, elevel: dict[str, int],
                   author: str | None, counter: list[int]) -> tuple[list[Unit], frozenset[str]]:
    """Enforcement-level units of a reference: the primary selector's nodes
    expanded down to the tree's enforcement level, intersected with any
    refinement sets.  counter[0] accumulates expanded device volume."""
    if ref.keyword == "device-set":
        devices = frozenset(ref.labels)
        return [Unit("", ref.labels, devices)], devices
    primary = locate_nodes(trees, NodeRef(ref.keyword, ref.labels, (), ref.parent), author)
    if not primary:
        return [], frozenset()
    restriction: frozenset[str] | None = None
    for part in ref.refinements:
        hits = locate_nodes(trees, NodeRef(part.keyword, part.labels, (), part.parent), author)
        devices = frozenset(itertools.chain.from_iterable(n.entity_set() for _, n in hits))
        restriction = devices if restriction is None else (restriction & devices)
    units: list[Unit] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for tree_name, node in primary:
        level = elevel.get(tree_name, node.level)
        for sub in _descendants_at(node, level):
            devices = sub.devices
            if restriction is not None:
                devices = devices & restriction
            counter[0] += len(devices)
            key = (tree_name, sub.path)
            if devices and key not in seen:
                seen.add(key)
                units.append(Unit(tree_name, sub.path, devices))
    total = frozenset(itertools.chain.from_iterable(u.devices for u in units))
    return units, total


def _descendants_at(node: TreeNode, level: int) -> list[TreeNode]:
    if node.level >= level or not node.children:
        return [node]
    out: list[TreeNode] = []
    stack = [node]
    while stack:
        current = stack.pop()
        if current.level >= level or not current.children:
            out.append(current)
        else:
            stack.extend(reversed(current.children))
    return out


@dataclass
class NormalizedPolicy:
    policy: VIPolicy
    source_units: list[Unit]
    source_devices: frozenset[str]
    fragments: list["Fragment"]
    k_levels: dict[str, int]
    expanded_nodes: int

    def rewritten_policies(self) -> list[VIPolicy]:
        """Spec view: the policy rewritten over enforcement-level node sets,
        one policy per source unit (conditions and actions unchanged)."""
        out = []
        for i, unit in enumerate(self.source_units or [Unit("", (), self.source_devices)]):
            ref = NodeRef(keyword="device-set", labels=tuple(sorted(unit.devices)))
            pid = self.policy.policy_id if len(self.source_units) <= 1 \
                else f"{self.policy.policy_id}/{i}"
            out.append(replace(self.policy, policy_id=pid, source=ref))
        return out


@dataclass
class Fragment:
    policy_id: str
    seq: int
    author: str
    tags: tuple[str, ...]
    source: frozenset[str]
    target: frozenset[str]
    conditions: tuple[ConditionNode, ...]
    action_key: tuple  # ('cmd', attr, value) | ('acl', verdict, traffic) | ('notify', channel)
    profile: ConditionProfile
    variant: str

    def renders(self) -> dict:
        return {
            "policy": self.policy_id,
            "source": sorted(self.source),
            "target": sorted(self.target),
            "conditions": [c.render() for c in self.conditions],
            "action": list(self.action_key),
        }


def normalize(policy: VIPolicy, elevel: dict[str, int], trees: TreeSet,
              db: InfrastructureDB, vocab: Vocabulary, seq: int = 0) -> NormalizedPolicy:
    """Rewrite a policy's node references to enforcement-level units and split
    it into composable edge fragments, one per action."""
    counter = [0]
    profile = build_profile(policy, db, vocab)
    source_units, source_devices = _units_for_ref(
        trees, policy.source, elevel, policy.author_admin or None, counter)
    target_units, target_devices = _units_for_ref(
        trees, policy.target, elevel, policy.author_admin or None, counter)

    fragments: list[Fragment] = []
    conds = policy.canonical_conditions()
    base = dict(policy_id=policy.policy_id, seq=seq, author=policy.author_admin,
                tags=policy.precedence_tags, conditions=conds, profile=profile,
                variant=policy.variant)
    if policy.variant == "Acl":
        fragments.append(Fragment(source=source_devices, target=target_devices,
                                  action_key=("acl", policy.verdict, policy.traffic_type),
                                  **base))
    else:
        for action in policy.action_nodes():
            if action.kind == "IotCommand":
                if action.target is not None:
                    _, tgt = _units_for_ref(trees, action.target, elevel,
                                            policy.author_admin or None, counter)
                else:
                    tgt = target_devices
                fragments.append(Fragment(source=source_devices, target=tgt,
                                          action_key=("cmd", action.attr, action.value), **base))
            elif action.kind == "Notify":
                fragments.append(Fragment(source=source_devices, target=source_devices,
                                          action_key=("notify", action.message), **base))
            else:  # AclAdd / AclRemove carried by a trigger-action policy
                acl = action.acl
                _, asrc = _units_for_ref(trees, acl.source, elevel,
                                         policy.author_admin or None, counter)
                _, atgt = _units_for_ref(trees, acl.target, elevel,
                                         policy.author_admin or None, counter)
                verdict = acl.verdict if action.kind == "AclAdd" else "DENY"
                fragments.append(Fragment(source=asrc, target=atgt,
                                          action_key=("acl", verdict, acl.traffic_type), **base))

    k_levels: dict[str, int] = {}
    for tree_name, node in locate_nodes(trees, policy.source, policy.author_admin or None) + \
            locate_nodes(trees, policy.target, policy.author_admin or None):
        k_levels[tree_name] = max(k_levels.get(tree_name, 0), node.level)
    return NormalizedPolicy(policy=policy, source_units=source_units,
                            source_devices=source_devices, fragments=fragments,
                            k_levels=k_levels, expanded_nodes=counter[0])


def action_pair(key: tuple) -> tuple[str, str]:
    """Precedence-comparable (attribute, value) form of an action key."""
    if key[0] == "cmd":
        return (key[1], key[2])
    if key[0] == "acl":
        return ("acl", key[1])
    return ("notify", key[1] if len(key) > 1 else "")


def contradicts(a: tuple, b: tuple, vocab: Vocabulary) -> bool:
    """Do two action keys demand incompatible things?"""
    if a[0] == "notify" or b[0] == "notify":
        return False
    if a[0] == "acl" and b[0] == "acl":
        if a[1] == b[1]:
            return False
        ta, tb = a[2], b[2]
        return ta == tb or not ta or not tb
    if a[0] == "cmd" and b[0] == "cmd":
        return vocab.opposed((a[1], a[2]), (b[1], b[2]))
    return False


# ---------------------------------------------------------------------------
# the composed graph
# ---------------------------------------------------------------------------

@dataclass
class EdgeRecord:
    edge_id: int
    fragment: Fragment
    live: bool = True

    @property
    def source(self) -> frozenset[str]:
        return self.fragment.source

    @property
    def target(self) -> frozenset[str]:
        return self.fragment.target


@dataclass
class ConflictRecord:
    record_id: int
    kind: str  # 'Duplicate' | 'Resolved' | 'Unresolved'
    policies: tuple[str, str]
    overlap: frozenset[str]
    action_a: tuple
    action_b: tuple
    winner: str = ""
    rule: str = ""  # which precedence stage decided
    active: bool = True

    def to_dict(self) -> dict:
        return {
            "id": self.record_id,
            "kind": self.kind,
            "policies": sorted(self.policies),
            "overlap": sorted(self.overlap),
            "actions": [list(self.action_a), list(self.action_b)],
            "winner": self.winner,
            "rule": self.rule,
        }


@dataclass
class MaskedFragment:
    masked_id: int
    fragment: Fragment
    overlap: frozenset[str]
    winner_policy: str
    record_id: int
    tie: bool
    tombstone: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.masked_id,
            "policy": self.fragment.policy_id,
            "overlap": sorted(self.overlap),
            "winner": self.winner_policy,
            "record": self.record_id,
            "tie": self.tie,
            "tombstone": self.tombstone,
        }


@dataclass
class CompositionStats:
    source_probes: int = 0
    set_comparisons: int = 0
    cache_hits: int = 0
    expanded_nodes: int = 0
    cross_island_comparisons: int = 0
    comparisons: int = 0


class ComposedGraph:
    def __init__(self, trees: TreeSet, db: InfrastructureDB, vocab: Vocabulary,
                 prec: PrecedenceRules, use_fast_paths: bool = True):
        self.trees = trees
        self.db = db
        self.vocab = vocab
        self.prec = prec
        self.use_fast_paths = use_fast_paths
        self.policies: dict[str, NormalizedPolicy] = {}
        self.edges: dict[int, EdgeRecord] = {}
        self.member_index: dict[str, set[int]] = {}  # device -> live edge ids (by target)
        self.masked: list[MaskedFragment] = []
        self.conflicts: list[ConflictRecord] = []
        self.controlled_attrs: set[str] = set()
        self.stats = CompositionStats()
        self._edge_seq = 0
        self._record_seq = 0
        self._masked_seq = 0
        self._install_seq = 0
        self._cosat_cache: dict[tuple[str, str], str] = {}
        self.elevel: dict[str, int] = {}
        self._pending: list[Fragment] = []
        self._draining = False

    # -- public views ---------------------------------------------------------

    def live_edges(self) -> list[EdgeRecord]:
        return [e for e in self.edges.values() if e.live]

    def active_conflicts(self, kind: str | None = None) -> list[ConflictRecord]:
        out = [c for c in self.conflicts if c.active and (kind is None or c.kind == kind)]
        return sorted(out, key=lambda c: c.record_id)

    def active_masked(self) -> list[MaskedFragment]:
        return [m for m in self.masked if not m.tombstone]

    def nodes(self) -> list[frozenset[str]]:
        seen: dict[frozenset[str], None] = {}
        for edge in self.live_edges():
            seen.setdefault(edge.source)
            seen.setdefault(edge.target)
        return list(seen)

    def islands(self) -> list[set[str]]:
        """Connected components over live edges' device sets."""
        parent: dict[str, str] = {}

        def find(x: str) -> str:
            while parent.get(x, x) != x:
                parent[x] = parent.get(parent[x], parent[x])
                x = parent[x]
            return x

        def union(x: str, y: str):
            parent.setdefault(x, x)
            parent.setdefault(y, y)
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[rx] = ry

        for edge in self.live_edges():
            devices = sorted(edge.source | edge.target)
            for d in devices:
                parent.setdefault(d, d)
            for d in devices[1:]:
                union(devices[0], d)
        groups: dict[str, set[str]] = {}
        for d in parent:
            groups.setdefault(find(d), set()).add(d)
        return sorted(groups.values(), key=lambda g: sorted(g)[0])

    def canonical(self, include_masked: bool = True) -> tuple:
        """Order-insensitive structural form for isomorphism checks.

        Compares the live graph (every edge with its endpoint sets,
        conditions, action, and contributing policy) plus the installed
        policy set.  Conflict-log records are not part of the form: the
        composition scan is sequential, so which opponent a losing fragment
        is attributed to depends on encounter order, while the live state
        (and with it the masked remainder, which is its complement) does not."""
        dup_claimants: dict[tuple, set[str]] = {}
        for m in self.active_masked():
            key = (tuple(sorted(m.fragment.source)), tuple(sorted(m.fragment.target)),
                   tuple(c.render() for c in m.fragment.conditions), m.fragment.action_key)
            dup_claimants.setdefault(key, set()).add(m.fragment.policy_id)
        live = []
        for e in self.live_edges():
            key = (tuple(sorted(e.source)), tuple(sorted(e.target)),
                   tuple(c.render() for c in e.fragment.conditions), e.fragment.action_key)
            # identical fragments from twin policies are the same edge; name it
            # by the least claimant so attribution is order-insensitive
            claimants = {e.fragment.policy_id} | dup_claimants.get(key, set())
            live.append(key + (min(claimants),))
        return (tuple(sorted(live)),)

    def to_document(self) -> dict:
        node_ids: dict[frozenset[str], str] = {}
        nodes_doc = []
        for devices in sorted(self.nodes(), key=lambda s: sorted(s)):
            nid = f"n{len(node_ids)}"
            node_ids[devices] = nid
            nodes_doc.append({"id": nid, "devices": sorted(devices)})
        edges_doc = []
        for edge in sorted(self.live_edges(), key=lambda e: e.edge_id):
            edges_doc.append({
                "id": f"e{edge.edge_id}",
                "source": node_ids[edge.source],
                "target": node_ids[edge.target],
                "conditions": [c.render() for c in edge.fragment.conditions],
                "action": list(edge.fragment.action_key),
                "policy": edge.fragment.policy_id,
            })
        return {
            "nodes": nodes_doc,
            "edges": edges_doc,
            "islands": [sorted(i) for i in self.islands()],
            "conflicts": [c.to_dict() for c in self.active_conflicts()],
            "masked": [m.to_dict() for m in self.active_masked()],
            "policies": sorted(self.policies),
        }

    # -- composition ------------------------------------------------------------

    def _next_record(self, kind: str, frag_a: Fragment, frag_b: Fragment,
                     overlap: frozenset[str], winner: str = "", rule: str = "") -> ConflictRecord:
        self._record_seq += 1
        record = ConflictRecord(
            record_id=self._record_seq, kind=kind,
            policies=(frag_a.policy_id, frag_b.policy_id),
            overlap=overlap, action_a=frag_a.action_key, action_b=frag_b.action_key,
            winner=winner, rule=rule)
        self.conflicts.append(record)
        return record

    def _mask(self, fragment: Fragment, overlap: frozenset[str], winner: str,
              record_id: int, tie: bool) -> None:
        self._masked_seq += 1
        self.masked.append(MaskedFragment(
            masked_id=self._masked_seq, fragment=fragment, overlap=overlap,
            winner_policy=winner, record_id=record_id, tie=tie))

    def _add_edge(self, fragment: Fragment) -> None:
        self._edge_seq += 1
        record = EdgeRecord(edge_id=self._edge_seq, fragment=fragment)
        self.edges[record.edge_id] = record
        for device in fragment.target:
            self.member_index.setdefault(device, set()).add(record.edge_id)

    def _drop_edge(self, record: EdgeRecord) -> None:
        record.live = False
        for device in record.fragment.target:
            ids = self.member_index.get(device)
            if ids is not None:
                ids.discard(record.edge_id)

    def _candidates(self, fragment: Fragment) -> list[EdgeRecord]:
        if self.use_fast_paths:
            ids: set[int] = set()
            for device in fragment.target:
                self.stats.source_probes += 1
                ids |= self.member_index.get(device, set())
            out = [self.edges[i] for i in ids if self.edges[i].live]
        else:
            out = []
            for edge in self.edges.values():
                if not edge.live:
                    continue
                self.stats.set_comparisons += 1
                if edge.fragment.target & fragment.target:
                    out.append(edge)
        return sorted(out, key=lambda e: e.edge_id)

    def _cosat(self, a: Fragment, b: Fragment) -> str:
        key = (a.policy_id, b.policy_id) if a.policy_id <= b.policy_id else (b.policy_id, a.policy_id)
        if self.use_fast_paths and key in self._cosat_cache:
            self.stats.cache_hits += 1
            return self._cosat_cache[key]
        verdict = classify(a.profile, b.profile, self.vocab, self.controlled_attrs)
        if self.use_fast_paths:
            self._cosat_cache[key] = verdict
        return verdict

    def _insert_fragment(self, fragment: Fragment) -> None:
        """Queue a fragment and drain: restorations triggered by maskings are
        deferred so every fragment is matched against the complete live state.
        The live set converges to a fixpoint where each masked region loses to
        a live edge; without this, a fragment masked by an edge that later
        loses would stay dead on stale grounds and the outcome would depend
        on arrival order."""
        self._pending.append(fragment)
        self._drain()

    def _restore_victims_of(self, policy_id: str, region: frozenset[str] | None) -> None:
        """Re-queue fragments masked by a policy over a region it no longer
        holds (``None`` means everywhere)."""
        restored: list[Fragment] = []
        for m in self.masked:
            if m.tombstone or m.winner_policy != policy_id:
                continue
            lost = m.overlap if region is None else (m.overlap & region)
            if not lost:
                continue
            m.tombstone = True
            keep = m.overlap - lost
            if keep:
                self._mask(replace(m.fragment, target=keep), keep,
                           policy_id, m.record_id, m.tie)
            restored.append(replace(m.fragment, target=lost))
        for frag in sorted(restored, key=lambda f: (f.seq, f.policy_id)):
            if frag.policy_id in self.policies:
                self._pending.append(frag)

    def _insert_one(self, fragment: Fragment) -> None:
        if fragment.policy_id not in self.policies:
            return
        remaining = fragment
        for edge in self._candidates(fragment):
            if not edge.live or not remaining.target:
                continue
            other = edge.fragment
            if other.policy_id == remaining.policy_id:
                continue
            self.stats.comparisons += 1
            # duplicate: identical fragment already live; discard, but keep it
            # in the masked log so removing the original revives it
            if (other.source == remaining.source and other.target == remaining.target
                    and other.conditions == remaining.conditions
                    and other.action_key == remaining.action_key):
                record = self._next_record("Duplicate", remaining, other, remaining.target,
                                           winner=other.policy_id, rule="duplicate")
                self._mask(remaining, remaining.target, other.policy_id,
                           record.record_id, tie=False)
                return
            if not contradicts(remaining.action_key, other.action_key, self.vocab):
                continue
            if remaining.action_key[0] == "acl":
                if not (remaining.source & other.source):
                    continue
            overlap = remaining.target & other.target
            if not overlap:
                continue
            if self._cosat(remaining, other) != DEFINITE:
                continue
            outcome = self.prec.compare(
                remaining.author, other.author, action_pair(remaining.action_key),
                action_pair(other.action_key), remaining.tags, other.tags)
            if outcome == WIN_A:
                record = self._next_record("Resolved", remaining, other, overlap,
                                           winner=remaining.policy_id, rule=self._rule(remaining, other))
                self._split_loser_edge(edge, overlap, remaining.policy_id, record.record_id, tie=False)
            elif outcome == WIN_B:
                record = self._next_record("Resolved", remaining, other, overlap,
                                           winner=other.policy_id, rule=self._rule(other, remaining))
                remaining = self._shrink_incoming(remaining, overlap, other.policy_id,
                                                  record.record_id, tie=False)
                if remaining is None:
                    return
            else:
                record = self._next_record("Unresolved", remaining, other, overlap)
                if other.seq <= remaining.seq:
                    remaining = self._shrink_incoming(remaining, overlap, other.policy_id,
                                                      record.record_id, tie=True)
                    if remaining is None:
                        return
                else:
                    self._split_loser_edge(edge, overlap, remaining.policy_id,
                                           record.record_id, tie=True)
        if remaining.target:
            self._add_edge(remaining)

    def _rule(self, winner: Fragment, loser: Fragment) -> str:
        """Name the precedence stage that decided a resolution."""
        if self.prec.admin_beats(winner.author, loser.author):
            return f"admin:{winner.author}>{loser.author}"
        win_act = action_pair(winner.action_key)
        lose_act = action_pair(loser.action_key)
        if self.prec._action_beats(win_act, lose_act):
            return f"action:{win_act[0]}={win_act[1]}>{lose_act[0]}={lose_act[1]}"
        return f"custom:{winner.author}>{loser.author}"

    def _split_loser_edge(self, edge: EdgeRecord, overlap: frozenset[str],
                          winner: str, record_id: int, tie: bool) -> None:
        loser = edge.fragment
        self._drop_edge(edge)
        masked_part = replace(loser, target=overlap)
        self._mask(masked_part, overlap, winner, record_id, tie)
        remainder = loser.target - overlap
        if remainder:
            self._add_edge(replace(loser, target=remainder))
        # anything this policy had beaten on the lost region gets another shot
        self._restore_victims_of(loser.policy_id, overlap)

    def _shrink_incoming(self, fragment: Fragment, overlap: frozenset[str],
                         winner: str, record_id: int, tie: bool) -> Fragment | None:
        masked_part = replace(fragment, target=overlap)
        self._mask(masked_part, overlap, winner, record_id, tie)
        # regions the incoming fragment took earlier in this scan but now
        # loses go back to their previous holders
        self._restore_victims_of(fragment.policy_id, overlap)
        remainder = fragment.target - overlap
        if not remainder:
            return None
        return replace(fragment, target=remainder)

    def add_policies(self, normalized: Iterable[NormalizedPolicy]) -> list[ConflictRecord]:
        before = len(self.conflicts)
        batch = list(normalized)
        for np in batch:
            for frag in np.fragments:
                if frag.action_key[0] != "cmd":
                    continue
                attr, value = frag.action_key[1], frag.action_key[2]
                self.controlled_attrs.add(attr)
                for eff in self.vocab.command_effects(attr, value):
                    self.controlled_attrs.add(eff.attr)
                if attr in self.vocab.drives:
                    self.controlled_attrs.add(self.vocab.drives[attr])
        for np in batch:
            if np.policy.policy_id in self.policies:
                # identical re-add is a duplicate of every fragment
                existing = self.policies[np.policy.policy_id]
                if existing.policy == np.policy:
                    for frag in np.fragments:
                        self._next_record("Duplicate", frag, frag, frag.target,
                                          winner=np.policy.policy_id, rule="duplicate")
                    continue
            self._install_seq += 1
            seq = self._install_seq
            np = replace_seq(np, seq)
            self.policies[np.policy.policy_id] = np
            self.stats.expanded_nodes += np.expanded_nodes
            for frag in np.fragments:
                if frag.target:
                    self._insert_fragment(frag)
        return self.conflicts[before:]

    def resolve_tie(self, record: ConflictRecord, winner: str, loser: str) -> None:
        """Manually settle an unresolved conflict.  Picking the quarantined
        side displaces the incumbent's overlapping region."""
        record.kind = "Resolved"
        record.winner = winner
        record.rule = "manual"
        for m in self.masked:
            if m.tombstone or m.record_id != record.record_id:
                continue
            if m.fragment.policy_id == winner:
                m.tombstone = True
                for edge in list(self.edges.values()):
                    if not edge.live or edge.fragment.policy_id != loser:
                        continue
                    overlap = edge.fragment.target & m.fragment.target
                    if overlap and contradicts(edge.fragment.action_key,
                                               m.fragment.action_key, self.vocab):
                        self._split_loser_edge(edge, overlap, winner,
                                               record.record_id, tie=False)
                self._insert_fragment(m.fragment)
            else:
                m.tie = False

    def remove_policy(self, policy_id: str) -> list[ConflictRecord]:
        if policy_id not in self.policies:
            raise UnknownPolicyId(policy_id)
        del self.policies[policy_id]
        for edge in list(self.edges.values()):
            if edge.live and edge.fragment.policy_id == policy_id:
                self._drop_edge(edge)
        for record in self.conflicts:
            if policy_id in record.policies:
                record.active = False
        for m in self.masked:
            if not m.tombstone and m.fragment.policy_id == policy_id:
                m.tombstone = True
        before = len(self.conflicts)
        self._restore_victims_of(policy_id, None)
        self._drain()
        return self.conflicts[before:]

    def _drain(self) -> None:
        if self._draining:
            return
        self._draining = True
        guard = 0
        try:
            while self._pending:
                guard += 1
                if guard > 100_000:
                    raise RuntimeError("composition did not converge; "
                                       "precedence rules are likely cyclic")
                self._insert_one(self._pending.pop(0))
        finally:
            self._draining = False


def replace_seq(np: NormalizedPolicy, seq: int) -> NormalizedPolicy:
    np.fragments = [replace(f, seq=seq) for f in np.fragments]
    return np


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def compose(policies: Sequence[VIPolicy], trees: TreeSet, db: InfrastructureDB,
            vocab: Vocabulary, prec: PrecedenceRules,
            use_fast_paths: bool = True,
            elevel: dict[str, int] | None = None) -> ComposedGraph:
    if elevel is None:
        elevel = compute_elevel(policies, trees)
    graph = ComposedGraph(trees, db, vocab, prec, use_fast_paths=use_fast_paths)
    graph.elevel = elevel
    normalized = [normalize(p, elevel, trees, db, vocab) for p in policies]
    graph.add_policies(normalized)
    return graph


def incremental_update(graph: ComposedGraph, add: Sequence[VIPolicy],
                       remove: Sequence[str]) -> list[ConflictRecord]:
    """Apply removals then additions; returns the conflict records raised."""
    records: list[ConflictRecord] = []
    for policy_id in remove:
        records.extend(graph.remove_policy(policy_id))
    elevel = getattr(graph, "elevel", {})
    normalized = [normalize(p, elevel, graph.trees, graph.db, graph.vocab) for p in add]
    records.extend(graph.add_policies(normalized))
    return records


def resolve_precedence(a: Fragment, b: Fragment, prec: PrecedenceRules) -> str:
    return prec.compare(a.author, b.author, action_pair(a.action_key),
                        action_pair(b.action_key), a.tags, b.tags)
