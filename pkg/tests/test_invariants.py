"""Spec invariants that deserve their own independent checkers: the lowering
policy count against an IR walker, provenance spans, duplicate idempotence,
island isolation of comparisons, loop soundness against a standalone cycle
finder, and grammar totality for every operator."""

from __future__ import annotations

import pytest

from policyweave import corpus_path
from policyweave.composition import compose
from policyweave.engine import Engine, ProjectConfig
from policyweave.frontends import parse_app, lower
from policyweave.frontends.ir import IfBlock
from policyweave.precedence import PrecedenceRules
from policyweave.vigraph import parse_policy, serialize_policy


@pytest.fixture(scope="module")
def corpus_engine():
    return Engine(ProjectConfig.load(corpus_path() / "project.json")).run()


def _walker_branch_count(ir) -> int:
    """Independent count of (subscription x leaf-condition-branch) action
    groups: walks the raw statement tree, not AppIR.branches()."""

    def leaves_with_actions(stmts) -> int:
        direct_actions = sum(1 for s in stmts if not isinstance(s, IfBlock) and s.kind != "")
        count = 1 if direct_actions else 0
        for stmt in stmts:
            if isinstance(stmt, IfBlock):
                count += leaves_with_actions(stmt.then_body)
                if stmt.else_body is not None:
                    count += leaves_with_actions(stmt.else_body)
        return count

    total = 0
    for sub in ir.subscriptions:
        handler = ir.handlers.get(sub.handler)
        if handler is None:
            continue
        total += leaves_with_actions(handler.body)
    return total


def test_policy_count_matches_ir_walker(corpus_engine):
    for path in sorted((corpus_path() / "apps").iterdir()):
        dialect = {"smartapp": "smartapp", "rules": "openhab",
                   "applet": "ifttt", "mud": "mud"}.get(path.suffix[1:])
        if dialect in (None, "mud"):
            continue
        ir = parse_app(path.stem, path.read_text(), dialect)
        policies, _ = lower(ir, corpus_engine.vocab, corpus_engine.trees)
        assert len(policies) == _walker_branch_count(ir), path.name


def test_provenance_spans_point_at_subscriptions(corpus_engine):
    for app_id, mapping in corpus_engine.mappings.items():
        if mapping.dialect == "mud":
            continue
        source = (corpus_path() / "apps" / f"{app_id}{_ext(mapping.dialect)}").read_text()
        lines = source.splitlines()
        for pid in mapping.policy_ids:
            span = mapping.spans[pid]
            assert 1 <= span.line <= len(lines)
            assert "subscription" in span.detail


def _ext(dialect: str) -> str:
    return {"smartapp": ".smartapp", "openhab": ".rules", "ifttt": ".applet"}[dialect]


def test_duplicate_idempotence(corpus_engine):
    db, trees, vocab = corpus_engine.db, corpus_engine.trees, corpus_engine.vocab
    base = [corpus_engine.policies[p] for p in ("s6", "s8", "s12")]
    clones = [parse_policy(serialize_policy(p).replace(p.policy_id, p.policy_id + "-copy", 1))
              for p in base]
    prec = PrecedenceRules.empty()
    solo = compose(base, trees, db, vocab, prec)
    doubled = compose(base + clones, trees, db, vocab, prec)
    assert doubled.canonical() == solo.canonical()
    dups = doubled.active_conflicts("Duplicate")
    # every fragment of every clone is discarded as a duplicate
    expected = sum(len(doubled.policies[p.policy_id].fragments) for p in clones)
    assert len(dups) == expected


def test_island_isolation_of_comparisons(corpus_engine):
    db, trees, vocab = corpus_engine.db, corpus_engine.trees, corpus_engine.vocab
    camera_a = parse_policy(
        'policy{"ia"} @admin{"x"} : source-node{devices{"cam-living"}} -> '
        'iot-commands-action{camera_power=ON} -> target-node{devices{"cam-living"}}')
    camera_b = parse_policy(
        'policy{"ib"} @admin{"y"} : source-node{devices{"cam-living"}} -> '
        'iot-commands-action{camera_power=OFF} -> target-node{devices{"cam-living"}}')
    lock_c = parse_policy(
        'policy{"ic"} @admin{"z"} : source-node{devices{"door-back"}} -> '
        'iot-commands-action{lock_state=locked} -> target-node{devices{"door-back"}}')
    graph = compose([camera_a, camera_b], trees, db, vocab, PrecedenceRules.empty())
    comparisons_within = graph.stats.comparisons
    assert comparisons_within >= 1  # the camera pair was compared
    graph2 = compose([camera_a, camera_b, lock_c], trees, db, vocab, PrecedenceRules.empty())
    # the disjoint-island policy adds zero cross-island comparisons
    assert graph2.stats.comparisons == comparisons_within
    assert len(graph2.islands()) == 2


def _independent_cycle_exists(members: set[str], graph, vocab) -> bool:
    """Standalone DFS cycle finder over the trigger/contention graph of the
    given policies: effect->condition edges plus bidirectional contention
    edges between opposed actions on shared devices."""
    from policyweave.composition import contradicts

    fragments = {pid: graph.policies[pid].fragments for pid in members}
    sources = {pid: graph.policies[pid].source_devices for pid in members}
    adjacency: dict[str, set[str]] = {pid: set() for pid in members}
    for p in members:
        for q in members:
            if p == q:
                continue
            for fp in fragments[p]:
                if fp.action_key[0] != "cmd":
                    continue
                attr, value = fp.action_key[1], fp.action_key[2]
                prof_q = fragments[q][0].profile if fragments[q] else None
                if prof_q is None:
                    continue
                satisfied = (attr in prof_q.values and value in prof_q.values[attr])
                if satisfied and fp.target & sources[q]:
                    adjacency[p].add(q)
                for fq in fragments[q]:
                    if fq.action_key[0] == "cmd" and fp.target & fq.target \
                            and contradicts(fp.action_key, fq.action_key, vocab):
                        adjacency[p].add(q)
                        adjacency[q].add(p)

    seen: set[str] = set()

    def dfs(start: str, node: str, path: set[str]) -> bool:
        for nxt in adjacency[node]:
            if nxt == start and len(path) >= 2:
                return True
            if nxt not in path and dfs(start, nxt, path | {nxt}):
                return True
        return False

    return any(dfs(pid, pid, {pid}) for pid in members)


def test_loop_soundness_against_independent_cycle_finder(corpus_engine):
    loops = [f for f in corpus_engine.findings if f.kind == "Loop"]
    assert loops
    for finding in loops:
        assert _independent_cycle_exists(set(finding.policies), corpus_engine.graph,
                                         corpus_engine.vocab), finding.policies


def test_grammar_totality_every_operator():
    text = (
        'policy{"all-ops"} @admin{"a"} @precedence{"p1"} :\n'
        '    source-node{location{"BLDG1→Floor1"}.parent{"Infrastructure"}}'
        '.source-state{"armed"}\n'
        '    → time{"22:00-07:00"}\n'
        "    -> temperature{<95} . outdoor_humidity{!40-50} . motion{=active} . attrx{>5}\n"
        "    -> iot-commands-action{a=1} >> iot-commands-action{b=2} || "
        'notify{"SMS"} >> +acl{devices{"x"} => devices{"y"} . traffic-type{"t"} . '
        'nfc{"Firewall >> DPI"}} >> -acl{devices{"x"} !=> devices{"z"}}\n'
        '    -> target-node{devices{"d1"}}.target-state{"on"}\n'
    )
    policy = parse_policy(text)
    rendered = serialize_policy(policy)
    assert parse_policy(rendered) == policy
    kinds = [a.kind for a in policy.action_nodes()]
    assert kinds.count("IotCommand") == 2 and "Notify" in kinds
    assert "AclAdd" in kinds and "AclRemove" in kinds
    acl = next(a for a in policy.action_nodes() if a.kind == "AclAdd").acl
    assert acl.nfc == ("Firewall", "DPI") and acl.verdict == "ALLOW"
    deny = next(a for a in policy.action_nodes() if a.kind == "AclRemove").acl
    assert deny.verdict == "DENY"
    ops = {c.constraint.op for c in policy.conditions if c.constraint}
    assert ops == {"<", "!", "=", ">"}
    assert policy.source_state == "armed" and policy.target_state == "on"
