from __future__ import annotations

import json

import pytest

from policyweave import corpus_path
from policyweave.composition import compose
from policyweave.engine import Engine, ProjectConfig
from policyweave.errors import NoCapableDevice, UnsupportedFindingKind
from policyweave.analysis import Finding
from policyweave.frontends import parse_app, lower
from policyweave.precedence import PrecedenceRules
from policyweave.reconcile import infer_policy, place_rules, reconcile, write_rule_bundle


@pytest.fixture(scope="module")
def corpus_engine():
    return Engine(ProjectConfig.load(corpus_path() / "project.json")).run()


def test_place_rules_uniform_split():
    rules = [f"r{i}" for i in range(10)]
    assignment = place_rules(rules, {r: ["devA", "devB"] for r in rules})
    loads = {}
    for device in assignment.values():
        loads[device] = loads.get(device, 0) + 1
    assert loads == {"devA": 5, "devB": 5}


def test_place_rules_least_loaded_trace():
    assignment = place_rules(["r1", "r2", "r3"],
                             {"r1": ["d1"], "r2": ["d1"], "r3": ["d1", "d2"]})
    assert assignment == {"r1": "d1", "r2": "d1", "r3": "d2"}


def test_place_rules_single_candidate_identity():
    assignment = place_rules(["a", "b"], {"a": ["d1"], "b": ["d2"]})
    assert assignment == {"a": "d1", "b": "d2"}


def test_place_rules_no_candidates_rejected():
    with pytest.raises(NoCapableDevice):
        place_rules(["r"], {"r": []})


def test_place_rules_balance_bound():
    # greedy max load stays within +1 of the optimum on equal-candidate pools
    import math
    import random

    rng = random.Random(5)
    for _ in range(50):
        n_rules = rng.randrange(1, 40)
        devices = [f"d{i}" for i in range(rng.randrange(1, 8))]
        rules = [f"r{i}" for i in range(n_rules)]
        assignment = place_rules(rules, {r: devices for r in rules})
        loads = {}
        for device in assignment.values():
            loads[device] = loads.get(device, 0) + 1
        optimal = math.ceil(n_rules / len(devices))
        assert max(loads.values()) <= optimal + 1


def test_reconcile_requires_conflict_free_graph(corpus_engine):
    with pytest.raises(ValueError, match="unresolved"):
        reconcile(corpus_engine.graph, corpus_engine.mappings, corpus_engine.db)


def test_reconcile_clean_subset_round_trips(corpus_engine):
    """Emit rules for a conflict-free subset, parse them back through the
    frontends, recompose, and compare graphs."""
    db, trees, vocab = corpus_engine.db, corpus_engine.trees, corpus_engine.vocab
    keep = ["s8", "s12", "s6", "s2"]
    policies = [corpus_engine.policies[pid] for pid in keep]
    graph = compose(policies, trees, db, vocab, PrecedenceRules.empty())
    assert not graph.active_conflicts("Unresolved")
    rules = reconcile(graph, corpus_engine.mappings, db)
    assert {r.origin_policies[0] for r in rules} == set(keep)

    reparsed = []
    for rule in rules:
        if rule.dialect == "neutral":
            from policyweave.vigraph import parse_policy_file

            reparsed.extend(parse_policy_file(rule.text))
        else:
            ir = parse_app(rule.rule_id, rule.text, rule.dialect)
            lowered, _ = lower(ir, vocab, trees)
            reparsed.extend(lowered)
    for p in reparsed:
        assert not p.policy_id.startswith("rule-") or True
    regraph = compose(reparsed, trees, db, vocab, PrecedenceRules.empty())

    def shape(graph):
        return sorted(
            (tuple(sorted(e.fragment.source)), tuple(sorted(e.fragment.target)),
             tuple(c.render() for c in e.fragment.conditions), e.fragment.action_key)
            for e in graph.live_edges())

    assert shape(regraph) == shape(graph)


def test_rule_bundle_manifest(tmp_path, corpus_engine):
    db, trees, vocab = corpus_engine.db, corpus_engine.trees, corpus_engine.vocab
    policies = [corpus_engine.policies[pid] for pid in ("s8", "s12")]
    graph = compose(policies, trees, db, vocab, PrecedenceRules.empty())
    rules = reconcile(graph, corpus_engine.mappings, db)
    manifest = write_rule_bundle(rules, tmp_path / "bundle")
    assert len(manifest["rules"]) == len(rules)
    written = json.loads((tmp_path / "bundle" / "manifest.json").read_text())
    assert written == manifest
    for entry in manifest["rules"]:
        assert (tmp_path / "bundle" / entry["file"]).exists()


def test_infer_policy_for_time_gap(corpus_engine):
    gap = next(f for f in corpus_engine.findings
               if f.kind == "Gap" and f.evidence["attribute"] == "time")
    proposal = infer_policy(gap, corpus_engine.graph, 1)
    assert proposal.status == "Pending"
    assert proposal.replaces == "s12"  # nearest covering schedule
    assert any(c.kind == "Temporal" and str(c.window) == "21:00-09:00"
               for c in proposal.proposal.conditions)
    assert "21:00-09:00" in proposal.rationale


def test_infer_policy_for_potential(corpus_engine):
    finding = next(f for f in corpus_engine.findings if f.kind == "PotentialRuntime")
    proposal = infer_policy(finding, corpus_engine.graph, 2)
    assert proposal.finding_kind == "PotentialRuntime"
    assert proposal.replaces in finding.policies
    # the guard is the complement of the counterpart's trigger region
    original = corpus_engine.policies[proposal.replaces]
    added = [c for c in proposal.proposal.conditions if c not in original.conditions]
    assert len(added) == 1
    assert added[0].constraint is not None and added[0].constraint.op == "!"


def test_infer_policy_rejects_rogue():
    with pytest.raises(UnsupportedFindingKind):
        infer_policy(Finding(kind="Rogue", policies=("x",), evidence={}), None, 0)


def test_accepted_proposal_clears_the_finding(corpus_engine):
    """Closure check: applying the potential-conflict proposal makes the pair
    provably exclusive."""
    db, trees, vocab = corpus_engine.db, corpus_engine.trees, corpus_engine.vocab
    from policyweave.analysis import detect_potential

    pols = [corpus_engine.policies["s10"], corpus_engine.policies["s15"]]
    graph = compose(pols, trees, db, vocab, PrecedenceRules.empty())
    findings = detect_potential(pols, graph, {}, PrecedenceRules.empty(), vocab, db)
    assert len(findings) == 1
    proposal = infer_policy(findings[0], graph, 3)
    surviving = [p for p in pols if p.policy_id != proposal.replaces] + [proposal.proposal]
    regraph = compose(surviving, trees, db, vocab, PrecedenceRules.empty())
    refindings = detect_potential(surviving, regraph, {}, PrecedenceRules.empty(), vocab, db)
    assert refindings == []
