"""Acceptance gate: every release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` for one pass/fail line per
criterion; each test also prints an ``ACCEPTANCE ... PASS`` line.
"""

from __future__ import annotations

import itertools
import random
import time

import numpy as np
import pytest

from policyweave import corpus_path
from policyweave.composition import compose, incremental_update, normalize
from policyweave.analysis import detect_potential
from policyweave.engine import Engine, ProjectConfig
from policyweave.errors import TooFewPolicies
from policyweave.intervals import Interval, Region
from policyweave.inventory import ingest_inventory
from policyweave.precedence import PrecedenceRules
from policyweave.synth import (
    synth_inventory,
    synth_policies,
    synth_precedence,
    synth_trees,
    synth_vocabulary,
)
from policyweave.trees import TreeSet, build_tree, parse_abstraction_mapping
from policyweave.vigraph import parse_policy
from policyweave.vocab import parse_vocabulary
from policyweave.frontends import parse_app, sanity_check


def _ok(name: str):
    print(f"ACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
# 1. corpus regression
# ---------------------------------------------------------------------------

def test_corpus_regression_exact_findings():
    t0 = time.perf_counter()
    engine = Engine(ProjectConfig.load(corpus_path() / "project.json")).run()
    elapsed = time.perf_counter() - t0

    unresolved = {tuple(sorted(c.policies))
                  for c in engine.graph.active_conflicts("Unresolved")}
    assert unresolved == {("s1", "s2"), ("s1", "s3"), ("s1", "s14"), ("s10", "s9")}

    by_kind: dict[str, list] = {}
    for finding in engine.findings:
        by_kind.setdefault(finding.kind, []).append(tuple(sorted(finding.policies)))

    assert sorted(by_kind.get("Rogue", [])) == [("s13",), ("s4",), ("s5",)]
    assert by_kind.get("Chain", []) == [("s10", "s7")]
    assert sorted(by_kind.get("Loop", [])) == [("s1", "s3"), ("s5", "s6", "s7")]
    loops = {tuple(sorted(f.policies)): f for f in engine.findings if f.kind == "Loop"}
    assert loops[("s1", "s3")].evidence["toggling"] is True
    assert loops[("s5", "s6", "s7")].evidence["toggling"] is True

    gaps = {tuple(sorted(f.policies)): f.evidence for f in engine.findings if f.kind == "Gap"}
    assert set(gaps) == {("s12", "s5"), ("s14",)}
    assert gaps[("s12", "s5")]["uncovered"] == ["21:00-09:00"]
    assert gaps[("s14",)]["uncovered"] == ["(74, 95]"]

    assert by_kind.get("PotentialRuntime", []) == [("s10", "s15")]
    assert by_kind.get("AccessViolation", []) == []
    assert engine.report.counts["sanity:critical"] == 0

    assert elapsed < 5.0, f"corpus run took {elapsed:.2f}s"
    _ok(f"corpus-regression ({elapsed:.2f}s)")


# ---------------------------------------------------------------------------
# 2. incremental oracle
# ---------------------------------------------------------------------------

def _conflictful_env():
    records = []
    for i in range(20):
        records.append({
            "id": f"d{i}", "vendor": f"v{i % 3}", "category": f"c{i % 4}",
            "location": ["B0", f"F{i % 2}", f"R{i % 5}"],
            "capabilities": {"power": {"enum": ["on", "off"]}},
        })
    db = ingest_inventory(records, {"level": {"range": [0, 100]}})
    trees = TreeSet([build_tree(db, parse_abstraction_mapping(
        'abstraction-tree{"All"} = location{*}: floors{*}: device-category{*}: devices{*}'),
        "global")])
    vocab = parse_vocabulary("")
    return db, trees, vocab


def _random_policy(rng: random.Random, i: int):
    cat = f"c{rng.randrange(4)}"
    value = rng.choice(["on", "off"])
    start = rng.randrange(24)
    end = (start + 1 + rng.randrange(12)) % 24
    author = rng.choice(["a", "b", "c"])
    text = (f'policy{{"rp{i}"}} @admin{{"{author}"}} : '
            f'source-node{{device-category{{"{cat}"}}}} '
            f'-> time{{"{start:02d}:00-{end:02d}:00"}} '
            f"-> iot-commands-action{{power={value}}} "
            f'-> target-node{{device-category{{"{cat}"}}}}')
    return parse_policy(text)


@pytest.mark.parametrize("precedence_mode", ["total", "ties"])
def test_incremental_oracle_matches_full_recompose(precedence_mode):
    db, trees, vocab = _conflictful_env()
    if precedence_mode == "total":
        prec = PrecedenceRules(admin_pairs={("a", "b"), ("b", "c"), ("a", "c")})
    else:
        prec = PrecedenceRules.empty()
    rng = random.Random(42 if precedence_mode == "total" else 43)
    trials = 100  # x2 parametrized modes = 200 randomized sequences
    for trial in range(trials):
        pool = [_random_policy(rng, i + trial * 1000) for i in range(rng.randrange(5, 50))]
        current = list(pool[: rng.randrange(2, len(pool) + 1)])
        graph = compose(current, trees, db, vocab, prec)
        spare = [p for p in pool if p not in current]
        for _ in range(6):
            if spare and (not current or rng.random() < 0.5):
                policy = spare.pop()
                current.append(policy)
                incremental_update(graph, [policy], [])
            elif current:
                victim = current.pop(rng.randrange(len(current)))
                incremental_update(graph, [], [victim.policy_id])
            baseline = compose(current, trees, db, vocab, prec)
            assert graph.canonical() == baseline.canonical(), \
                f"divergence in trial {trial} ({precedence_mode})"
    _ok(f"incremental-oracle[{precedence_mode}] ({trials} sequences)")


# ---------------------------------------------------------------------------
# 3. order independence
# ---------------------------------------------------------------------------

def test_order_independence_under_total_precedence():
    # the premise is a total order over every conflicting pair: one distinct
    # ranked author per policy delivers exactly that
    db, trees, vocab = _conflictful_env()
    rng = random.Random(7)
    policies = []
    for i in range(30):
        policy = _random_policy(rng, i)
        from dataclasses import replace

        policies.append(replace(policy, author_admin=f"u{i}"))
    pairs = {(f"u{i}", f"u{j}") for i in range(30) for j in range(i + 1, 30)}
    prec = PrecedenceRules(admin_pairs=pairs)
    reference = compose(policies, trees, db, vocab, prec).canonical(include_masked=False)
    for perm in range(50):
        shuffled = policies[:]
        rng.shuffle(shuffled)
        got = compose(shuffled, trees, db, vocab, prec).canonical(include_masked=False)
        assert got == reference, f"permutation {perm} diverged"
    _ok("order-independence (50 permutations)")


# ---------------------------------------------------------------------------
# 4. normalization conservation
# ---------------------------------------------------------------------------

def test_normalization_preserves_device_sets_1000():
    db = synth_inventory(1500, seed=21)
    trees = synth_trees(db, 30, seed=21)
    vocab = synth_vocabulary()
    rng = np.random.default_rng(21)
    checked = 0
    for depth in (1, 2, 3, 4):
        policies = synth_policies(db, trees, 250, depth=depth, seed=int(rng.integers(1 << 30)))
        from policyweave.composition import compute_elevel

        elevel = compute_elevel(policies, trees)
        for policy in policies:
            before = policy.source.resolve(trees, policy.author_admin or None)
            norm = normalize(policy, elevel, trees, db, vocab)
            after = frozenset().union(*(u.devices for u in norm.source_units)) \
                if norm.source_units else frozenset()
            assert after == before, policy.policy_id
            checked += 1
    assert checked >= 1000
    _ok(f"normalization-conservation ({checked} policies)")


# ---------------------------------------------------------------------------
# 5. gap partition
# ---------------------------------------------------------------------------

def test_gap_partition_500_instances():
    rng = random.Random(99)
    domain = Interval(0, 100)
    for _ in range(500):
        covered = Region.empty()
        for _ in range(rng.randrange(0, 6)):
            lo = rng.uniform(0, 100)
            hi = rng.uniform(0, 100)
            lo, hi = min(lo, hi), max(lo, hi)
            covered = covered.union(Region.span(lo, hi, rng.random() < 0.5, rng.random() < 0.5))
        covered = covered.intersect(Region([domain]))
        gaps = covered.complement_within(domain)
        assert covered.intersect(gaps).is_empty()
        assert covered.union(gaps) == Region([domain])
    _ok("gap-partition (500 instances)")


# ---------------------------------------------------------------------------
# 6. potential-conflict oracle recall
# ---------------------------------------------------------------------------

def _discretized_instance(rng: random.Random, index: int):
    n_attrs = rng.randrange(2, 11)
    n_vals = rng.randrange(2, 9)
    domains = {f"attr{a}": {"enum": [f"v{x}" for x in range(n_vals)]} for a in range(n_attrs)}
    db = ingest_inventory(
        [{"id": "dev", "vendor": "v", "category": "c", "location": ["B"],
          "capabilities": {"act": {"enum": ["on", "off"]}}}], domains)
    trees = TreeSet([build_tree(db, parse_abstraction_mapping(
        'abstraction-tree{"All"} = device-category{*}: devices{*}'), "global")])
    vocab = parse_vocabulary("")
    policies = []
    for i in range(rng.randrange(3, 8)):
        conds = []
        for attr in rng.sample(range(n_attrs), rng.randrange(0, min(4, n_attrs) + 1)):
            op = rng.choice(["=", "!"])
            conds.append(f"attr{attr}{{{op}v{rng.randrange(n_vals)}}}")
        value = rng.choice(["on", "off"])
        cond_text = " -> ".join(conds)
        middle = f"-> {cond_text} " if cond_text else ""
        text = (f'policy{{"q{index}-{i}"}} @admin{{"u{i}"}} : source-node{{devices{{"dev"}}}} '
                f"{middle}-> iot-commands-action{{act={value}}} "
                f'-> target-node{{devices{{"dev"}}}}')
        policies.append(parse_policy(text))
    return db, trees, vocab, policies, n_vals


def _oracle_cosat(pa, pb, n_vals: int) -> bool:
    """Brute-force enumeration over the discretized space of the constrained
    attributes: is there a joint assignment satisfying both condition sets?"""
    constraints: dict[str, list[tuple[str, str]]] = {}
    for policy in (pa, pb):
        for cond in policy.conditions:
            if cond.constraint is None:
                continue
            constraints.setdefault(cond.constraint.attr, []).append(
                (cond.constraint.op, cond.constraint.value))
    attrs = sorted(constraints)
    values = [f"v{x}" for x in range(n_vals)]
    for assignment in itertools.product(values, repeat=len(attrs)):
        bound = dict(zip(attrs, assignment))
        satisfied = True
        for attr, pairs in constraints.items():
            for op, val in pairs:
                holds = bound[attr] == val
                if (op == "=") != holds:
                    satisfied = False
                    break
            if not satisfied:
                break
        if satisfied:
            return True
    return False


def test_potential_oracle_recall_100_instances():
    rng = random.Random(2024)
    total_reported = 0
    total_oracle = 0
    oracle_and_reported = 0
    for index in range(100):
        db, trees, vocab, policies, n_vals = _discretized_instance(rng, index)
        graph = compose(policies, trees, db, vocab, PrecedenceRules.empty())
        try:
            findings = detect_potential(policies, graph, {}, PrecedenceRules.empty(),
                                        vocab, db, seed=0)
        except TooFewPolicies:
            continue
        reported = {tuple(sorted(f.policies)) for f in findings}
        reported |= {tuple(sorted(c.policies))
                     for c in graph.active_conflicts("Unresolved")}
        by_id = {p.policy_id: p for p in policies}
        oracle_pairs = set()
        for a, b in itertools.combinations(sorted(by_id), 2):
            pa, pb = by_id[a], by_id[b]
            act_a = pa.action_nodes()[0]
            act_b = pb.action_nodes()[0]
            if act_a.value == act_b.value:
                continue
            if _oracle_cosat(pa, pb, n_vals):
                oracle_pairs.add(tuple(sorted((a, b))))
        missing = oracle_pairs - reported
        assert not missing, f"instance {index}: oracle pairs missed: {missing}"
        total_oracle += len(oracle_pairs)
        total_reported += len(reported)
        oracle_and_reported += len(oracle_pairs & reported)
    precision = oracle_and_reported / total_reported if total_reported else 1.0
    _ok(f"potential-oracle-recall (100 instances, recall=1.0, precision={precision:.3f})")


# ---------------------------------------------------------------------------
# 7. scaling: abstraction trees
# ---------------------------------------------------------------------------

def test_tree_scaling_400_trees_100k_leaves():
    db_half = synth_inventory(20_000, n_buildings=20, n_floors=5, n_rooms=5, seed=7)
    t0 = time.perf_counter()
    synth_trees(db_half, 400, seed=7)
    t_half = time.perf_counter() - t0

    db = synth_inventory(40_000, n_buildings=20, n_floors=5, n_rooms=5, seed=7)
    t0 = time.perf_counter()
    trees = synth_trees(db, 400, seed=7)
    t_full = time.perf_counter() - t0
    total_leaves = sum(len(t.leaves()) for t in trees)

    assert len(trees) == 400
    assert total_leaves >= 95_000, f"only {total_leaves} leaves"
    assert t_full < 10.0, f"tree construction took {t_full:.2f}s"
    assert t_full < 2.5 * max(t_half, 1e-9), \
        f"doubling leaves cost {t_full / t_half:.2f}x (> 2.5x)"
    _ok(f"tree-scaling ({total_leaves} leaves in {t_full:.2f}s, x{t_full / t_half:.2f} growth)")


# ---------------------------------------------------------------------------
# 8. scaling: composition + fast-path probe counters
# ---------------------------------------------------------------------------

def test_composition_scaling_900_policies():
    db = synth_inventory(2000, seed=3)
    trees = synth_trees(db, 40, seed=3)
    vocab = synth_vocabulary(30)
    prec = synth_precedence()
    policies = synth_policies(db, trees, 900, 30, depth=4, seed=3)
    assert len(policies) >= 850
    t0 = time.perf_counter()
    compose(policies, trees, db, vocab, prec)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"composition took {elapsed:.1f}s"

    disjoint = synth_policies(db, trees, 900, 30, depth=4, seed=5, disjoint=True)
    graph = compose(disjoint, trees, db, vocab, prec)
    n = len(disjoint)
    assert graph.stats.source_probes <= 20 * n, \
        f"{graph.stats.source_probes} probes for {n} non-overlapping policies"
    _ok(f"composition-scaling (900 in {elapsed:.2f}s; "
        f"probes {graph.stats.source_probes} <= 20n for n={n})")


# ---------------------------------------------------------------------------
# 9. incremental latency ratio
# ---------------------------------------------------------------------------

def test_incremental_latency_ratio():
    db = synth_inventory(2000, seed=3)
    trees = synth_trees(db, 40, seed=3)
    vocab = synth_vocabulary(30)
    prec = synth_precedence()
    policies = synth_policies(db, trees, 900, 30, depth=3, seed=13)
    t0 = time.perf_counter()
    graph = compose(policies, trees, db, vocab, prec)
    t_full = time.perf_counter() - t0
    changed = policies[:10]
    t0 = time.perf_counter()
    incremental_update(graph, [], [p.policy_id for p in changed])
    incremental_update(graph, changed, [])
    t_inc = time.perf_counter() - t0
    ratio = t_full / max(t_inc, 1e-9)
    assert ratio >= 10.0, f"incremental only {ratio:.1f}x faster"
    _ok(f"incremental-latency ({ratio:.0f}x faster than full)")


# ---------------------------------------------------------------------------
# 10. depth effect
# ---------------------------------------------------------------------------

def test_depth_effect_level1_expands_more():
    db = synth_inventory(400, seed=11)
    trees = synth_trees(db, 12, seed=11)
    vocab = synth_vocabulary(30)
    prec = synth_precedence()
    shallow = synth_policies(db, trees, 5000, 30, depth=1, seed=11)
    deep = synth_policies(db, trees, 5000, 30, depth=4, seed=11)
    g1 = compose(shallow, trees, db, vocab, prec)
    g4 = compose(deep, trees, db, vocab, prec)
    assert g1.stats.expanded_nodes > g4.stats.expanded_nodes, \
        (g1.stats.expanded_nodes, g4.stats.expanded_nodes)
    _ok(f"depth-effect (level1 expanded {g1.stats.expanded_nodes} > "
        f"level4 {g4.stats.expanded_nodes})")


# ---------------------------------------------------------------------------
# 11. sanity detection on planted defects
# ---------------------------------------------------------------------------

def _planted_app(kind: str, i: int) -> tuple[str, str]:
    name = f"fx{i}"
    if kind == "UndefinedReference":
        return ("smartapp", f'''definition(name: "{name}", author: "x")
def installed() {{
    subscribe(ghosts, "motion.active", go)
}}
def go(evt) {{
    ghosts.set("camera_power", "ON")
}}
''')
    if kind == "UnusedDefinition":
        return ("smartapp", f'''definition(name: "{name}", author: "x")
val spare{i} = 1
input "cams", "capability.camera"
def installed() {{
    subscribe(cams, "always", keep)
}}
def keep(evt) {{
    cams.set("camera_power", "ON")
}}
''')
    if kind == "EmptyConditionalBlock":
        return ("smartapp", f'''definition(name: "{name}", author: "x")
input "cams", "capability.camera"
def installed() {{
    subscribe(cams, "always", keep)
}}
def keep(evt) {{
    if (state(cams, "camera_power") == "OFF") {{
    }}
    cams.set("camera_power", "ON")
}}
''')
    if kind == "EmptyDefinition":
        return ("smartapp", f'''definition(name: "{name}", author: "x")
input "cams", "capability.camera"
def installed() {{
    subscribe(cams, "always", keep)
}}
def keep(evt) {{
}}
''')
    if kind == "UnbalancedDelimiter":
        return ("openhab", f'''author "x"
rule "{name}"
when
    Item CoffeeMachine changed to "on"
then
    log("coffee state"
end
''')
    if kind == "MissingQuote":
        return ("smartapp", f'''definition(name: "{name}, author: "x")
input "cams", "capability.camera"
def installed() {{
    subscribe(cams, "always", keep)
}}
def keep(evt) {{
    cams.set("camera_power", "ON")
}}
''')
    if kind == "ImproperClosure":
        return ("smartapp", f'''definition(name: "{name}", author: "x")
input "cams", "capability.camera"
def installed() {{
    subscribe(cams, "always", keep)
}}
def keep(evt) {{
    cams.set("camera_power", "ON")
}}
}}
''')
    raise AssertionError(kind)


SEVERITY_BY_KIND = {
    "UndefinedReference": "Critical",
    "EmptyConditionalBlock": "Critical",
    "UnbalancedDelimiter": "Critical",
    "MissingQuote": "Critical",
    "ImproperClosure": "Critical",
    "UnusedDefinition": "Low",
    "EmptyDefinition": "Low",
}


def test_sanity_detection_50_planted_apps():
    kinds = list(SEVERITY_BY_KIND)
    detected = 0
    for i in range(50):
        kind = kinds[i % len(kinds)]
        dialect, source = _planted_app(kind, i)
        report = sanity_check(parse_app(f"fx{i}", source, dialect))
        hits = [f for f in report.findings if f.kind == kind]
        assert hits, f"app fx{i}: planted {kind} not detected"
        assert all(f.severity == SEVERITY_BY_KIND[kind] for f in hits), \
            f"app fx{i}: wrong severity for {kind}"
        detected += 1
    assert detected == 50
    _ok("sanity-detection (50 planted apps, 100% recall)")
