from __future__ import annotations

import pytest

from policyweave.analysis import (
    coverage_partition,
    detect_access_violations,
    detect_loops,
    detect_potential,
    detect_rogue,
    gap_analysis,
)
from policyweave.composition import compose
from policyweave.errors import TooFewPolicies
from policyweave.inventory import ingest_inventory
from policyweave.precedence import PrecedenceRules
from policyweave.trees import TreeSet, build_tree, parse_abstraction_mapping
from policyweave.vigraph import parse_policy as P
from policyweave.vocab import parse_vocabulary

VOCAB = parse_vocabulary("""
[attributes]
outdoor_temperature: environmental unit=F
thermostat_f: setpoint drives=temperature unit=F

[opposes]
hvac_mode{=off} opposes thermostat_f{*}

[grants]
lock_state{=unlocked}
""")


def _dev(i, cat, loc, caps=None, window=None):
    rec = {"id": i, "vendor": "V", "category": cat, "location": loc,
           "capabilities": caps or {}}
    if window is not None:
        rec["access_window_minutes"] = window
    return rec


@pytest.fixture
def env():
    records = [
        _dev("thermo-1", "thermostat", ["B1", "F1"],
             {"thermostat_f": {"range": [50, 90]}, "hvac_mode": {"enum": ["off", "auto"]}}),
        _dev("thermo-2", "thermostat", ["B1", "F2"],
             {"thermostat_f": {"range": [50, 90]}, "hvac_mode": {"enum": ["off", "auto"]}}),
        _dev("door-1", "door", ["B1", "F1"],
             {"position": {"enum": ["open", "closed"]},
              "lock_state": {"enum": ["locked", "unlocked"]}}),
        _dev("win-1", "window", ["B1", "F1"],
             {"position": {"enum": ["open", "closed"]},
              "lock_state": {"enum": ["locked", "unlocked"]}}),
        _dev("guard-1", "guard", ["B1", "F1"],
             {"security_state": {"enum": ["Normal", "compromised", "monitoring", "quarantine"]}}),
        _dev("vault-1", "vault", ["B1", "F1"],
             {"lock_state": {"enum": ["locked", "unlocked"]}}, window=60),
    ]
    db = ingest_inventory(records, {
        "temperature": {"range": [40, 120], "unit": "F"},
        "outdoor_temperature": {"range": [0, 120], "unit": "F"},
    })
    trees = TreeSet([
        build_tree(db, parse_abstraction_mapping(
            'abstraction-tree{"Infra"} = location{*}: device-category{*}: devices{*}'), "global"),
        build_tree(db, parse_abstraction_mapping(
            'abstraction-tree{"ThermoTime"} = device-category{thermostat}.devices{*}: time{*}'),
            "global"),
        build_tree(db, parse_abstraction_mapping(
            'abstraction-tree{"ThermoTemp"} = device-category{thermostat}.devices{*}: temperature{*}'),
            "global"),
        build_tree(db, parse_abstraction_mapping(
            'abstraction-tree{"GuardStates"} = device-category{guard}.devices{*}: security_state{*}'),
            "global"),
        build_tree(db, parse_abstraction_mapping(
            'abstraction-tree{"KidStuff"} = device-category{guard}: devices{*}'), "kid"),
    ])
    return db, trees


def G(policies, env, prec=None):
    db, trees = env
    return compose(policies, trees, db, VOCAB, prec or PrecedenceRules.empty())


def test_rogue_policy_outside_author_trees(env):
    db, trees = env
    policy = P('policy{"r"} @admin{"kid"} : source-node{devices{"win-1"}} -> '
               'iot-commands-action{lock_state=unlocked} -> target-node{devices{"win-1"}}')
    finding = detect_rogue(policy, trees.owned_by("kid"), trees)
    assert finding is not None and finding.kind == "Rogue"
    assert "win-1" in finding.evidence["outside"]["source"]


def test_rogue_none_for_owned_nodes(env):
    db, trees = env
    policy = P('policy{"ok"} @admin{"kid"} : source-node{devices{"guard-1"}} -> '
               'iot-commands-action{security_state=Normal} -> target-node{devices{"guard-1"}}')
    assert detect_rogue(policy, trees.owned_by("kid"), trees) is None


def test_rogue_target_only_named(env):
    db, trees = env
    policy = P('policy{"t"} @admin{"kid"} : source-node{devices{"guard-1"}} -> '
               'iot-commands-action{lock_state=locked} -> target-node{devices{"door-1"}}')
    finding = detect_rogue(policy, trees.owned_by("kid"), trees)
    assert finding is not None
    assert "target" in finding.evidence["outside"]
    assert "source" not in finding.evidence["outside"]


def test_rogue_monotone_under_tree_shrink(env):
    db, trees = env
    policy = P('policy{"r"} @admin{"kid"} : source-node{devices{"win-1"}} -> '
               'iot-commands-action{lock_state=unlocked} -> target-node{devices{"win-1"}}')
    assert detect_rogue(policy, trees.owned_by("kid"), trees) is not None
    assert detect_rogue(policy, TreeSet(), trees) is not None  # no trees at all


S5 = '''policy{"S5"} @admin{"kid"} : source-node{device-category{"thermostat"}}
    -> time{"20:00-21:00"} -> iot-commands-action{thermostat_f=65}
    -> target-node{device-category{"thermostat"}}'''
S12 = '''policy{"S12"} @admin{"parent"} : source-node{device-category{"thermostat"}}
    -> time{"09:00-21:00"} -> iot-commands-action{thermostat_f=74}
    -> target-node{device-category{"thermostat"}}'''
S14 = '''policy{"S14"} @admin{"building"} : source-node{device-category{"thermostat"}}
    -> temperature{>95} -> iot-commands-action{thermostat_f=65}
    -> target-node{device-category{"thermostat"}}'''


def test_gap_time_window(env):
    db, trees = env
    prec = PrecedenceRules(admin_pairs={("parent", "kid")})
    graph = G([P(S5), P(S12)], env, prec)
    findings = gap_analysis(graph, [trees.get("ThermoTime")], db, VOCAB)
    assert len(findings) == 1
    gap = findings[0]
    assert gap.evidence["uncovered"] == ["21:00-09:00"]
    assert sorted(gap.policies) == ["S12", "S5"]  # masked S5 still named


def test_gap_temperature_band(env):
    db, trees = env
    graph = G([P(S12), P(S14)], env)
    findings = gap_analysis(graph, [trees.get("ThermoTemp")], db, VOCAB)
    assert len(findings) == 1
    gap = findings[0]
    assert gap.evidence["uncovered"] == ["(74, 95]"]
    assert gap.policies == ("S14",)


def test_gap_partition_exact(env):
    db, trees = env
    graph = G([P(S12), P(S14)], env)
    covered, gaps = coverage_partition(graph, trees.get("ThermoTemp"), db, VOCAB)
    domain = db.attribute_domain("temperature").interval()
    union = covered.union(gaps)
    assert union.intervals[0].lo == domain.lo and union.intervals[-1].hi == domain.hi
    assert covered.intersect(gaps).is_empty()


def test_gap_enum_states(env):
    db, trees = env
    covered = P('''policy{"st"} @admin{"x"} : source-node{devices{"guard-1"}}
        -> security_state{=compromised} -> iot-commands-action{security_state=quarantine}
        -> target-node{devices{"guard-1"}}''')
    graph = G([covered], env)
    findings = gap_analysis(graph, [trees.get("GuardStates")], db, VOCAB)
    assert len(findings) == 1
    assert set(findings[0].evidence["uncovered"]) == {"Normal", "monitoring", "quarantine"}
    # all four states covered -> no gap
    full = [P(f'''policy{{"st{i}"}} @admin{{"x"}} : source-node{{devices{{"guard-1"}}}}
        -> security_state{{={v}}} -> iot-commands-action{{security_state=Normal}}
        -> target-node{{devices{{"guard-1"}}}}''')
        for i, v in enumerate(["Normal", "compromised", "monitoring", "quarantine"])]
    graph = G(full, env)
    assert gap_analysis(graph, [trees.get("GuardStates")], db, VOCAB) == []


OPENER = '''policy{"opener"} @admin{"hvac"} : source-node{devices{"win-1"}}
    -> outdoor_temperature{=60-75}
    -> iot-commands-action{position=open}
    -> target-node{devices{"win-1"}}'''
SAVER = '''policy{"saver"} @admin{"hvac"} : source-node{device-category{"window"}}
    -> position{=open} . sustained{>5}
    -> iot-commands-action{hvac_mode=off}
    -> target-node{device-category{"thermostat"}}'''


def test_chain_detected_via_effect_trigger(env):
    graph = G([P(OPENER), P(SAVER)], env)
    findings = detect_loops(graph, VOCAB, PrecedenceRules.empty())
    chains = [f for f in findings if f.kind == "Chain"]
    assert len(chains) == 1
    assert chains[0].policies == ("opener", "saver")
    assert chains[0].evidence["chain"] == ["opener", "saver"]


def test_single_policy_no_loop_findings(env):
    graph = G([P(OPENER)], env)
    assert detect_loops(graph, VOCAB, PrecedenceRules.empty()) == []


def test_toggling_loop_with_contender(env):
    keeper = '''policy{"keeper"} @admin{"parent"} : source-node{devices{"door-1"}}
        -> time{"18:00-22:00"} -> iot-commands-action{position=open}
        -> target-node{devices{"door-1"}}'''
    saver = SAVER.replace('device-category{"window"}', 'device-category{"door"}')
    setter = '''policy{"setter"} @admin{"kid"} : source-node{device-category{"thermostat"}}
        -> time{"20:00-21:00"} -> iot-commands-action{thermostat_f=65}
        -> target-node{device-category{"thermostat"}}'''
    graph = G([P(keeper), P(saver), P(setter)], env)
    findings = detect_loops(graph, VOCAB, PrecedenceRules.empty())
    loops = [f for f in findings if f.kind == "Loop"]
    assert len(loops) == 1
    assert loops[0].policies == ("keeper", "saver", "setter")
    assert loops[0].evidence["toggling"] is True
    assert "setter" in loops[0].evidence["togglers"]


def test_cycle_loop_detected(env):
    a = '''policy{"a"} @admin{"x"} : source-node{devices{"door-1"}}
        -> position{=closed} -> iot-commands-action{position=open}@devices{"win-1"}
        -> target-node{devices{"win-1"}}'''
    b = '''policy{"b"} @admin{"x"} : source-node{devices{"win-1"}}
        -> position{=open} -> iot-commands-action{position=closed}@devices{"door-1"}
        -> target-node{devices{"door-1"}}'''
    graph = G([P(a), P(b)], env)
    findings = detect_loops(graph, VOCAB, PrecedenceRules.empty())
    loops = [f for f in findings if f.kind == "Loop"]
    assert loops and set(loops[0].policies) == {"a", "b"}


def test_unresolved_static_with_window_escalates_to_loop(env):
    fire_open = '''policy{"fire-open"} @admin{"fire"} : source-node{devices{"door-1"}}
        -> iot-commands-action{lock_state=unlocked}
        -> target-node{device-category{"door"}}'''
    night_lock = '''policy{"night-lock"} @admin{"parent"} : source-node{device-category{"door"}}
        -> time{"22:00-07:00"} -> iot-commands-action{lock_state=locked}
        -> target-node{device-category{"door"}}'''
    graph = G([P(fire_open), P(night_lock)], env)
    assert len(graph.active_conflicts("Unresolved")) == 1
    findings = detect_loops(graph, VOCAB, PrecedenceRules.empty())
    loops = [f for f in findings if f.kind == "Loop"]
    assert len(loops) == 1
    assert set(loops[0].policies) == {"fire-open", "night-lock"}


def test_potential_pair_reported_and_exclusive_pair_not(env):
    db, trees = env
    rain_close = '''policy{"rain-close"} @admin{"hvac"} : source-node{devices{"door-1"}}
        -> rain_state{=raining} -> iot-commands-action{position=closed}
        -> target-node{devices{"win-1"}}'''
    graph = G([P(OPENER), P(rain_close)], env)
    findings = detect_potential([P(OPENER), P(rain_close)], graph, {},
                                PrecedenceRules.empty(), VOCAB, db)
    assert len(findings) == 1
    assert findings[0].policies == ("opener", "rain-close")

    early = '''policy{"early"} @admin{"x"} : source-node{devices{"win-1"}}
        -> time{"01:00-02:00"} -> iot-commands-action{position=open}
        -> target-node{devices{"win-1"}}'''
    late = '''policy{"late"} @admin{"y"} : source-node{devices{"win-1"}}
        -> time{"13:00-14:00"} -> iot-commands-action{position=closed}
        -> target-node{devices{"win-1"}}'''
    graph = G([P(early), P(late)], env)
    findings = detect_potential([P(early), P(late)], graph, {},
                                PrecedenceRules.empty(), VOCAB, db)
    assert findings == []  # provably mutually exclusive windows


def test_potential_needs_two_policies(env):
    db, trees = env
    graph = G([P(OPENER)], env)
    with pytest.raises(TooFewPolicies):
        detect_potential([P(OPENER)], graph, {}, PrecedenceRules.empty(), VOCAB, db)


def test_potential_ranking_deterministic(env):
    db, trees = env
    pols = [P(OPENER),
            P('''policy{"rc"} @admin{"hvac"} : source-node{devices{"door-1"}}
                -> rain_state{=raining} -> iot-commands-action{position=closed}
                -> target-node{devices{"win-1"}}'''),
            P('''policy{"lk"} @admin{"a"} : source-node{devices{"door-1"}}
                -> iot-commands-action{lock_state=locked}
                -> target-node{devices{"vault-1"}}'''),
            P('''policy{"ul"} @admin{"b"} : source-node{devices{"win-1"}}
                -> iot-commands-action{lock_state=unlocked}
                -> target-node{devices{"vault-1"}}''')]
    graph = G(pols, env)
    r1 = detect_potential(pols, graph, {}, PrecedenceRules.empty(), VOCAB, db)
    graph2 = G(list(reversed(pols)), env)
    r2 = detect_potential(list(reversed(pols)), graph2, {}, PrecedenceRules.empty(), VOCAB, db)
    assert [f.policies for f in r1] == [f.policies for f in r2]
    assert [f.rank for f in r1] == [1] + [f.rank for f in r1][1:]


def test_access_violation_on_unbounded_grant(env):
    db, trees = env
    grant = '''policy{"grant"} @admin{"x"} : source-node{devices{"door-1"}}
        -> iot-commands-action{lock_state=unlocked}
        -> target-node{devices{"vault-1"}}'''
    graph = G([P(grant)], env)
    findings = detect_access_violations([P(grant)], graph, db, VOCAB)
    assert len(findings) == 1
    assert findings[0].evidence["window_minutes"] == 60


def test_access_grant_with_revoke_is_clean(env):
    db, trees = env
    grant = '''policy{"grant"} @admin{"x"} : source-node{devices{"door-1"}}
        -> iot-commands-action{lock_state=unlocked}
        -> target-node{devices{"vault-1"}}'''
    revoke = '''policy{"revoke"} @admin{"x"} : source-node{devices{"door-1"}}
        -> position{=closed} -> iot-commands-action{lock_state=locked}
        -> target-node{devices{"vault-1"}}'''
    graph = G([P(grant), P(revoke)], env)
    assert detect_access_violations([P(grant), P(revoke)], graph, db, VOCAB) == []


def test_access_unannotated_resource_is_vacuous(env):
    db, trees = env
    grant = '''policy{"grant"} @admin{"x"} : source-node{devices{"door-1"}}
        -> iot-commands-action{lock_state=unlocked}
        -> target-node{devices{"win-1"}}'''
    graph = G([P(grant)], env)
    assert detect_access_violations([P(grant)], graph, db, VOCAB) == []


def test_access_bounded_window_grant_self_terminates(env):
    db, trees = env
    grant = '''policy{"grant"} @admin{"x"} : source-node{devices{"door-1"}}
        -> time{"12:00-12:30"} -> iot-commands-action{lock_state=unlocked}
        -> target-node{devices{"vault-1"}}'''
    graph = G([P(grant)], env)
    assert detect_access_violations([P(grant)], graph, db, VOCAB) == []
