"""Condition co-satisfiability: can two policies be active at the same time?

Three verdicts:

* ``EXCLUSIVE`` — provably never co-active: temporal windows disjoint, a
  shared attribute's regions fail to intersect, or one policy drives a
  setpoint to a value outside the other's trigger region.
* ``DEFINITE`` — co-activity is certain enough to flag at compile time:
  every environmental condition is shared (directly or through a declared
  relation) with a non-empty intersection, no condition rides on a state
  that the automation itself controls (unless a declared effect witnesses
  it), and temporal windows intersect.
* ``INDEFINITE`` — everything else: co-activity depends on weather or on
  other automation, so the pair is left to the chain/loop and potential
  run-time analyses instead of the static composer.

The asymmetry between exogenous sensor states (permissive: a fire can happen
at any hour) and environmental/automation-controlled states (not knowable
statically) is what separates compile-time conflicts from potential ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .intervals import Region, TimeWindow
from .inventory import InfrastructureDB
from .vigraph import ConditionNode, Constraint, VIPolicy
from .vocab import Vocabulary

EXCLUSIVE = "exclusive"
DEFINITE = "definite"
INDEFINITE = "indefinite"


@dataclass
class ConditionProfile:
    """Normalized view of one policy's activation region."""

    policy_id: str
    windows: list[TimeWindow] = field(default_factory=list)
    numeric: dict[str, Region] = field(default_factory=dict)
    values: dict[str, frozenset[str]] = field(default_factory=dict)
    negated: dict[str, frozenset[str]] = field(default_factory=dict)  # enum '!' without domain
    translated: set[str] = field(default_factory=set)   # attrs added via relations
    bridges: dict[str, set[str]] = field(default_factory=dict)  # source attr -> attrs it translated to
    facts: dict[str, str] = field(default_factory=dict)          # action effects: attr -> value
    setpoints: dict[str, float] = field(default_factory=dict)    # driven attr -> numeric target

    def explicit_attrs(self) -> set[str]:
        return (set(self.numeric) | set(self.values) | set(self.negated)) - self.translated


def build_profile(policy: VIPolicy, db: InfrastructureDB, vocab: Vocabulary) -> ConditionProfile:
    prof = ConditionProfile(policy_id=policy.policy_id)
    constraints: list[tuple[Constraint, str | None]] = []
    for cond in policy.conditions:
        if cond.kind == "Temporal":
            if cond.window is not None:
                prof.windows.append(cond.window)
            continue  # sustained durations never block co-activity
        if cond.constraint is not None:
            constraints.append((cond.constraint, None))
    # expand declared relations (one hop)
    for constraint, _ in list(constraints):
        for translated in vocab.translations(constraint):
            constraints.append((translated, constraint.attr))
            prof.bridges.setdefault(constraint.attr, set()).add(translated.attr)
    for constraint, origin in constraints:
        _apply_constraint(prof, constraint, db, origin)

    # action effects and setpoint targets
    for action in policy.action_nodes():
        if action.kind != "IotCommand":
            continue
        prof.facts[action.attr] = action.value
        for eff in vocab.command_effects(action.attr, action.value):
            prof.facts[eff.attr] = eff.value
        if vocab.is_setpoint(action.attr):
            driven = vocab.drives.get(action.attr, "")
            try:
                value = float(action.value)
            except ValueError:
                continue
            if driven:
                prof.setpoints[driven] = value
    return prof


def _apply_constraint(prof: ConditionProfile, constraint: Constraint,
                      db: InfrastructureDB, origin: str | None) -> None:
    attr = constraint.attr
    domain = db.attribute_domain(attr)
    if origin is not None:
        prof.translated.add(attr)
    if domain is not None and domain.kind == "range":
        region = constraint.region(domain.interval())
        prof.numeric[attr] = prof.numeric[attr].intersect(region) if attr in prof.numeric else region
        return
    if domain is not None:
        vals = constraint.value_set(domain)
        prof.values[attr] = (prof.values[attr] & vals) if attr in prof.values else vals
        return
    # no declared domain: handle '=' as a singleton, '!' pessimistically
    if constraint.op == "=" and not constraint.is_range:
        vals = frozenset({constraint.value})
        prof.values[attr] = (prof.values[attr] & vals) if attr in prof.values else vals
    elif constraint.op == "!" and not constraint.is_range:
        prof.negated[attr] = prof.negated.get(attr, frozenset()) | {constraint.value}
    elif constraint.is_range:
        lo, hi = constraint.range_bounds()
        region = Region.span(lo, hi)
        if constraint.op == "!":
            return  # unbounded complement: no usable constraint
        prof.numeric[attr] = prof.numeric[attr].intersect(region) if attr in prof.numeric else region


def windows_intersect(a: list[TimeWindow], b: list[TimeWindow]) -> bool:
    """Do the conjunctions of the two window lists admit a common minute?"""
    if not a or not b:
        return True
    arcs_a = _conjoin(a)
    arcs_b = _conjoin(b)
    return any(lo1 < hi2 and lo2 < hi1 for lo1, hi1 in arcs_a for lo2, hi2 in arcs_b)


def _conjoin(windows: list[TimeWindow]) -> list[tuple[int, int]]:
    arcs = windows[0].arcs()
    for w in windows[1:]:
        next_arcs = []
        for lo1, hi1 in arcs:
            for lo2, hi2 in w.arcs():
                lo, hi = max(lo1, lo2), min(hi1, hi2)
                if lo < hi:
                    next_arcs.append((lo, hi))
        arcs = next_arcs
        if not arcs:
            break
    return arcs


def classify(a: ConditionProfile, b: ConditionProfile, vocab: Vocabulary,
             controlled_attrs: set[str]) -> str:
    """Co-satisfiability verdict for two activation regions."""
    if not windows_intersect(a.windows, b.windows):
        return EXCLUSIVE

    shared_ok: set[str] = set()
    exclusive = False
    for attr in set(a.numeric) & set(b.numeric):
        if a.numeric[attr].intersect(b.numeric[attr]).is_empty():
            exclusive = True
        else:
            shared_ok.add(attr)
    for attr in set(a.values) & set(b.values):
        if not (a.values[attr] & b.values[attr]):
            exclusive = True
        else:
            shared_ok.add(attr)
    for prof, other in ((a, b), (b, a)):
        for attr, banned in prof.negated.items():
            if attr in other.values:
                if other.values[attr] and other.values[attr] <= banned:
                    exclusive = True
                else:
                    shared_ok.add(attr)
    if exclusive:
        return EXCLUSIVE

    # setpoint regime exclusion and effect witnessing
    witnessed: set[str] = set()
    for prof, other in ((a, b), (b, a)):
        for attr, target in prof.setpoints.items():
            # regime exclusion applies against explicit trigger regions only;
            # a region translated from an exogenous event (fire -> heat) can
            # hold regardless of what any setpoint wants
            if attr in other.numeric and attr not in other.translated:
                if other.numeric[attr].contains(target):
                    witnessed.add(attr)
                else:
                    return EXCLUSIVE
        for attr, value in prof.facts.items():
            if attr in other.values and value in other.values[attr]:
                witnessed.add(attr)
            if attr in other.numeric:
                try:
                    if other.numeric[attr].contains(float(value)):
                        witnessed.add(attr)
                except ValueError:
                    pass

    # leftover one-sided conditions decide definiteness
    for prof, other in ((a, b), (b, a)):
        other_attrs = set(other.numeric) | set(other.values) | set(other.negated)
        for attr in prof.explicit_attrs():
            if attr in shared_ok or attr in witnessed or attr in other_attrs:
                continue
            if vocab.is_environmental(attr):
                bridged = prof.bridges.get(attr, set())
                if bridged & shared_ok:
                    continue
                return INDEFINITE
            if attr in controlled_attrs:
                return INDEFINITE
    return DEFINITE


def provably_exclusive(a: ConditionProfile, b: ConditionProfile, vocab: Vocabulary) -> bool:
    return classify(a, b, vocab, controlled_attrs=set()) == EXCLUSIVE
