"""Synthetic workload generators for benchmarks and property tests.

Everything is derived from a single integer seed through numpy's Generator,
so a (params, seed) pair always produces the identical inventory, trees, and
policy set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inventory import InfrastructureDB, ingest_inventory
from .precedence import PrecedenceRules
from .trees import AbstractionMapping, AbstractionTree, TreeSet, build_tree, parse_abstraction_mapping
from .vigraph import VIPolicy, parse_policy
from .vocab import Vocabulary, parse_vocabulary

ARROW = "→"
VENDORS = ["Acme", "Borealis", "Cobalt", "Dynamo", "Everest", "Fathom", "Gale", "Harbor"]
CATEGORIES = ["camera", "thermostat", "lock", "sensor", "switch", "valve", "speaker", "light"]


def synth_vocabulary(n_attributes: int = 30) -> Vocabulary:
    lines = ["[attributes]"]
    for i in range(n_attributes):
        if i % 3 == 0:
            lines.append(f"attr{i}: exogenous")
    return parse_vocabulary("\n".join(lines))


def synth_inventory(n_devices: int, n_buildings: int = 4, n_floors: int = 4,
                    n_rooms: int = 4, n_attributes: int = 30, seed: int = 0) -> InfrastructureDB:
    rng = np.random.default_rng(seed)
    bs = rng.integers(n_buildings, size=n_devices)
    fs = rng.integers(n_floors, size=n_devices)
    rs = rng.integers(n_rooms, size=n_devices)
    vs = rng.integers(len(VENDORS), size=n_devices)
    cs = rng.integers(len(CATEGORIES), size=n_devices)
    ats = rng.integers(n_attributes, size=n_devices)
    records = [
        {
            "id": f"dev-{i}",
            "vendor": VENDORS[vs[i]],
            "category": CATEGORIES[cs[i]],
            "location": [f"BLDG{bs[i]}", f"Floor{fs[i]}", f"Room{bs[i]}-{fs[i]}-{rs[i]}"],
            "capabilities": {f"attr{ats[i]}": {"enum": ["on", "off"]}},
        }
        for i in range(n_devices)
    ]
    domains = {f"attr{i}": {"enum": ["on", "off"]} if i % 2 else {"range": [0, 100]}
               for i in range(n_attributes)}
    return ingest_inventory(records, domains)


def synth_trees(db: InfrastructureDB, n_trees: int, seed: int = 0) -> TreeSet:
    """Selective (building x vendor) and (building x category) slices with
    four levels of abstraction, like per-administrator delegations."""
    rng = np.random.default_rng(seed)
    buildings = sorted({d.location_path[0] for d in db})
    vendors = sorted(db.vendors)
    categories = sorted(db.categories)
    trees = TreeSet()
    for i in range(n_trees):
        b = buildings[int(rng.integers(len(buildings)))] if buildings else ""
        if i % 2 == 0 and vendors:
            v = vendors[int(rng.integers(len(vendors)))]
            text = (f'abstraction-tree{{"T{i}"}} = location{{{b}}}.vendor-type{{{v}}}.floors{{*}}: '
                    f"rooms{{*}}: device-category{{*}}: devices{{*}}")
        else:
            c = categories[int(rng.integers(len(categories)))]
            text = (f'abstraction-tree{{"T{i}"}} = location{{{b}}}.device-category{{{c}}}.floors{{*}}: '
                    f"rooms{{*}}: vendor-type{{*}}: devices{{*}}")
        trees.add(build_tree(db, parse_abstraction_mapping(text), owner=f"admin{i % 5}"))
    return trees


def _node_label_at(tree: AbstractionTree, depth: int, rng: np.random.Generator):
    candidates = [n for n in tree.nodes() if n.level == depth and n.devices]
    if not candidates:
        candidates = [n for n in tree.nodes() if n.devices and n.level > 0]
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


def synth_policies(db: InfrastructureDB, trees: TreeSet, n_policies: int,
                   n_attributes: int = 30, depth: int = 4, seed: int = 0,
                   disjoint: bool = False) -> list[VIPolicy]:
    """Sample sources/targets from tree nodes at the requested depth and edge
    properties from the attribute space.  With ``disjoint=True``, policies
    target distinct single devices so none can ever collide."""
    rng = np.random.default_rng(seed)
    tree_list = list(trees)
    devices = sorted(d.id for d in db)
    policies: list[VIPolicy] = []
    for i in range(n_policies):
        if disjoint:
            if i >= len(devices):
                break
            device = devices[i % len(devices)]
            src_ref = tgt_ref = f'devices{{"{device}"}}'
        else:
            tree = tree_list[int(rng.integers(len(tree_list)))]
            node = _node_label_at(tree, depth, rng)
            if node is None:
                continue
            src_path = ARROW.join(node.path)
            src_ref = f'group{{"{src_path}"}}'
            tgt_tree = tree_list[int(rng.integers(len(tree_list)))]
            tgt_node = _node_label_at(tgt_tree, depth, rng)
            if tgt_node is None:
                continue
            tgt_path = ARROW.join(tgt_node.path)
            tgt_ref = f'group{{"{tgt_path}"}}'
        attr = f"attr{int(rng.integers(n_attributes))}"
        attr_idx = int(attr[4:])
        if attr_idx % 2:
            cond = f"{attr}{{=on}}"
        else:
            lo = int(rng.integers(0, 80))
            cond = f"{attr}{{={lo}-{lo + 20}}}"
        start = int(rng.integers(0, 24))
        end = (start + 1 + int(rng.integers(0, 12))) % 24
        window = f"{start:02d}:00-{end:02d}:00"
        act_attr = f"attr{int(rng.integers(n_attributes))}"
        value = "on" if int(attr_idx) % 2 else str(int(rng.integers(0, 100)))
        author = f"admin{int(rng.integers(5))}"
        text = (f'policy{{"syn-{i}"}} @admin{{"{author}"}} :\n'
                f"    source-node{{{src_ref}}}\n"
                f'    -> time{{"{window}"}} -> {cond}\n'
                f"    -> iot-commands-action{{{act_attr}={value}}}\n"
                f"    -> target-node{{{tgt_ref}}}")
        policies.append(parse_policy(text))
    return policies


def synth_precedence(n_admins: int = 5) -> PrecedenceRules:
    pairs = {(f"admin{i}", f"admin{j}") for i in range(n_admins) for j in range(i + 1, n_admins)}
    return PrecedenceRules(admin_pairs=pairs)
