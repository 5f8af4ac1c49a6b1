from __future__ import annotations

import pytest

from policyweave.errors import (
    AmbiguousNode,
    DuplicateDeviceId,
    MappingSyntaxError,
    UnknownNode,
    UnknownTree,
)
from policyweave.inventory import ingest_inventory
from policyweave.trees import (
    NodePath,
    Relation,
    TreeSet,
    build_tree,
    parse_abstraction_mapping,
    parse_mapping_file,
    relate,
)

NEST_MAPPING = (
    'abstraction-tree{"Nest-Firmware{<17.01}"} = '
    "location{BLDG1}.floors{*}: vendor-type{Nest}.device-category{*}: devices{*}"
)

CAPS_MAPPING = (
    'abstraction-tree{"Capabilities{*}"} = '
    "vendor-type{*}: vendor-type{*}.device-category{*}: devices{*}: capabilities{*}"
)


def test_ingest_counts_devices_and_vendors():
    records = [
        {"id": f"d{i}", "vendor": f"v{i % 8}", "category": "c", "location": ["B"]}
        for i in range(30)
    ]
    db = ingest_inventory(records)
    assert len(db) == 30
    assert len(db.vendors) == 8


def test_ingest_empty_is_empty():
    assert len(ingest_inventory([])) == 0


def test_ingest_rejects_conflicting_duplicate_ids():
    records = [
        {"id": "cam-1", "vendor": "v", "category": "camera", "location": ["B1"]},
        {"id": "cam-1", "vendor": "v", "category": "camera", "location": ["B2"]},
    ]
    with pytest.raises(DuplicateDeviceId):
        ingest_inventory(records)


def test_parse_nest_mapping():
    mapping = parse_abstraction_mapping(NEST_MAPPING)
    assert mapping.tree_name == "Nest-Firmware"
    assert mapping.name_filter is not None
    attr, sel = mapping.name_filter
    assert attr == "firmware" and sel.op == "<" and sel.value == "17.01"
    assert mapping.depth == 3
    assert mapping.levels[0].dimension == "floors"
    assert mapping.levels[0].constraints[0][0] == "location"
    assert mapping.levels[1].dimension == "device-category"
    assert mapping.levels[2].dimension == "devices"


def test_parse_capabilities_mapping():
    mapping = parse_abstraction_mapping(CAPS_MAPPING)
    assert mapping.depth == 4
    assert mapping.name_filter is None
    assert all(
        spec.selector.kind == "wildcard" for spec in mapping.levels
    )


def test_parse_mapping_without_levels_is_rejected():
    with pytest.raises(MappingSyntaxError):
        parse_abstraction_mapping('abstraction-tree{"X"} =')


def test_build_tree_firmware_filter(small_db):
    # oracle: one-pass scan of the DB with the same filter
    threshold = [float(x) for x in "17.01".split(".")]
    expected = {
        d.id for d in small_db
        if d.location_path[0] == "BLDG1" and d.vendor == "Nest"
        and [float(x) for x in d.firmware.split(".")] < threshold
    }
    tree = build_tree(small_db, parse_abstraction_mapping(NEST_MAPPING), owner="global")
    leaf_ids = {leaf.label for leaf in tree.leaves() if leaf.dimension == "devices"}
    assert leaf_ids == expected
    assert len(leaf_ids) == 4
    floors = [c.label for c in tree.root.children]
    assert floors == ["Floor1", "Floor2"]
    for node in tree.nodes():
        if node.children:
            assert node.devices == frozenset().union(*(c.devices for c in node.children))


def test_build_tree_empty_db_gives_root_only():
    db = ingest_inventory([])
    tree = build_tree(db, parse_abstraction_mapping(NEST_MAPPING), owner="global")
    assert tree.leaves() == []
    assert tree.root.devices == frozenset()


def test_build_tree_capability_values(small_db):
    tree = build_tree(small_db, parse_abstraction_mapping(CAPS_MAPPING), owner="global")
    switch_leaves = {
        leaf.label for leaf in tree.leaves()
        if leaf.dimension == "capabilities" and "belkin-switch-1" in leaf.devices
    }
    assert switch_leaves == {"on", "off"}


def test_tree_construction_is_deterministic(small_db):
    m = parse_abstraction_mapping(NEST_MAPPING)
    t1 = build_tree(small_db, m, owner="a")
    t2 = build_tree(small_db, m, owner="a")
    assert t1.to_document() == t2.to_document()


def test_resolve_floor_and_leaf(small_db):
    trees = TreeSet([build_tree(small_db, parse_abstraction_mapping(NEST_MAPPING), "global")])
    floor1 = trees.resolve(NodePath.parse("Nest-Firmware:Floor1"))
    assert floor1 == {"nest-cam-1", "nest-cam-2", "nest-therm-1"}
    leaf = trees.resolve(NodePath.parse("Nest-Firmware:Floor1:camera:nest-cam-1"))
    assert leaf == {"nest-cam-1"}
    wild = trees.resolve(NodePath.parse("Nest-Firmware:*"))
    assert wild == floor1 | trees.resolve(NodePath.parse("Nest-Firmware:Floor2"))


def test_resolve_root_equals_union_of_children(small_db):
    trees = TreeSet([build_tree(small_db, parse_abstraction_mapping(NEST_MAPPING), "global")])
    tree = trees.get("Nest-Firmware")
    for node in tree.nodes():
        if node.children:
            union = frozenset().union(*(c.devices for c in node.children))
            assert node.devices == union


def test_ambiguous_label_needs_disambiguation(small_db):
    trees = TreeSet([build_tree(small_db, parse_abstraction_mapping(NEST_MAPPING), "global")])
    # thermostat survives the firmware filter on both floors
    with pytest.raises(AmbiguousNode):
        trees.resolve(NodePath.parse("thermostat"))
    floor1 = trees.resolve(NodePath(segments=("thermostat",), parent=("Floor1",)))
    assert floor1 == {"nest-therm-1"}
    with pytest.raises(UnknownNode):
        trees.resolve(NodePath.parse("Nest-Firmware:Floor2:camera"))  # filtered out


def test_unknown_tree_raises(small_db):
    trees = TreeSet([build_tree(small_db, parse_abstraction_mapping(NEST_MAPPING), "global")])
    with pytest.raises(UnknownTree):
        trees.resolve(NodePath(segments=("x",), tree="Basement"))


def test_relations():
    assert relate(frozenset("ab"), frozenset("ab")) is Relation.EQUAL
    assert relate(frozenset("a"), frozenset("ab")) is Relation.SUBSET
    assert relate(frozenset("ab"), frozenset("a")) is Relation.SUPERSET
    assert relate(frozenset("ab"), frozenset("bc")) is Relation.OVERLAP
    assert relate(frozenset("a"), frozenset("b")) is Relation.DISJOINT


def test_parse_mapping_file_multiple_declarations():
    text = "# trees\n" + NEST_MAPPING + "\n\n" + CAPS_MAPPING + "\n"
    mappings = parse_mapping_file(text)
    assert [m.tree_name for m in mappings] == ["Nest-Firmware", "Capabilities"]
