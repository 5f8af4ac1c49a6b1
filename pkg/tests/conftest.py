from __future__ import annotations

import pytest

from policyweave.inventory import ingest_inventory


def _dev(i, vendor, category, location, caps=None, firmware="", owner="", states=None):
    return {
        "id": i,
        "vendor": vendor,
        "category": category,
        "location": location,
        "capabilities": caps or {},
        "firmware": firmware,
        "owner": owner,
        "states": states or {},
    }


@pytest.fixture
def small_db():
    """Synthetic DB used by tree-construction oracles: 4 BLDG1 Nest devices on
    firmware 16.9, 2 on 17.2, plus a Belkin switch."""
    records = [
        _dev("nest-cam-1", "Nest", "camera", ["BLDG1", "Floor1"], firmware="16.9"),
        _dev("nest-cam-2", "Nest", "camera", ["BLDG1", "Floor1"], firmware="16.9"),
        _dev("nest-therm-1", "Nest", "thermostat", ["BLDG1", "Floor1"], firmware="16.9"),
        _dev("nest-therm-2", "Nest", "thermostat", ["BLDG1", "Floor2"], firmware="16.9"),
        _dev("nest-cam-3", "Nest", "camera", ["BLDG1", "Floor2"], firmware="17.2"),
        _dev("nest-therm-3", "Nest", "thermostat", ["BLDG1", "Floor2"], firmware="17.2"),
        _dev("belkin-switch-1", "Belkin", "switch", ["BLDG1", "Floor1"],
             caps={"switch": {"enum": ["on", "off"]}}),
    ]
    return ingest_inventory(records)
