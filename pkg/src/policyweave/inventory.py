"""Device inventory: the ground truth every abstraction tree is built from.

The inventory file is a JSON document::

    {
      "devices": [ {"id": ..., "vendor": ..., "category": ...,
                    "location": ["BLDG1", "Floor1", "living"],
                    "capabilities": {"camera_power": {"enum": ["ON", "OFF"]}},
                    "firmware": "17.2", "owner": "parent",
                    "states": {"camera_power": "OFF"},
                    "access_window_minutes": 60}, ... ],
      "state_domains": { "temperature": {"range": [40, 120], "unit": "F"}, ... }
    }

``state_domains`` declares the full value domain of dynamic attributes that
are not tied to a single device's capability (weather, building state);
gap analysis enumerates against these, not against observed values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import DuplicateDeviceId, MalformedRecord
from .intervals import Interval


@dataclass(frozen=True)
class Domain:
    """Value domain of a capability or dynamic state.

    kind is one of 'boolean', 'enum', 'range'.
    """

    kind: str
    values: frozenset[str] = frozenset()
    lo: float = 0.0
    hi: float = 0.0
    unit: str = ""

    @classmethod
    def from_spec(cls, spec: Any) -> "Domain":
        if spec == "boolean" or spec is bool:
            return cls("boolean", frozenset({"true", "false"}))
        if isinstance(spec, Mapping):
            if "enum" in spec:
                return cls("enum", frozenset(str(v) for v in spec["enum"]))
            if "range" in spec:
                lo, hi = spec["range"]
                return cls("range", lo=float(lo), hi=float(hi), unit=str(spec.get("unit", "")))
        if isinstance(spec, (list, tuple)):
            return cls("enum", frozenset(str(v) for v in spec))
        raise ValueError(f"unrecognized domain spec: {spec!r}")

    def interval(self) -> Interval:
        if self.kind != "range":
            raise ValueError(f"domain of kind {self.kind} has no numeric interval")
        return Interval(self.lo, self.hi)

    def leaf_labels(self) -> list[str]:
        """Labels a state-dimension tree level expands to."""
        if self.kind in ("enum", "boolean"):
            return sorted(self.values)
        return [f"{_num(self.lo)}..{_num(self.hi)}"]

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "range":
            out: dict[str, Any] = {"range": [self.lo, self.hi]}
            if self.unit:
                out["unit"] = self.unit
            return out
        return {"enum": sorted(self.values)}


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


@dataclass(frozen=True)
class Device:
    id: str
    vendor: str
    category: str
    location_path: tuple[str, ...]
    capabilities: Mapping[str, Domain]
    firmware: str = ""
    owner_admin: str = ""
    dynamic_states: Mapping[str, str] = field(default_factory=dict)
    access_window_minutes: int | None = None

    def location_at(self, depth: int) -> str | None:
        return self.location_path[depth] if depth < len(self.location_path) else None


class InfrastructureDB:
    """Immutable snapshot of the device inventory."""

    def __init__(self, devices: Iterable[Device], state_domains: Mapping[str, Domain] | None = None):
        self.devices: dict[str, Device] = {}
        for dev in devices:
            if dev.id in self.devices:
                if self.devices[dev.id] == dev:
                    continue  # exact duplicate record is harmless
                raise DuplicateDeviceId(dev.id)
            self.devices[dev.id] = dev
        self.state_domains: dict[str, Domain] = dict(state_domains or {})
        self._scalar_index: dict[str, dict[str, list[Device]]] = {}

    def index_for(self, attr: str, scalar) -> dict[str, list[Device]]:
        """Lazily built value index over a scalar device view; lets tree
        construction start from a selective slice instead of a full scan."""
        if attr not in self._scalar_index:
            groups: dict[str, list[Device]] = {}
            for dev in self:
                value = scalar(dev, attr)
                if value is not None:
                    groups.setdefault(value, []).append(dev)
            self._scalar_index[attr] = groups
        return self._scalar_index[attr]

    def __len__(self) -> int:
        return len(self.devices)

    def __iter__(self):
        return iter(self.devices.values())

    def get(self, device_id: str) -> Device | None:
        return self.devices.get(device_id)

    @property
    def vendors(self) -> set[str]:
        return {d.vendor for d in self}

    @property
    def categories(self) -> set[str]:
        return {d.category for d in self}

    def attribute_domain(self, attr: str) -> Domain | None:
        """Domain of an attribute: inventory-level declaration first, then
        any device capability carrying that name."""
        if attr in self.state_domains:
            return self.state_domains[attr]
        for dev in self:
            if attr in dev.capabilities:
                return dev.capabilities[attr]
        return None

    def devices_with_attribute(self, attr: str) -> list[Device]:
        return [d for d in self if attr in d.capabilities or attr in d.dynamic_states]


REQUIRED_FIELDS = ("id", "vendor", "category", "location")


def parse_device_record(record: Mapping[str, Any], index: int) -> Device:
    if not isinstance(record, Mapping):
        raise MalformedRecord("device record must be an object", index=index)
    for name in REQUIRED_FIELDS:
        if name not in record:
            raise MalformedRecord("missing required field", index=index, field=name)
    location = record["location"]
    if not isinstance(location, (list, tuple)) or not location:
        raise MalformedRecord("location must be a non-empty list of labels", index=index, field="location")
    caps: dict[str, Domain] = {}
    for cap_name, spec in dict(record.get("capabilities", {})).items():
        try:
            caps[cap_name] = Domain.from_spec(spec)
        except ValueError as exc:
            raise MalformedRecord(str(exc), index=index, field=f"capabilities.{cap_name}") from exc
    window = record.get("access_window_minutes")
    return Device(
        id=str(record["id"]),
        vendor=str(record["vendor"]),
        category=str(record["category"]),
        location_path=tuple(str(x) for x in location),
        capabilities=caps,
        firmware=str(record.get("firmware", "")),
        owner_admin=str(record.get("owner", "")),
        dynamic_states={str(k): str(v) for k, v in dict(record.get("states", {})).items()},
        access_window_minutes=int(window) if window is not None else None,
    )


def ingest_inventory(records: Iterable[Mapping[str, Any]],
                     state_domains: Mapping[str, Any] | None = None) -> InfrastructureDB:
    """Build a DB from parsed device records; duplicates with identical fields
    are deduplicated, conflicting duplicates rejected."""
    devices = [parse_device_record(rec, i) for i, rec in enumerate(records)]
    domains = {name: Domain.from_spec(spec) for name, spec in dict(state_domains or {}).items()}
    return InfrastructureDB(devices, domains)


def load_inventory(path: str | Path) -> InfrastructureDB:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, Mapping) or "devices" not in doc:
        raise MalformedRecord("inventory document must contain a 'devices' array")
    return ingest_inventory(doc["devices"], doc.get("state_domains"))
