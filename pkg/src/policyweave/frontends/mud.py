"""Manufacturer-usage-description profiles: ACL-only JSON documents.

Supported subset::

    {
      "mud-url": "https://vendor.example/camera.json",
      "device-category": "camera",
      "author": "building",
      "acls": [
        {"direction": "from-device", "endpoint": "controller",
         "action": "accept", "traffic": "video"}
      ]
    }

Endpoint classes: ``controller``, ``local-networks``, ``internet``,
``same-manufacturer``, or ``device:<id>``.  Each accept entry lowers to one
ALLOW ACL policy; a default-deny complement is added for the profiled device
as traffic source, which is what the profile semantics require.
"""

from __future__ import annotations

import json
from typing import Mapping

from ..errors import FatalSyntax
from .ir import AclEntry, AppIR

ENDPOINT_CLASSES = ("controller", "local-networks", "internet", "same-manufacturer")


def parse_mud(app_id: str, text: str) -> AppIR:
    if not text.strip():
        raise FatalSyntax("empty MUD profile", line=1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FatalSyntax(f"invalid MUD JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, Mapping) or "acls" not in doc:
        raise FatalSyntax("MUD profile needs an 'acls' array", line=1)
    scope = str(doc.get("device-category") or doc.get("device") or "")
    if not scope:
        raise FatalSyntax("MUD profile must name the profiled device or category", line=1)

    ir = AppIR(app_id=str(doc.get("name", app_id)), dialect="mud",
               author_admin=str(doc.get("author", "")), device_scope=scope)
    for i, entry in enumerate(doc["acls"]):
        if not isinstance(entry, Mapping):
            raise FatalSyntax(f"acl entry {i} must be an object", line=1)
        direction = str(entry.get("direction", "from-device"))
        if direction not in ("from-device", "to-device"):
            raise FatalSyntax(f"acl entry {i}: bad direction {direction!r}", line=1)
        endpoint = str(entry.get("endpoint", ""))
        if not (endpoint in ENDPOINT_CLASSES or endpoint.startswith("device:")):
            raise FatalSyntax(f"acl entry {i}: bad endpoint {endpoint!r}", line=1)
        action = str(entry.get("action", ""))
        if action not in ("accept", "drop"):
            raise FatalSyntax(f"acl entry {i}: bad action {action!r}", line=1)
        ir.acl_entries.append(AclEntry(
            direction=direction, endpoint=endpoint, action=action,
            traffic=str(entry.get("traffic", "")), line=i + 1))
    return ir
