"""IFTTT applet documents: a flat JSON object with one trigger, optional
filter conditions, and one or more actions.

Example::

    {
      "name": "s10-open-windows",
      "author": "hvac",
      "trigger": {"service": "weather", "event": "outdoor_temperature",
                  "range": [60, 75]},
      "conditions": [],
      "actions": [
        {"service": "windows", "command": "position", "value": "open"},
        {"service": "hvac", "command": "hvac_mode", "value": "off"}
      ]
    }

Triggers may carry ``"value"`` (state equality), ``"range"`` ([lo, hi]),
``"above"`` / ``"below"`` (numeric), or ``"window"`` ("HH:MM-HH:MM").
Filter-code scripting is out of scope; ``conditions`` entries reuse the
trigger comparison forms.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from ..errors import FatalSyntax
from .ir import ActionStmt, AppIR, CondExpr, EventSpec, Handler, Subscription


def parse_ifttt(app_id: str, text: str) -> AppIR:
    if not text.strip():
        raise FatalSyntax("empty applet document", line=1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FatalSyntax(f"invalid applet JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, Mapping):
        raise FatalSyntax("applet document must be a JSON object", line=1)

    ir = AppIR(app_id=str(doc.get("name", app_id)), dialect="ifttt",
               author_admin=str(doc.get("author", "")))

    trigger = doc.get("trigger")
    if not isinstance(trigger, Mapping):
        raise FatalSyntax("applet needs a 'trigger' object", line=1)
    service = str(trigger.get("service", ""))
    event, extra_conds = _trigger_event(trigger)
    handler = Handler(name="applet", line=1)
    ir.handlers["applet"] = handler
    ir.subscriptions.append(Subscription(source=service, event=event, handler="applet", line=1))

    conditions = list(extra_conds)
    for cond in doc.get("conditions", []):
        conditions.append(_condition(cond))
    actions = doc.get("actions", [])
    if not isinstance(actions, list):
        raise FatalSyntax("'actions' must be an array", line=1)
    stmts: list[ActionStmt] = []
    for action in actions:
        if not isinstance(action, Mapping) or "service" not in action:
            raise FatalSyntax("each action needs a 'service'", line=1)
        if str(action.get("command", "")) == "notify":
            stmts.append(ActionStmt(kind="notify", term=str(action.get("channel", "push")),
                                    message=str(action.get("value", "")), line=1))
        else:
            stmts.append(ActionStmt(
                kind="command", subject=str(action["service"]),
                term=str(action.get("command", "")), value=str(action.get("value", "")), line=1))

    body: list = stmts
    for cond in reversed(conditions):
        from .ir import IfBlock

        block = IfBlock(condition=cond, line=1)
        block.then_body = body
        body = [block]
    handler.body = body
    return ir


def _trigger_event(trigger: Mapping[str, Any]) -> tuple[EventSpec, list[CondExpr]]:
    term = str(trigger.get("event", ""))
    if "window" in trigger:
        return EventSpec(kind="time", window=str(trigger["window"])), []
    if term == "always":
        return EventSpec(kind="always"), []
    sustained = int(trigger.get("sustained_minutes", 0))
    event = EventSpec(kind="state", term=_event_term(trigger), sustained_minutes=sustained)
    return event, []


def _event_term(spec: Mapping[str, Any]) -> str:
    event = str(spec.get("event", ""))
    if "value" in spec:
        return f"{event}.{spec['value']}"
    if "range" in spec:
        lo, hi = spec["range"]
        return f"{event}.{_n(lo)}-{_n(hi)}"
    if "outside" in spec:
        lo, hi = spec["outside"]
        return f"{event}.!{_n(lo)}-{_n(hi)}"
    if "above" in spec:
        return f"{event}.>{_n(spec['above'])}"
    if "below" in spec:
        return f"{event}.<{_n(spec['below'])}"
    return event


def _condition(spec: Any) -> CondExpr:
    if not isinstance(spec, Mapping):
        raise FatalSyntax("condition entries must be objects", line=1)
    if "window" in spec:
        return CondExpr(kind="time", window=str(spec["window"]))
    event = str(spec.get("event", ""))
    if "value" in spec:
        return CondExpr(kind="state", subject=str(spec.get("service", "")), term=event,
                        op="=", value=str(spec["value"]))
    if "range" in spec:
        lo, hi = spec["range"]
        return CondExpr(kind="state", subject=str(spec.get("service", "")), term=event,
                        op="=", value=f"{_n(lo)}-{_n(hi)}")
    if "outside" in spec:
        lo, hi = spec["outside"]
        return CondExpr(kind="state", subject=str(spec.get("service", "")), term=event,
                        op="!", value=f"{_n(lo)}-{_n(hi)}")
    if "above" in spec:
        return CondExpr(kind="state", subject=str(spec.get("service", "")), term=event,
                        op=">", value=_n(spec["above"]))
    if "below" in spec:
        return CondExpr(kind="state", subject=str(spec.get("service", "")), term=event,
                        op="<", value=_n(spec["below"]))
    raise FatalSyntax(f"condition on {event!r} has no comparison", line=1)


def _n(x: Any) -> str:
    return str(int(x)) if float(x).is_integer() else str(float(x))
