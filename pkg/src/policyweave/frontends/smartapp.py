"""Groovy-flavored SmartApp subset parser.

Supported surface (anything else is a fatal syntax error)::

    definition(name: "s8-motion-camera", author: "parent")
    input "motions", "capability.motionSensor"
    input "sensor", "capability.temperature", "temp-sensor-1"
    val threshold = 95

    def installed() {
        subscribe(motions, "motion.active", onMotion)
        subscribe(timeWindow("22:00", "07:00"), "enter", nightly)
        subscribe(cams, "always", keepOn)
    }

    def onMotion(evt) {
        if (state(motions, "motion") == "active") {
            cams.set("camera_power", "ON")
        } else {
            notify("SMS", "idle")
        }
    }

Conditions inside handlers are ``state(subject, "attr") <op> value`` with op
in ``== != < >`` and ``time.between("HH:MM", "HH:MM")``.  Commands are
``subject.set("attr", "value")``, the sugar form ``subject.attr("value")``,
``notify("channel", "message")``, and ``log("...")``.  Blocks open with a
trailing ``{`` and close on their own line (``}`` or ``} else {``).
"""

from __future__ import annotations

import re

from ..errors import FatalSyntax
from .ir import (
    ActionStmt,
    AppIR,
    CondExpr,
    Declaration,
    EventSpec,
    Handler,
    IfBlock,
    Stmt,
    Subscription,
)
from .scan import prescan

# tolerant of quote-repaired headers: no closing-paren anchor
_DEFINITION_RE = re.compile(r'definition\s*\(\s*name:\s*"([^"]*)"(?:\s*,\s*author:\s*"([^"]*)")?')
_INPUT_RE = re.compile(r'input\s+"([^"]+)"\s*,\s*"([^"]+)"(?:\s*,\s*"([^"]+)")?')
_VAL_RE = re.compile(r"(?:val|var)\s+([A-Za-z_]\w*)\s*=\s*(.+)$")
_DEF_RE = re.compile(r"def\s+([A-Za-z_]\w*)\s*\(([^)]*)\)\s*\{\s*$")
_SUBSCRIBE_RE = re.compile(
    r'subscribe\s*\(\s*([A-Za-z_]\w*|timeWindow\s*\(\s*"[^"]*"\s*,\s*"[^"]*"\s*\))\s*,'
    r'\s*"([^"]*)"\s*,\s*([A-Za-z_]\w*)\s*\)')
_TIMEWINDOW_RE = re.compile(r'timeWindow\s*\(\s*"([^"]*)"\s*,\s*"([^"]*)"\s*\)')
_IF_RE = re.compile(r"if\s*\((.*)\)\s*\{\s*$")
_SET_RE = re.compile(r'([A-Za-z_]\w*)\s*\.\s*set\s*\(\s*"([^"]+)"\s*,\s*"([^"]*)"\s*\)')
_SUGAR_RE = re.compile(r'([A-Za-z_]\w*)\s*\.\s*([A-Za-z_]\w*)\s*\(\s*"([^"]*)"\s*\)')
_NOTIFY_RE = re.compile(r'notify\s*\(\s*"([^"]+)"\s*(?:,\s*"([^"]*)")?\s*\)')
_LOG_RE = re.compile(r'log\s*\(\s*(?:"[^"]*"|([A-Za-z_]\w*))\s*\)')
_STATE_COND_RE = re.compile(
    r'state\s*\(\s*([A-Za-z_]\w*|"[^"]*")\s*,\s*"([^"]+)"\s*\)\s*(==|!=|<=|>=|<|>)\s*(.+)$')
_TIME_COND_RE = re.compile(r'time\s*\.\s*between\s*\(\s*"([^"]*)"\s*,\s*"([^"]*)"\s*\)')

_COND_OPS = {"==": "=", "!=": "!", "<": "<", ">": ">"}

LIFECYCLE_HANDLERS = {"installed", "updated"}

Line = tuple[int, str]  # (lineno, text)


def parse_smartapp(app_id: str, text: str) -> AppIR:
    if not text.strip():
        raise FatalSyntax("empty SmartApp source", line=1)
    repaired, diagnostics = prescan(text)
    ir = AppIR(app_id=app_id, dialect="smartapp", diagnostics=diagnostics)

    lines: list[Line] = [
        (no, _strip_comment(raw)) for no, raw in enumerate(repaired.splitlines(), start=1)
    ]
    i = 0
    while i < len(lines):
        lineno, raw = lines[i]
        line = raw.strip()
        if not line or line == "}":
            i += 1
            continue
        if m := _DEFINITION_RE.search(line):
            ir.app_id = m.group(1) or app_id
            ir.author_admin = m.group(2) or ""
            i += 1
            continue
        if m := _INPUT_RE.search(line):
            ir.declarations.append(Declaration(
                name=m.group(1), kind="input", line=lineno,
                selector=m.group(2), value=m.group(3) or ""))
            i += 1
            continue
        if m := _VAL_RE.match(line):
            ir.declarations.append(Declaration(
                name=m.group(1), kind="val", line=lineno, value=m.group(2).strip()))
            i += 1
            continue
        if m := _DEF_RE.match(line):
            name = m.group(1)
            end = _find_block_end(lines, i)
            handler = Handler(name=name, line=lineno)
            handler.source_stmts = sum(
                1 for _, body_line in lines[i + 1:end]
                if body_line.strip() and body_line.strip() != "}")
            handler.body = _parse_stmts(ir, lines[i + 1:end])
            ir.handlers[name] = handler
            ir.declarations.append(Declaration(name=name, kind="handler", line=lineno))
            i = end + 1
            continue
        if _SUBSCRIBE_RE.search(line):
            i += 1  # collected in the whole-source pass below
            continue
        raise FatalSyntax(f"cannot parse SmartApp line: {line!r}", line=lineno)

    _extract_subscriptions(ir, lines)
    return ir


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == '"':
            in_string = not in_string
        if not in_string and line.startswith("//", i):
            break
        out.append(ch)
        i += 1
    return "".join(out)


def _find_block_end(lines: list[Line], start: int) -> int:
    """Index of the line on which the block opened at `start` closes."""
    depth = 0
    for i in range(start, len(lines)):
        for ch in lines[i][1]:
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return i
    return len(lines) - 1


def _parse_stmts(ir: AppIR, body: list[Line]) -> list[Stmt]:
    stmts: list[Stmt] = []
    i = 0
    while i < len(body):
        lineno, raw = body[i]
        line = raw.strip()
        if not line or line == "}":
            i += 1
            continue
        if m := _IF_RE.match(line):
            cond = _parse_condition(ir, m.group(1), lineno)
            end = _find_block_end(body, i)
            block = IfBlock(condition=cond, line=lineno)
            block.then_body = _parse_stmts(ir, body[i + 1:end])
            closing = body[end][1].strip() if end < len(body) else "}"
            i = end + 1
            if "else" in closing:
                else_end = _find_block_end(body, end)
                if else_end == end:  # '} else {' both closes and opens; scan onward
                    depth, else_end = 1, len(body) - 1
                    for j in range(end + 1, len(body)):
                        for ch in body[j][1]:
                            if ch == "{":
                                depth += 1
                            elif ch == "}":
                                depth -= 1
                        if depth <= 0:
                            else_end = j
                            break
                block.else_body = _parse_stmts(ir, body[end + 1:else_end])
                i = else_end + 1
            stmts.append(block)
            continue
        stmt = _parse_action(ir, line, lineno)
        if stmt is not None:
            stmts.append(stmt)
        i += 1
    return stmts


def _parse_condition(ir: AppIR, text: str, lineno: int) -> CondExpr:
    text = text.strip()
    if m := _TIME_COND_RE.search(text):
        return CondExpr(kind="time", window=f"{m.group(1)}-{m.group(2)}")
    if m := _STATE_COND_RE.search(text):
        subject, attr, op, value = m.groups()
        if op in ("<=", ">="):
            raise FatalSyntax(f"comparator {op!r} is outside the supported set", line=lineno)
        subject = subject.strip('"')
        ir.references.append((subject, lineno))
        return CondExpr(kind="state", subject=subject, term=attr,
                        op=_COND_OPS[op], value=value.strip().strip('"'))
    raise FatalSyntax(f"cannot parse condition {text!r}", line=lineno)


def _parse_action(ir: AppIR, line: str, lineno: int) -> ActionStmt | None:
    if m := _NOTIFY_RE.search(line):
        return ActionStmt(kind="notify", term=m.group(1), message=m.group(2) or "", line=lineno)
    if m := _SET_RE.search(line):
        ir.references.append((m.group(1), lineno))
        return ActionStmt(kind="command", subject=m.group(1), term=m.group(2),
                          value=m.group(3), line=lineno)
    if m := _LOG_RE.search(line):
        if m.group(1):
            ir.references.append((m.group(1), lineno))
        return None
    if _SUBSCRIBE_RE.search(line):
        return None  # collected in the whole-source pass
    if m := _SUGAR_RE.search(line):
        ir.references.append((m.group(1), lineno))
        return ActionStmt(kind="command", subject=m.group(1), term=m.group(2),
                          value=m.group(3), line=lineno)
    raise FatalSyntax(f"cannot parse statement {line!r}", line=lineno)


def _extract_subscriptions(ir: AppIR, lines: list[Line]) -> None:
    for lineno, raw in lines:
        for m in _SUBSCRIBE_RE.finditer(raw):
            source, event_term, handler = m.group(1), m.group(2), m.group(3)
            ir.references.append((handler, lineno))
            tw = _TIMEWINDOW_RE.match(source)
            if tw:
                event = EventSpec(kind="time", window=f"{tw.group(1)}-{tw.group(2)}")
                source_name = ""
            elif event_term == "always":
                event = EventSpec(kind="always")
                source_name = source
                ir.references.append((source, lineno))
            else:
                sustained = 0
                term = event_term
                if m2 := re.match(r"(.*)\s+for\s+(\d+)min$", event_term):
                    term, sustained = m2.group(1), int(m2.group(2))
                event = EventSpec(kind="state", term=term, sustained_minutes=sustained)
                source_name = source
                ir.references.append((source, lineno))
            ir.subscriptions.append(Subscription(
                source=source_name, event=event, handler=handler, line=lineno))
