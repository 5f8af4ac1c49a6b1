"""OpenHAB-flavored rules subset parser.

Supported surface::

    val threshold = 5

    rule "s7-energy-saver"
    when
        Item EntryPoints changed to "open" for 5min
    then
        if (state(Thermostats, "hvac_mode") == "auto") {
            Thermostats.send("hvac_mode", "off")
        }
        log(threshold)
    end

Triggers: ``Item <name> changed to "<value>" [for <n>min]`` and
``Time window "HH:MM-HH:MM"``.  Statements: ``<item>.send("attr", "value")``,
``notify("channel", "message")``, ``log(...)``, and if/else blocks with the
same condition forms as the SmartApp dialect.  Item names resolve through the
vocabulary table, not through declarations, mirroring OpenHAB's global item
registry; ``val``/``var`` declarations only feed the sanity pass.
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
from .smartapp import (
    _COND_OPS,
    _LOG_RE,
    _NOTIFY_RE,
    _STATE_COND_RE,
    _TIME_COND_RE,
    _find_block_end,
)

_VAL_RE = re.compile(r"(?:val|var)\s+([A-Za-z_]\w*)\s*=\s*(.+)$")
_AUTHOR_RE = re.compile(r'author\s+"([^"]+)"\s*$')
_RULE_RE = re.compile(r'rule\s+"([^"]*)"\s*$')
_ITEM_TRIGGER_RE = re.compile(
    r'Item\s+([A-Za-z_]\w*)\s+changed(?:\s+to\s+"?([A-Za-z0-9_.-]+)"?)?(?:\s+for\s+(\d+)min)?\s*$')
_TIME_TRIGGER_RE = re.compile(r'Time\s+window\s+"([^"]+)"\s*$')
_SEND_RE = re.compile(r'([A-Za-z_]\w*)\s*\.\s*send\s*\(\s*"([^"]+)"\s*,\s*"([^"]*)"\s*\)')
_IF_RE = re.compile(r"if\s*\((.*)\)\s*\{\s*$")

Line = tuple[int, str]


def parse_openhab(app_id: str, text: str) -> AppIR:
    if not text.strip():
        raise FatalSyntax("empty OpenHAB source", line=1)
    repaired, diagnostics = prescan(text)
    ir = AppIR(app_id=app_id, dialect="openhab", diagnostics=diagnostics)

    lines: list[Line] = [
        (no, _strip_comment(raw)) for no, raw in enumerate(repaired.splitlines(), start=1)
    ]
    i = 0
    rule_index = 0
    while i < len(lines):
        lineno, raw = lines[i]
        line = raw.strip()
        if not line:
            i += 1
            continue
        if m := _AUTHOR_RE.match(line):
            ir.author_admin = m.group(1)
            i += 1
            continue
        if m := _VAL_RE.match(line):
            ir.declarations.append(Declaration(
                name=m.group(1), kind="val", line=lineno, value=m.group(2).strip()))
            i += 1
            continue
        if m := _RULE_RE.match(line):
            rule_name = m.group(1) or f"rule{rule_index}"
            rule_index += 1
            i = _parse_rule(ir, lines, i + 1, rule_name, lineno)
            continue
        raise FatalSyntax(f"cannot parse OpenHAB line: {line!r}", line=lineno)
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


def _parse_rule(ir: AppIR, lines: list[Line], start: int, rule_name: str, rule_line: int) -> int:
    i = start
    while i < len(lines) and not lines[i][1].strip():
        i += 1
    if i >= len(lines) or lines[i][1].strip() != "when":
        raise FatalSyntax("expected 'when' after rule header", line=rule_line)
    i += 1
    triggers: list[EventSpec | tuple[str, EventSpec]] = []
    trigger_sources: list[tuple[str, EventSpec, int]] = []
    while i < len(lines):
        lineno, raw = lines[i]
        line = raw.strip()
        if line == "then":
            i += 1
            break
        if not line or line == "or":
            i += 1
            continue
        if m := _ITEM_TRIGGER_RE.match(line):
            item, value, sustained = m.group(1), m.group(2) or "", m.group(3)
            ir.references.append((item, lineno))
            event = EventSpec(kind="state", term=f"{item}.changed" + (f".{value}" if value else ""),
                              sustained_minutes=int(sustained) if sustained else 0)
            trigger_sources.append((item, event, lineno))
            i += 1
            continue
        if m := _TIME_TRIGGER_RE.match(line):
            trigger_sources.append(("", EventSpec(kind="time", window=m.group(1)), lineno))
            i += 1
            continue
        raise FatalSyntax(f"cannot parse trigger {line!r}", line=lineno)
    else:
        raise FatalSyntax("rule body never reached 'then'", line=rule_line)

    body: list[Line] = []
    end_line = rule_line
    depth_guard = 0
    found_end = False
    while i < len(lines):
        lineno, raw = lines[i]
        line = raw.strip()
        if line == "end" and depth_guard == 0:
            found_end = True
            end_line = lineno
            i += 1
            break
        depth_guard += raw.count("{") - raw.count("}")
        body.append((lineno, raw))
        i += 1
    if not found_end:
        ir.diagnostics.append(_improper(end_line))

    handler = Handler(name=rule_name, line=rule_line)
    handler.source_stmts = sum(1 for _, l in body if l.strip() and l.strip() != "}")
    handler.body = _parse_stmts(ir, body)
    ir.handlers[rule_name] = handler
    ir.declarations.append(Declaration(name=rule_name, kind="handler", line=rule_line))
    for source, event, lineno in trigger_sources:
        ir.references.append((rule_name, lineno))
        ir.subscriptions.append(Subscription(source=source, event=event,
                                             handler=rule_name, line=lineno))
    return i


def _improper(line: int):
    from .ir import Diagnostic

    return Diagnostic(kind="ImproperClosure", severity="Critical", line=line,
                      message="rule not closed with 'end'")


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
    if m := _SEND_RE.search(line):
        ir.references.append((m.group(1), lineno))
        return ActionStmt(kind="command", subject=m.group(1), term=m.group(2),
                          value=m.group(3), line=lineno)
    if m := _LOG_RE.search(line):
        if m.group(1):
            ir.references.append((m.group(1), lineno))
        return None
    raise FatalSyntax(f"cannot parse statement {line!r}", line=lineno)
