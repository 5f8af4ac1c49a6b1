"""Common app-level IR that all four dialect parsers target.

The IR keeps the shape of the source program (declarations, subscriptions,
handlers with nested if/else) so sanity analysis can reason about the code,
and flattens to (subscription, condition-path, actions) branches for lowering.
Structural defects found during parsing (unbalanced delimiters, missing
quotes) ride along as diagnostics instead of aborting the parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..errors import FatalSyntax

DIALECTS = ("smartapp", "openhab", "ifttt", "mud")


@dataclass(frozen=True)
class Declaration:
    name: str
    kind: str  # 'input' | 'val' | 'var' | 'handler'
    line: int
    selector: str = ""  # device selector for inputs
    value: str = ""


@dataclass(frozen=True)
class EventSpec:
    """What a subscription listens for."""

    kind: str  # 'state' | 'time' | 'always'
    term: str = ""          # dialect-specific event term ('motion.active')
    window: str = ""        # 'HH:MM-HH:MM' for time triggers
    sustained_minutes: int = 0


@dataclass(frozen=True)
class Subscription:
    source: str  # declaration name or dialect selector
    event: EventSpec
    handler: str
    line: int


@dataclass(frozen=True)
class CondExpr:
    """One comparison in a handler condition."""

    kind: str  # 'state' | 'time'
    term: str = ""   # dialect term for the attribute
    subject: str = ""  # device selector/declaration the attribute is read from
    op: str = "="
    value: str = ""
    window: str = ""
    negated: bool = False


@dataclass(frozen=True)
class ActionStmt:
    kind: str  # 'command' | 'notify' | 'acl-add' | 'acl-remove'
    subject: str = ""  # declaration name or selector
    term: str = ""     # dialect command/attribute term
    value: str = ""
    message: str = ""
    line: int = 0


@dataclass
class IfBlock:
    condition: CondExpr
    then_body: list["Stmt"] = field(default_factory=list)
    else_body: list["Stmt"] | None = None
    line: int = 0


Stmt = ActionStmt | IfBlock


@dataclass
class Handler:
    name: str
    body: list[Stmt] = field(default_factory=list)
    line: int = 0
    source_stmts: int = 0  # statement lines present in the source, even ones
                           # (subscribe, log) that produce no IR actions


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    severity: str  # 'Critical' | 'Low'
    line: int
    message: str


@dataclass
class AclEntry:
    """A MUD-style access control entry."""

    direction: str  # 'from-device' | 'to-device'
    endpoint: str   # 'controller' | 'local-networks' | 'internet' | 'same-manufacturer' | 'device:<id>'
    action: str     # 'accept' | 'drop'
    traffic: str = ""
    line: int = 0


@dataclass
class AppIR:
    app_id: str
    dialect: str
    author_admin: str = ""
    declarations: list[Declaration] = field(default_factory=list)
    subscriptions: list[Subscription] = field(default_factory=list)
    handlers: dict[str, Handler] = field(default_factory=dict)
    acl_entries: list[AclEntry] = field(default_factory=list)
    device_scope: str = ""  # MUD: the profiled device class
    diagnostics: list[Diagnostic] = field(default_factory=list)
    references: list[tuple[str, int]] = field(default_factory=list)  # (name, line) uses

    def declared_names(self) -> set[str]:
        return {d.name for d in self.declarations}

    def branches(self, handler_name: str) -> list[tuple[list[CondExpr], list[ActionStmt]]]:
        """Flatten a handler's if/else tree into leaf branches: each branch is
        the conjunction of conditions on the path plus the actions it runs."""
        handler = self.handlers.get(handler_name)
        if handler is None:
            return []
        out: list[tuple[list[CondExpr], list[ActionStmt]]] = []

        def walk(stmts: Iterable[Stmt], conds: list[CondExpr]):
            actions: list[ActionStmt] = []
            for stmt in stmts:
                if isinstance(stmt, ActionStmt):
                    actions.append(stmt)
                else:
                    walk(stmt.then_body, conds + [stmt.condition])
                    if stmt.else_body is not None:
                        walk(stmt.else_body, conds + [negate(stmt.condition)])
            if actions:
                out.append((conds, actions))

        walk(handler.body, [])
        return out


def negate(cond: CondExpr) -> CondExpr:
    """Negation within the engine's comparator set.  Equality flips between
    '=' and '!'; time windows complement; ordered comparisons have no exact
    complement in the comparator set and are rejected."""
    from dataclasses import replace

    if cond.kind == "time":
        lo, _, hi = cond.window.partition("-")
        return replace(cond, window=f"{hi}-{lo}")
    if cond.op == "=":
        return replace(cond, op="!")
    if cond.op == "!":
        return replace(cond, op="=")
    raise FatalSyntax(f"else-branch over ordered comparison {cond.op!r} is not expressible")
