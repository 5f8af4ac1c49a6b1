"""Code-sanity analysis over the app IR.

Severity assignment: referenced-but-undefined symbols, empty conditional
blocks, unbalanced delimiters, missing quotes, and improper closures break or
distort the automation and are Critical; defined-but-unreferenced symbols and
empty definitions only bloat it and are Low.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import AppIR, Diagnostic, Handler, IfBlock
from .smartapp import LIFECYCLE_HANDLERS

CRITICAL = "Critical"
LOW = "Low"

KIND_SEVERITY = {
    "UndefinedReference": CRITICAL,
    "EmptyConditionalBlock": CRITICAL,
    "UnbalancedDelimiter": CRITICAL,
    "MissingQuote": CRITICAL,
    "ImproperClosure": CRITICAL,
    "UnusedDefinition": LOW,
    "EmptyDefinition": LOW,
}

# names that are part of the dialect runtime, never declared in the app
BUILTINS = {"time", "evt", "state", "notify", "log", "subscribe", "timeWindow", "app", "system"}


@dataclass(frozen=True)
class SanityFinding:
    kind: str
    severity: str
    line: int
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "severity": self.severity,
                "line": self.line, "message": self.message}


@dataclass
class SanityReport:
    app_id: str
    findings: list[SanityFinding] = field(default_factory=list)

    @property
    def critical(self) -> list[SanityFinding]:
        return [f for f in self.findings if f.severity == CRITICAL]

    @property
    def low(self) -> list[SanityFinding]:
        return [f for f in self.findings if f.severity == LOW]

    def to_dict(self) -> dict:
        return {"app": self.app_id, "findings": [f.to_dict() for f in self.findings]}


def sanity_check(ir: AppIR) -> SanityReport:
    report = SanityReport(app_id=ir.app_id)

    for diag in ir.diagnostics:
        report.findings.append(SanityFinding(
            kind=diag.kind, severity=KIND_SEVERITY.get(diag.kind, diag.severity),
            line=diag.line, message=diag.message))

    declared = ir.declared_names()
    vocab_resolved = {name for name, _ in ir.references if name not in declared}

    # referenced-but-undefined: anything used that is neither declared, builtin,
    # nor resolvable as a dialect item name (openhab items live in the vocabulary,
    # so only subjects that look like local variables are checked there)
    for name, line in sorted(set(ir.references), key=lambda t: (t[1], t[0])):
        if name in declared or name in BUILTINS:
            continue
        if ir.dialect == "openhab" and name[:1].isupper():
            continue  # item registry reference, resolved during lowering
        report.findings.append(SanityFinding(
            kind="UndefinedReference", severity=CRITICAL, line=line,
            message=f"{name!r} is referenced but never defined"))

    referenced = {name for name, _ in ir.references}
    for decl in ir.declarations:
        if decl.kind == "handler":
            if decl.name in referenced or decl.name in LIFECYCLE_HANDLERS or ir.dialect == "openhab":
                continue
            report.findings.append(SanityFinding(
                kind="UnusedDefinition", severity=LOW, line=decl.line,
                message=f"handler {decl.name!r} is defined but never subscribed"))
        elif decl.name not in referenced:
            report.findings.append(SanityFinding(
                kind="UnusedDefinition", severity=LOW, line=decl.line,
                message=f"{decl.name!r} is defined but never referenced"))

    for handler in ir.handlers.values():
        _check_blocks(report, handler)
        if not handler.body and handler.source_stmts == 0 and ir.dialect != "ifttt":
            report.findings.append(SanityFinding(
                kind="EmptyDefinition", severity=LOW, line=handler.line,
                message=f"handler {handler.name!r} has an empty body"))

    report.findings.sort(key=lambda f: (f.line, f.kind, f.message))
    return report


def _check_blocks(report: SanityReport, handler: Handler) -> None:
    def walk(stmts):
        for stmt in stmts:
            if isinstance(stmt, IfBlock):
                if not stmt.then_body:
                    report.findings.append(SanityFinding(
                        kind="EmptyConditionalBlock", severity=CRITICAL, line=stmt.line,
                        message="if-branch body is empty"))
                else:
                    walk(stmt.then_body)
                if stmt.else_body is not None:
                    if not stmt.else_body:
                        report.findings.append(SanityFinding(
                            kind="EmptyConditionalBlock", severity=CRITICAL, line=stmt.line,
                            message="else-branch body is empty"))
                    else:
                        walk(stmt.else_body)

    walk(handler.body)
