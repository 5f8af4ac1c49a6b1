"""Structural pre-scan shared by the brace-structured dialects.

Finds and repairs recoverable delimiter defects before real parsing, so the
rest of the pipeline can still analyze programs these automation frameworks
would happily run: a quote left open is closed at end of line, a brace left
open is closed at end of input, and a stray closing brace is dropped.  Every
repair is reported as a Critical diagnostic.
"""

from __future__ import annotations

from .ir import Diagnostic


def prescan(text: str) -> tuple[str, list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    lines = text.splitlines()
    repaired_lines: list[str] = []

    for lineno, line in enumerate(lines, start=1):
        code = line
        if _count_unescaped(code, '"') % 2 == 1:
            diagnostics.append(Diagnostic(
                kind="MissingQuote", severity="Critical", line=lineno,
                message="unterminated string literal; closed at end of line"))
            code = code + '"'
        stripped = _strip_strings(code)
        opens, closes = stripped.count("("), stripped.count(")")
        if opens != closes:
            diagnostics.append(Diagnostic(
                kind="UnbalancedDelimiter", severity="Critical", line=lineno,
                message="misaligned parenthesis"))
            code = code + ")" * max(0, opens - closes)
        repaired_lines.append(code)

    repaired = "\n".join(repaired_lines)
    depth = 0
    out_chars: list[str] = []
    lineno = 1
    in_string = False
    for ch in repaired:
        if ch == "\n":
            lineno += 1
        if ch == '"':
            in_string = not in_string
        if not in_string:
            if ch == "{":
                depth += 1
            elif ch == "}":
                if depth == 0:
                    diagnostics.append(Diagnostic(
                        kind="ImproperClosure", severity="Critical", line=lineno,
                        message="closing brace without a matching open block; dropped"))
                    continue
                depth -= 1
        out_chars.append(ch)
    if depth > 0:
        diagnostics.append(Diagnostic(
            kind="UnbalancedDelimiter", severity="Critical", line=lineno,
            message=f"{depth} unclosed block(s); closed at end of input"))
        out_chars.append("\n" + "}" * depth)
    return "".join(out_chars), diagnostics


def _count_unescaped(line: str, quote: str) -> int:
    count = 0
    prev = ""
    for ch in line:
        if ch == quote and prev != "\\":
            count += 1
        prev = ch
    return count


def _strip_strings(line: str) -> str:
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
            continue
        if not in_string:
            out.append(ch)
    return "".join(out)
