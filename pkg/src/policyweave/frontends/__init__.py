"""Dialect frontends: parse heterogeneous automation programs into one IR,
check code sanity, and lower to vendor-independent policies."""

from __future__ import annotations

from pathlib import Path

from ..errors import UnsupportedDialect
from .ifttt import parse_ifttt
from .ir import AppIR
from .lower import PolicyMapping, lower
from .mud import parse_mud
from .openhab import parse_openhab
from .sanity import SanityFinding, SanityReport, sanity_check
from .smartapp import parse_smartapp

EXTENSIONS = {
    ".smartapp": "smartapp",
    ".groovy": "smartapp",
    ".rules": "openhab",
    ".applet": "ifttt",
    ".ifttt": "ifttt",
    ".mud": "mud",
}

_PARSERS = {
    "smartapp": parse_smartapp,
    "openhab": parse_openhab,
    "ifttt": parse_ifttt,
    "mud": parse_mud,
}


def parse_app(app_id: str, text: str, dialect: str) -> AppIR:
    """Parse one app source in the named dialect."""
    if dialect not in _PARSERS:
        raise UnsupportedDialect(dialect)
    return _PARSERS[dialect](app_id, text)


def dialect_for_path(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in EXTENSIONS:
        raise UnsupportedDialect(suffix or "<none>")
    return EXTENSIONS[suffix]


def parse_app_file(path: str | Path, dialect: str | None = None) -> AppIR:
    path = Path(path)
    return parse_app(path.stem, path.read_text(), dialect or dialect_for_path(path))


__all__ = [
    "AppIR",
    "PolicyMapping",
    "SanityFinding",
    "SanityReport",
    "dialect_for_path",
    "lower",
    "parse_app",
    "parse_app_file",
    "sanity_check",
]
