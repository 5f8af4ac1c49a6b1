"""Attribute vocabulary: the data file that makes dialect lowering and
conflict reasoning work without code changes.

Sectioned text format, ``#`` comments::

    [terms]
    smartapp: motion.active -> motion{=active}
    ifttt: weather.outdoor_temperature -> outdoor_temperature

    [attributes]
    outdoor_temperature: environmental unit=F
    smoke_state: exogenous
    thermostat_f: setpoint unit=F

    [relations]
    outdoor_humidity{!40-50} <-> outdoor_temperature{=60-82}
    smoke_state{=fire} -> temperature{>95}

    [implies]
    sprinkler{=ON} requires water_valve{=open}

    [effects]
    sprinkler{=ON} causes leak_state{=wet}

    [opposes]
    hvac_mode{=off} opposes thermostat_f{*}

``[terms]`` maps dialect-specific names onto engine attributes and node
labels.  ``[attributes]`` classifies attributes: ``environmental`` values come
from weather and cannot be scheduled; ``exogenous`` device states are sensor
readings no automation sets; ``setpoint`` numeric attributes describe a target
the device drives toward.  ``[relations]`` couple condition regions on
different attributes (``<->`` both ways, ``->`` one way).  ``[implies]`` adds
commands that are physically required by another command.  ``[effects]``
declare states a command brings about.  ``[opposes]`` marks cross-attribute
command contradictions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, UnmappedAttribute
from .vigraph import Constraint, parse_constraint_body

_CLAUSE_RE = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*\{([^{}]*)\}\s*$")


def _parse_clause(text: str) -> Constraint | tuple[str, None]:
    m = _CLAUSE_RE.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse vocabulary clause {text!r}")
    attr, body = m.group(1), m.group(2).strip()
    if body == "*":
        return (attr, None)
    return parse_constraint_body(attr, body)


@dataclass(frozen=True)
class TermMapping:
    dialect: str
    term: str
    replacement: str  # engine attribute name or rendered constraint / node label


@dataclass(frozen=True)
class Relation:
    """Condition coupling: when `left` holds, `right` holds (and vice versa
    for bidirectional relations)."""

    left: Constraint
    right: Constraint
    bidirectional: bool


@dataclass(frozen=True)
class Implication:
    """command -> physically required companion command."""

    cause: tuple[str, str]   # (attr, value)
    requires: tuple[str, str]


@dataclass(frozen=True)
class Effect:
    """command -> state it brings about."""

    cause: tuple[str, str]
    state: Constraint


@dataclass(frozen=True)
class Opposition:
    """Cross-attribute contradiction; value '*' matches any value."""

    a: tuple[str, str]
    b: tuple[str, str]

    def matches(self, x: tuple[str, str], y: tuple[str, str]) -> bool:
        return (_cmd_match(self.a, x) and _cmd_match(self.b, y)) or \
               (_cmd_match(self.a, y) and _cmd_match(self.b, x))


def _cmd_match(pattern: tuple[str, str], cmd: tuple[str, str]) -> bool:
    return pattern[0] == cmd[0] and (pattern[1] == "*" or pattern[1] == cmd[1])


class Vocabulary:
    def __init__(self):
        self.terms: dict[tuple[str, str], str] = {}
        self.attribute_class: dict[str, str] = {}  # environmental | exogenous | setpoint
        self.units: dict[str, str] = {}
        self.drives: dict[str, str] = {}  # setpoint attr -> measured attr it drives
        self.relations: list[Relation] = []
        self.implications: list[Implication] = []
        self.effects: list[Effect] = []
        self.oppositions: list[Opposition] = []
        self.grants: set[tuple[str, str]] = set()  # commands that open access

    # -- term mapping -------------------------------------------------------

    def map_term(self, dialect: str, term: str) -> str:
        key = (dialect, term)
        if key in self.terms:
            return self.terms[key]
        if ("*", term) in self.terms:
            return self.terms[("*", term)]
        raise UnmappedAttribute(term, dialect)

    def has_term(self, dialect: str, term: str) -> bool:
        return (dialect, term) in self.terms or ("*", term) in self.terms

    # -- attribute classes ----------------------------------------------------

    def is_environmental(self, attr: str) -> bool:
        return self.attribute_class.get(attr) == "environmental"

    def is_setpoint(self, attr: str) -> bool:
        return self.attribute_class.get(attr) == "setpoint"

    # -- reasoning data -------------------------------------------------------

    def implied_commands(self, attr: str, value: str) -> list[tuple[str, str]]:
        return [imp.requires for imp in self.implications if imp.cause == (attr, value)]

    def command_effects(self, attr: str, value: str) -> list[Constraint]:
        return [eff.state for eff in self.effects if eff.cause == (attr, value)]

    def opposed(self, a: tuple[str, str], b: tuple[str, str]) -> bool:
        if a[0] == b[0]:
            return a[1] != b[1]
        return any(op.matches(a, b) for op in self.oppositions)

    def translations(self, constraint: Constraint) -> list[Constraint]:
        """Constraints on other attributes implied by this one via relations."""
        out = []
        for rel in self.relations:
            if rel.left == constraint:
                out.append(rel.right)
            elif rel.bidirectional and rel.right == constraint:
                out.append(rel.left)
        return out


def parse_vocabulary(text: str) -> Vocabulary:
    vocab = Vocabulary()
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        try:
            _parse_line(vocab, section, line)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"vocabulary line {lineno}: {exc}") from exc
    return vocab


def _parse_line(vocab: Vocabulary, section: str, line: str) -> None:
    if section == "terms":
        head, arrow, replacement = line.partition("->")
        if not arrow:
            raise ConfigError(f"term mapping needs '->': {line!r}")
        dialect, colon, term = head.partition(":")
        if not colon:
            dialect, term = "*", head
        vocab.terms[(dialect.strip(), term.strip())] = replacement.strip()
        return
    if section == "attributes":
        name, colon, spec = line.partition(":")
        if not colon:
            raise ConfigError(f"attribute line needs ':': {line!r}")
        for token in spec.split():
            if token.startswith("unit="):
                vocab.units[name.strip()] = token[5:]
            elif token.startswith("drives="):
                vocab.drives[name.strip()] = token[7:]
            elif token in ("environmental", "exogenous", "setpoint"):
                vocab.attribute_class[name.strip()] = token
            else:
                raise ConfigError(f"unknown attribute flag {token!r}")
        return
    if section == "relations":
        if "<->" in line:
            left, right = line.split("<->")
            bidir = True
        elif "->" in line:
            left, right = line.split("->")
            bidir = False
        else:
            raise ConfigError(f"relation needs '->' or '<->': {line!r}")
        lc, rc = _parse_clause(left), _parse_clause(right)
        if not isinstance(lc, Constraint) or not isinstance(rc, Constraint):
            raise ConfigError(f"relations need concrete constraints: {line!r}")
        vocab.relations.append(Relation(lc, rc, bidir))
        return
    if section == "implies":
        left, kw, right = line.partition("requires")
        lc, rc = _parse_clause(left), _parse_clause(right)
        if not kw or not isinstance(lc, Constraint) or not isinstance(rc, Constraint):
            raise ConfigError(f"bad implication: {line!r}")
        vocab.implications.append(Implication((lc.attr, lc.value), (rc.attr, rc.value)))
        return
    if section == "effects":
        left, kw, right = line.partition("causes")
        lc, rc = _parse_clause(left), _parse_clause(right)
        if not kw or not isinstance(lc, Constraint) or not isinstance(rc, Constraint):
            raise ConfigError(f"bad effect: {line!r}")
        vocab.effects.append(Effect((lc.attr, lc.value), rc))
        return
    if section == "grants":
        clause = _parse_clause(line)
        if not isinstance(clause, Constraint):
            raise ConfigError(f"grant entries need attr{{=value}}: {line!r}")
        vocab.grants.add((clause.attr, clause.value))
        return
    if section == "opposes":
        left, kw, right = line.partition("opposes")
        if not kw:
            raise ConfigError(f"bad opposition: {line!r}")
        lc, rc = _parse_clause(left), _parse_clause(right)
        a = (lc.attr, lc.value) if isinstance(lc, Constraint) else (lc[0], "*")
        b = (rc.attr, rc.value) if isinstance(rc, Constraint) else (rc[0], "*")
        vocab.oppositions.append(Opposition(a, b))
        return
    raise ConfigError(f"line outside a known section: {line!r}")


def load_vocabulary(path: str | Path) -> Vocabulary:
    return parse_vocabulary(Path(path).read_text())
