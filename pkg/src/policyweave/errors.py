"""Exception hierarchy for the policy engine.

Parse-type errors carry a position where one is known; validation-type
problems that are data rather than failures are returned as values by the
relevant operations and do not appear here.
"""

from __future__ import annotations


class PolicyWeaveError(Exception):
    """Base class for all engine errors."""


# --- inventory ---

class MalformedRecord(PolicyWeaveError):
    def __init__(self, message: str, index: int | None = None, field: str | None = None):
        self.index = index
        self.field = field
        where = []
        if index is not None:
            where.append(f"record {index}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class DuplicateDeviceId(PolicyWeaveError):
    def __init__(self, device_id: str):
        self.device_id = device_id
        super().__init__(f"duplicate device id with conflicting fields: {device_id!r}")


# --- abstraction mappings / trees ---

class MappingSyntaxError(PolicyWeaveError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class UnknownDimension(PolicyWeaveError):
    def __init__(self, dimension: str):
        self.dimension = dimension
        super().__init__(f"unknown abstraction dimension: {dimension!r}")


class UnknownTree(PolicyWeaveError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no abstraction tree named {name!r}")


class UnknownNode(PolicyWeaveError):
    def __init__(self, label: str, tree: str | None = None):
        self.label = label
        self.tree = tree
        where = f" in tree {tree!r}" if tree else ""
        super().__init__(f"no node labelled {label!r}{where}")


class AmbiguousNode(PolicyWeaveError):
    def __init__(self, label: str, count: int):
        self.label = label
        self.count = count
        super().__init__(
            f"label {label!r} matches {count} nodes; disambiguate with parent{{...}} or a tree name"
        )


# --- policy syntax ---

class PolicySyntaxError(PolicyWeaveError):
    def __init__(self, message: str, position: int = 0):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class UnknownKeyword(PolicyWeaveError):
    def __init__(self, keyword: str):
        self.keyword = keyword
        super().__init__(f"unknown policy keyword: {keyword!r}")


class UnknownComparator(PolicyWeaveError):
    def __init__(self, comparator: str):
        self.comparator = comparator
        super().__init__(f"unknown comparator {comparator!r}; allowed: ! = < >")


# --- frontends ---

class UnsupportedDialect(PolicyWeaveError):
    def __init__(self, dialect: str):
        self.dialect = dialect
        super().__init__(f"unsupported app dialect: {dialect!r}")


class FatalSyntax(PolicyWeaveError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnmappedAttribute(PolicyWeaveError):
    def __init__(self, term: str, dialect: str):
        self.term = term
        self.dialect = dialect
        super().__init__(f"no vocabulary mapping for {dialect} term {term!r}")


class UnresolvedDevice(PolicyWeaveError):
    def __init__(self, reference: str):
        self.reference = reference
        super().__init__(f"device reference {reference!r} does not resolve in any tree")


# --- composition / analysis / reconcile ---

class UnknownPolicyId(PolicyWeaveError):
    def __init__(self, policy_id: str):
        self.policy_id = policy_id
        super().__init__(f"no policy with id {policy_id!r} in the composed graph")


class TooFewPolicies(PolicyWeaveError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"potential-conflict analysis needs at least 2 policies, got {count}")


class NoCapableDevice(PolicyWeaveError):
    def __init__(self, edge: str):
        self.edge = edge
        super().__init__(f"no capable device for rule derived from edge {edge}")


class UnsupportedFindingKind(PolicyWeaveError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"policy inference does not handle findings of kind {kind!r}")


class ConfigError(PolicyWeaveError):
    pass
