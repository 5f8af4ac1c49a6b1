"""Precedence rules: administrator order, action order, custom ranks.

Comparison runs admin -> action -> custom; the first stage that strictly
orders the two contenders decides.  Orders are partial: pairs outside them
are incomparable and fall through to the next stage; exhausting all three
stages is a tie, which surfaces as an unresolved conflict.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError

WIN_A = "WinnerA"
WIN_B = "WinnerB"
TIE = "Tie"

# the stock action hierarchy for ACL verdicts
DEFAULT_ACL_ORDER = [
    (("acl", "DENY"), ("acl", "ALLOW")),
    (("acl", "ALLOW"), ("acl", "QUARANTINE")),
    (("acl", "QUARANTINE"), ("acl", "REDIRECT")),
]


def _transitive_closure(pairs: Iterable[tuple[str, str]]) -> set[tuple[str, str]]:
    closure = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(closure):
            for c, d in list(closure):
                if b == c and (a, d) not in closure:
                    closure.add((a, d))
                    changed = True
    for a, b in closure:
        if a == b:
            raise ConfigError(f"precedence order has a cycle through {a!r}")
    return closure


@dataclass
class PrecedenceRules:
    admin_pairs: set[tuple[str, str]] = field(default_factory=set)  # (higher, lower)
    action_pairs: list[tuple[tuple[str, str], tuple[str, str]]] = field(default_factory=list)
    custom_ranks: dict[str, float] = field(default_factory=dict)  # "user:<admin>" / "tag:<t>" -> rank

    def __post_init__(self):
        self.admin_pairs = _transitive_closure(self.admin_pairs)
        if not any(p[0][0] == "acl" for p in self.action_pairs):
            self.action_pairs = list(self.action_pairs) + DEFAULT_ACL_ORDER

    @classmethod
    def empty(cls) -> "PrecedenceRules":
        return cls()

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PrecedenceRules":
        admin = {(str(hi), str(lo)) for hi, lo in doc.get("admin_order", [])}
        action = []
        for hi, lo in doc.get("action_order", []):
            action.append(((str(hi["attr"]), str(hi["value"])), (str(lo["attr"]), str(lo["value"]))))
        custom = {str(k): float(v) for k, v in doc.get("custom", {}).items()}
        return cls(admin_pairs=admin, action_pairs=action, custom_ranks=custom)

    @classmethod
    def load(cls, path: str | Path) -> "PrecedenceRules":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def admin_beats(self, a: str, b: str) -> bool:
        return (a, b) in self.admin_pairs

    def _action_beats(self, a: tuple[str, str], b: tuple[str, str]) -> bool:
        pairs = _match_closure(self.action_pairs)
        return any(_spec_match(hi, a) and _spec_match(lo, b) for hi, lo in pairs)

    def compare(self, author_a: str, author_b: str,
                action_a: tuple[str, str], action_b: tuple[str, str],
                tags_a: tuple[str, ...] = (), tags_b: tuple[str, ...] = ()) -> str:
        # administrator level
        if author_a != author_b:
            if self.admin_beats(author_a, author_b):
                return WIN_A
            if self.admin_beats(author_b, author_a):
                return WIN_B
        # action level
        if action_a != action_b:
            if self._action_beats(action_a, action_b):
                return WIN_A
            if self._action_beats(action_b, action_a):
                return WIN_B
        # custom level: both sides must be ranked for the comparison to apply
        rank_a = self._custom_rank(author_a, tags_a)
        rank_b = self._custom_rank(author_b, tags_b)
        if rank_a is not None and rank_b is not None and rank_a != rank_b:
            return WIN_A if rank_a > rank_b else WIN_B
        return TIE

    def _custom_rank(self, author: str, tags: tuple[str, ...]) -> float | None:
        ranks = [self.custom_ranks[f"tag:{t}"] for t in tags if f"tag:{t}" in self.custom_ranks]
        if f"user:{author}" in self.custom_ranks:
            ranks.append(self.custom_ranks[f"user:{author}"])
        return max(ranks) if ranks else None

    def totally_orders(self, authors: Iterable[str]) -> bool:
        authors = list(authors)
        return all(
            a == b or self.admin_beats(a, b) or self.admin_beats(b, a)
            for a in authors for b in authors
        )


def _spec_match(spec: tuple[str, str], action: tuple[str, str]) -> bool:
    return spec[0] == action[0] and (spec[1] == "*" or spec[1] == action[1])


def _match_closure(pairs: list[tuple[tuple[str, str], tuple[str, str]]]):
    # wildcard specs make a full closure ill-defined; chain concrete pairs only
    closure = list(pairs)
    concrete = [(hi, lo) for hi, lo in pairs if hi[1] != "*" and lo[1] != "*"]
    changed = True
    while changed:
        changed = False
        for hi, mid in list(concrete):
            for mid2, lo in list(concrete):
                if mid == mid2 and (hi, lo) not in concrete:
                    concrete.append((hi, lo))
                    closure.append((hi, lo))
                    changed = True
    return closure
