"""Exact interval algebra for condition regions.

Two region families are used throughout the engine:

* ``TimeWindow`` / time regions — minutes on a wrap-around 24h clock,
  half-open ``[start, end)`` arcs.  A window whose end precedes its start
  wraps midnight (22:00-07:00 contains 02:00 and excludes 12:00).
* ``Region`` — unions of numeric intervals with explicitly open or closed
  endpoints.  All operations are endpoint comparisons, never arithmetic,
  so unions/complements are exact.

Enumerated state domains are handled with plain frozensets and need no
machinery here.
"""

from __future__ import annotations

from dataclasses import dataclass

MINUTES_PER_DAY = 24 * 60


def parse_hhmm(text: str) -> int:
    """'HH:MM' -> minutes since midnight."""
    hh, _, mm = text.partition(":")
    minutes = int(hh) * 60 + int(mm or "0")
    if not (0 <= minutes < MINUTES_PER_DAY) and minutes != MINUTES_PER_DAY:
        raise ValueError(f"time of day out of range: {text!r}")
    return minutes % MINUTES_PER_DAY


def format_hhmm(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


@dataclass(frozen=True)
class TimeWindow:
    """Half-open daily window [start, end) in minutes; wraps midnight when end <= start."""

    start: int
    end: int

    def __post_init__(self):
        if self.start == self.end:
            raise ValueError("temporal window must have start != end")

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        lo, _, hi = text.partition("-")
        return cls(parse_hhmm(lo.strip()), parse_hhmm(hi.strip()))

    @property
    def wraps(self) -> bool:
        return self.end < self.start

    def arcs(self) -> list[tuple[int, int]]:
        """Linear [lo, hi) pieces over [0, 1440)."""
        if self.wraps:
            return [(self.start, MINUTES_PER_DAY), (0, self.end)]
        return [(self.start, self.end)]

    def contains(self, minute: int) -> bool:
        return any(lo <= minute < hi for lo, hi in self.arcs())

    def intersects(self, other: "TimeWindow") -> bool:
        return any(
            lo1 < hi2 and lo2 < hi1
            for lo1, hi1 in self.arcs()
            for lo2, hi2 in other.arcs()
        )

    def __str__(self) -> str:
        return f"{format_hhmm(self.start)}-{format_hhmm(self.end)}"


def arcs_union(windows: list[TimeWindow]) -> list[tuple[int, int]]:
    """Union of windows as sorted disjoint linear arcs over [0, 1440)."""
    pieces = sorted(arc for w in windows for arc in w.arcs())
    merged: list[tuple[int, int]] = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def arcs_complement(arcs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Complement within the full day, as sorted disjoint arcs."""
    gaps: list[tuple[int, int]] = []
    cursor = 0
    for lo, hi in arcs:
        if lo > cursor:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < MINUTES_PER_DAY:
        gaps.append((cursor, MINUTES_PER_DAY))
    return gaps


def arcs_to_windows(arcs: list[tuple[int, int]]) -> list[TimeWindow]:
    """Rejoin a trailing arc that touches midnight with a leading arc, so a
    complement like [0,540)+[1260,1440) renders as the single window 21:00-09:00."""
    if not arcs:
        return []
    arcs = sorted(arcs)
    if arcs == [(0, MINUTES_PER_DAY)]:
        return [FULL_DAY]
    if len(arcs) >= 2 and arcs[0][0] == 0 and arcs[-1][1] == MINUTES_PER_DAY:
        wrapped = TimeWindow(arcs[-1][0], arcs[0][1])
        return [wrapped] + [TimeWindow(lo, hi) for lo, hi in arcs[1:-1]]
    return [TimeWindow(lo, hi) for lo, hi in arcs]


@dataclass(frozen=True)
class Interval:
    """Numeric interval with explicit endpoint closedness."""

    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_c = self.lo, self.lo_closed
        else:
            lo, lo_c = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_c = self.hi, self.hi_closed
        else:
            hi, hi_c = other.hi, other.hi_closed
        return Interval(lo, hi, lo_c, hi_c)

    def touches_or_overlaps(self, other: "Interval") -> bool:
        """True when the union of the two is a single interval."""
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed and other.lo_closed):
            a, b = other, self
        else:
            a, b = self, other
        if b.lo < a.hi:
            return True
        if b.lo == a.hi:
            return a.hi_closed or b.lo_closed
        return False

    def __str__(self) -> str:
        lo_b = "[" if self.lo_closed else "("
        hi_b = "]" if self.hi_closed else ")"
        return f"{lo_b}{_fmt(self.lo)}, {_fmt(self.hi)}{hi_b}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


class Region:
    """A union of disjoint numeric intervals, kept sorted and normalized."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: list[Interval] | None = None):
        pieces = [iv for iv in (intervals or []) if not iv.is_empty()]
        pieces.sort(key=lambda iv: (iv.lo, not iv.lo_closed))
        merged: list[Interval] = []
        for iv in pieces:
            if merged and merged[-1].touches_or_overlaps(iv):
                last = merged[-1]
                if iv.hi > last.hi or (iv.hi == last.hi and iv.hi_closed):
                    hi, hi_c = iv.hi, iv.hi_closed
                else:
                    hi, hi_c = last.hi, last.hi_closed
                merged[-1] = Interval(last.lo, hi, last.lo_closed, hi_c)
            else:
                merged.append(iv)
        self.intervals = merged

    @classmethod
    def empty(cls) -> "Region":
        return cls([])

    @classmethod
    def span(cls, lo: float, hi: float, lo_closed: bool = True, hi_closed: bool = True) -> "Region":
        return cls([Interval(lo, hi, lo_closed, hi_closed)])

    @classmethod
    def point(cls, x: float) -> "Region":
        return cls([Interval(x, x)])

    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.intervals)

    def union(self, other: "Region") -> "Region":
        return Region(self.intervals + other.intervals)

    def intersect(self, other: "Region") -> "Region":
        out = [a.intersect(b) for a in self.intervals for b in other.intervals]
        return Region(out)

    def complement_within(self, domain: Interval) -> "Region":
        """Exact complement of self inside the domain interval."""
        gaps: list[Interval] = []
        cursor_lo, cursor_closed = domain.lo, domain.lo_closed
        for iv in self.intersect(Region([domain])).intervals:
            gap = Interval(cursor_lo, iv.lo, cursor_closed, not iv.lo_closed)
            if not gap.is_empty():
                gaps.append(gap)
            cursor_lo, cursor_closed = iv.hi, not iv.hi_closed
        tail = Interval(cursor_lo, domain.hi, cursor_closed, domain.hi_closed)
        if not tail.is_empty():
            gaps.append(tail)
        return Region(gaps)

    def __eq__(self, other) -> bool:
        return isinstance(other, Region) and self.intervals == other.intervals

    def __hash__(self):
        return hash(tuple(self.intervals))

    def __str__(self) -> str:
        if not self.intervals:
            return "(empty)"
        return " + ".join(str(iv) for iv in self.intervals)


FULL_DAY = TimeWindow(0, MINUTES_PER_DAY)
