"""policyweave: vendor-independent IoT automation policy engine.

Parses heterogeneous automation programs (SmartApp, OpenHAB, IFTTT, MUD
subsets) into graph policies over per-administrator abstraction trees,
composes them with precedence-based conflict resolution, runs static security
analyses (rogue, gap, loop/chain, potential run-time, access, code sanity),
and reconciles the conflict-free graph back into device-specific rules.
"""

__version__ = "0.1.0"

from pathlib import Path


def corpus_path() -> Path:
    """Location of the bundled smart-building regression corpus."""
    return Path(__file__).parent / "corpus"

