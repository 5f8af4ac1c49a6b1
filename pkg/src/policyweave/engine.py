"""Pipeline orchestration: one object that loads a project, runs
ingest -> parse -> sanity -> lower -> validate -> rogue -> compose -> analyze,
and serves mutations (add/remove policy, resolve tie, accept/reject proposal)
over immutable snapshots.  The CLI and the HTTP service both drive this type,
so their reports are identical by construction.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import analysis as ana
from .composition import ComposedGraph, compose, compute_elevel, incremental_update, normalize
from .errors import ConfigError, UnknownPolicyId
from .frontends import dialect_for_path, lower, parse_app_file, sanity_check
from .frontends.lower import PolicyMapping
from .frontends.sanity import SanityReport
from .inventory import InfrastructureDB, load_inventory
from .precedence import PrecedenceRules
from .reconcile import DeviceRule, ProposedPolicy, infer_policy, reconcile, write_rule_bundle
from .trees import AbstractionTree, TreeSet, build_tree, parse_mapping_declarations
from .vigraph import VIPolicy, parse_policy, parse_policy_file, serialize_policy, validate
from .vocab import Vocabulary, load_vocabulary


@dataclass
class ProjectConfig:
    root: Path
    inventory: Path
    mapping_files: list[Path]
    vocabulary: Path
    precedence: Path | None
    app_files: list[Path]
    policy_files: list[Path]
    gap_trees: list[str]
    output: Path
    port: int = 8099
    seed: int = 0

    @classmethod
    def load(cls, path: str | Path) -> "ProjectConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        root = path.parent

        def resolve(entry: str) -> Path:
            p = root / entry
            if not p.exists():
                raise ConfigError(f"referenced path does not exist: {p}")
            return p

        app_files: list[Path] = []
        for entry in doc.get("apps", []):
            p = resolve(entry)
            if p.is_dir():
                app_files.extend(sorted(f for f in p.rglob("*") if f.is_file()))
            else:
                app_files.append(p)
        return cls(
            root=root,
            inventory=resolve(doc["inventory"]),
            mapping_files=[resolve(e) for e in doc.get("mappings", [])],
            vocabulary=resolve(doc["vocabulary"]),
            precedence=resolve(doc["precedence"]) if doc.get("precedence") else None,
            app_files=app_files,
            policy_files=[resolve(e) for e in doc.get("policies", [])],
            gap_trees=list(doc.get("gap_trees", [])),
            output=root / doc.get("output", "out"),
            port=int(doc.get("port", 8099)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass
class RunReport:
    timings: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    annotations: dict[str, str] = field(default_factory=dict)  # human false-positive labels

    def to_dict(self) -> dict:
        return {
            "timings_ms": {k: round(v * 1000, 3) for k, v in sorted(self.timings.items())},
            "counts": dict(sorted(self.counts.items())),
            "annotations": dict(sorted(self.annotations.items())),
        }


class Engine:
    """One loaded project.  All mutating entry points bump the snapshot id."""

    def __init__(self, config: ProjectConfig):
        self.config = config
        self.snapshot_id = 0
        self.report = RunReport()
        self.db: InfrastructureDB | None = None
        self.trees = TreeSet()
        self.vocab = Vocabulary()
        self.prec = PrecedenceRules.empty()
        self.sanity: dict[str, SanityReport] = {}
        self.mappings: dict[str, PolicyMapping] = {}
        self.policies: dict[str, VIPolicy] = {}
        self.validation_errors: dict[str, list[str]] = {}
        self.graph: ComposedGraph | None = None
        self.findings: list[ana.Finding] = []
        self.proposals: dict[str, ProposedPolicy] = {}
        self._proposal_seq = 0

    # -- pipeline ------------------------------------------------------------

    def load(self) -> "Engine":
        t0 = time.perf_counter()
        self.db = load_inventory(self.config.inventory)
        self.vocab = load_vocabulary(self.config.vocabulary)
        if self.config.precedence:
            self.prec = PrecedenceRules.load(self.config.precedence)
        known_dims = set(self.db.state_domains) | {"time"}
        for dev in self.db:
            known_dims.update(dev.dynamic_states)
            known_dims.update(dev.capabilities)
        trees = TreeSet()
        for path in self.config.mapping_files:
            for owner, mapping in parse_mapping_declarations(path.read_text(), known_dims):
                trees.add(build_tree(self.db, mapping, owner))
        self.trees = trees
        self.report.timings["abstraction"] = time.perf_counter() - t0
        return self

    def parse_and_lower(self) -> None:
        assert self.db is not None
        t0 = time.perf_counter()
        for path in self.config.app_files:
            dialect = dialect_for_path(path)
            ir = parse_app_file(path, dialect)
            self.sanity[ir.app_id] = sanity_check(ir)
            try:
                policies, mapping = lower(ir, self.vocab, self.trees)
            except Exception as exc:
                # apps with unresolved symbols cannot lower; their sanity
                # findings already tell the administrator why
                self.validation_errors[ir.app_id] = [f"{type(exc).__name__}: {exc}"]
                continue
            self.mappings[ir.app_id] = mapping
            for policy in policies:
                self.policies[policy.policy_id] = policy
        for path in self.config.policy_files:
            for policy in parse_policy_file(path.read_text()):
                self.policies[policy.policy_id] = policy
        for pid, policy in sorted(self.policies.items()):
            errors = validate(policy, self.trees, self.db)
            if errors:
                self.validation_errors[pid] = [str(e) for e in errors]
        self.report.timings["parse_lower"] = time.perf_counter() - t0
        self.report.counts["apps"] = len(self.sanity)
        self.report.counts["policies"] = len(self.policies)

    def compose_graph(self) -> None:
        assert self.db is not None
        t0 = time.perf_counter()
        ordered = [self.policies[pid] for pid in sorted(self.policies)]
        self.graph = compose(ordered, self.trees, self.db, self.vocab, self.prec)
        self.report.timings["compose"] = time.perf_counter() - t0

    def analyze(self) -> None:
        assert self.graph is not None and self.db is not None
        t0 = time.perf_counter()
        findings: list[ana.Finding] = []
        for pid in sorted(self.policies):
            policy = self.policies[pid]
            finding = ana.detect_rogue(policy, self.trees.owned_by(policy.author_admin),
                                       self.trees)
            if finding:
                findings.append(finding)
        loop_findings = ana.detect_loops(self.graph, self.vocab, self.prec)
        findings.extend(loop_findings)
        gap_trees = [self.trees.get(name) for name in self.config.gap_trees]
        findings.extend(ana.gap_analysis(self.graph, gap_trees, self.db, self.vocab))
        if len(self.policies) >= 2:
            findings.extend(ana.detect_potential(
                list(self.policies.values()), self.graph, self.sanity, self.prec,
                self.vocab, self.db, loop_findings=loop_findings, seed=self.config.seed))
        findings.extend(ana.detect_access_violations(
            list(self.policies.values()), self.graph, self.db, self.vocab))
        self.findings = sorted(findings, key=lambda f: f.sort_key())
        self._refresh_proposals()
        self.propose_for_findings()
        self.report.timings["analyze"] = time.perf_counter() - t0
        counts: dict[str, int] = {}
        for finding in self.findings:
            counts[finding.kind] = counts.get(finding.kind, 0) + 1
        for kind in ana.FINDING_KINDS:
            self.report.counts[f"finding:{kind}"] = counts.get(kind, 0)
        self.report.counts["conflicts:unresolved"] = len(self.graph.active_conflicts("Unresolved"))
        self.report.counts["conflicts:resolved"] = len(self.graph.active_conflicts("Resolved"))
        self.report.counts["conflicts:duplicate"] = len(self.graph.active_conflicts("Duplicate"))
        self.report.counts["sanity:critical"] = sum(len(r.critical) for r in self.sanity.values())
        self.report.counts["sanity:low"] = sum(len(r.low) for r in self.sanity.values())
        self.snapshot_id += 1

    def _refresh_proposals(self) -> None:
        # keep pending proposals only while their finding still exists
        current = {f.sort_key() for f in self.findings}
        for proposal in self.proposals.values():
            if proposal.status == "Pending" and proposal.finding_key not in current:
                proposal.status = "Obsolete"

    def run(self) -> "Engine":
        self.load()
        self.parse_and_lower()
        self.compose_graph()
        self.analyze()
        return self

    # -- proposals ------------------------------------------------------------

    def propose_for_findings(self) -> None:
        assert self.graph is not None
        for finding in self.findings:
            if finding.kind not in ("Gap", "PotentialRuntime", "Loop"):
                continue
            if not all(pid in self.graph.policies for pid in finding.policies):
                continue
            if any(p.finding_key == finding.sort_key() and p.status == "Pending"
                   for p in self.proposals.values()):
                continue
            self._proposal_seq += 1
            proposal = infer_policy(finding, self.graph, self._proposal_seq)
            proposal.finding_key = finding.sort_key()
            self.proposals[proposal.proposal_id] = proposal

    # -- mutations (service + CLI share these) ---------------------------------

    def add_policy(self, text: str) -> dict:
        assert self.graph is not None and self.db is not None
        policy = parse_policy(text)
        errors = validate(policy, self.trees, self.db)
        if errors:
            raise ConfigError("; ".join(str(e) for e in errors))
        self.policies[policy.policy_id] = policy
        records = incremental_update(self.graph, [policy], [])
        self.analyze()
        return {"policy": policy.policy_id,
                "records": [r.to_dict() for r in records],
                "summary": self.summary()}

    def remove_policy(self, policy_id: str) -> dict:
        assert self.graph is not None
        if policy_id not in self.policies:
            raise UnknownPolicyId(policy_id)
        del self.policies[policy_id]
        records = incremental_update(self.graph, [], [policy_id])
        self.analyze()
        return {"policy": policy_id,
                "records": [r.to_dict() for r in records],
                "summary": self.summary()}

    def resolve_tie(self, record_id: int, winner: str) -> dict:
        assert self.graph is not None
        record = next((c for c in self.graph.active_conflicts("Unresolved")
                       if c.record_id == record_id), None)
        if record is None:
            raise ConfigError(f"no unresolved conflict with id {record_id}")
        if winner not in record.policies:
            raise ConfigError(f"{winner!r} is not a party to conflict {record_id}")
        loser = next(p for p in record.policies if p != winner)
        self.graph.resolve_tie(record, winner, loser)
        self.analyze()
        return {"record": record.to_dict(), "summary": self.summary()}

    def accept_proposal(self, proposal_id: str) -> dict:
        assert self.graph is not None
        proposal = self._get_proposal(proposal_id)
        proposal.status = "Accepted"
        removed = []
        if proposal.replaces in self.policies:
            del self.policies[proposal.replaces]
            removed.append(proposal.replaces)
        self.policies[proposal.proposal.policy_id] = proposal.proposal
        incremental_update(self.graph, [proposal.proposal], removed)
        self.analyze()
        return {"proposal": proposal.to_dict(), "summary": self.summary()}

    def reject_proposal(self, proposal_id: str) -> dict:
        proposal = self._get_proposal(proposal_id)
        proposal.status = "Rejected"
        self.snapshot_id += 1
        return {"proposal": proposal.to_dict(), "summary": self.summary()}

    def _get_proposal(self, proposal_id: str) -> ProposedPolicy:
        if proposal_id not in self.proposals:
            raise ConfigError(f"no proposal {proposal_id!r}")
        proposal = self.proposals[proposal_id]
        if proposal.status not in ("Pending",):
            raise ConfigError(f"proposal {proposal_id!r} already {proposal.status}")
        return proposal

    # -- reports ---------------------------------------------------------------

    def summary(self) -> dict:
        assert self.graph is not None
        return {
            "snapshot": self.snapshot_id,
            "policies": len(self.policies),
            "unresolved": len(self.graph.active_conflicts("Unresolved")),
            "findings": {kind: sum(1 for f in self.findings if f.kind == kind)
                         for kind in ana.FINDING_KINDS},
            "critical_sanity": sum(len(r.critical) for r in self.sanity.values()),
        }

    def findings_document(self) -> dict:
        groups: dict[str, list[dict]] = {kind: [] for kind in ana.FINDING_KINDS}
        for finding in self.findings:
            groups[finding.kind].append(finding.to_dict())
        return {"snapshot": self.snapshot_id, "findings": groups,
                "sanity": {app: report.to_dict() for app, report in sorted(self.sanity.items())},
                "validation_errors": dict(sorted(self.validation_errors.items()))}

    def graph_document(self) -> dict:
        assert self.graph is not None
        doc = self.graph.to_document()
        doc["snapshot"] = self.snapshot_id
        return doc

    def trees_document(self) -> dict:
        return {"snapshot": self.snapshot_id,
                "trees": [t.to_document() for t in sorted(self.trees, key=lambda t: t.name)]}

    def policies_document(self) -> dict:
        return {"snapshot": self.snapshot_id,
                "policies": [
                    {"id": pid, "author": p.author_admin, "variant": p.variant,
                     "origin_app": p.origin_app, "text": serialize_policy(p)}
                    for pid, p in sorted(self.policies.items())]}

    def proposals_document(self) -> dict:
        return {"snapshot": self.snapshot_id,
                "proposals": [p.to_dict() for _, p in sorted(self.proposals.items())]}

    def full_report(self) -> dict:
        return {
            "snapshot": self.snapshot_id,
            "run": self.report.to_dict(),
            "summary": self.summary(),
            "findings": self.findings_document(),
            "graph": self.graph_document(),
        }

    def exit_code(self) -> int:
        critical = sum(len(r.critical) for r in self.sanity.values())
        unresolved = len(self.graph.active_conflicts("Unresolved")) if self.graph else 0
        return 0 if critical == 0 and unresolved == 0 else 1

    def reconcile_rules(self) -> list[DeviceRule]:
        assert self.graph is not None and self.db is not None
        return reconcile(self.graph, self.mappings, self.db)

    def write_reports(self) -> Path:
        out = self.config.output
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.full_report(), indent=2, sort_keys=True))
        (out / "findings.json").write_text(json.dumps(self.findings_document(), indent=2, sort_keys=True))
        (out / "graph.json").write_text(json.dumps(self.graph_document(), indent=2, sort_keys=True))
        return out
