"""Command-line driver: analyze, compose, report, reconcile, bench, serve."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from .composition import compose, incremental_update
from .engine import Engine, ProjectConfig
from .errors import PolicyWeaveError
from .precedence import PrecedenceRules
from .reconcile import write_rule_bundle
from .synth import synth_inventory, synth_policies, synth_precedence, synth_trees, synth_vocabulary


@click.group()
def main():
    """Vendor-independent IoT policy engine."""


def _load(config_path: str) -> Engine:
    return Engine(ProjectConfig.load(config_path)).run()


def _echo_report(engine: Engine, fmt: str) -> None:
    if fmt == "document":
        click.echo(json.dumps(engine.full_report(), indent=2, sort_keys=True))
        return
    summary = engine.summary()
    click.echo(f"snapshot {summary['snapshot']}: {summary['policies']} policies")
    click.echo(f"unresolved conflicts: {summary['unresolved']}")
    for kind, count in summary["findings"].items():
        click.echo(f"findings[{kind}]: {count}")
    click.echo(f"critical sanity: {summary['critical_sanity']}")
    for finding in engine.findings:
        click.echo(f"  {finding.kind}: {', '.join(sorted(finding.policies))} "
                   f"-> {json.dumps(finding.evidence, sort_keys=True)}")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "document"]), default="text")
def analyze(config: str, fmt: str):
    """Run the full pipeline and report findings; exit 0 only when clean."""
    try:
        engine = _load(config)
    except PolicyWeaveError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    engine.write_reports()
    _echo_report(engine, fmt)
    sys.exit(engine.exit_code())


@main.command("compose")
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "document"]), default="text")
def compose_cmd(config: str, fmt: str):
    """Compose policies and print the graph document."""
    try:
        engine = _load(config)
    except PolicyWeaveError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if fmt == "document":
        click.echo(json.dumps(engine.graph_document(), indent=2, sort_keys=True))
    else:
        doc = engine.graph_document()
        click.echo(f"nodes: {len(doc['nodes'])}  edges: {len(doc['edges'])} "
                   f"islands: {len(doc['islands'])}")
        for conflict in doc["conflicts"]:
            click.echo(f"  {conflict['kind']}: {', '.join(conflict['policies'])}"
                       + (f" winner={conflict['winner']}" if conflict["winner"] else ""))


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "document"]), default="document")
def report(config: str, fmt: str):
    """Write report documents to the project output directory."""
    try:
        engine = _load(config)
    except PolicyWeaveError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    out = engine.write_reports()
    _echo_report(engine, fmt)
    click.echo(f"reports written to {out}", err=True)


@main.command("reconcile")
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def reconcile_cmd(config: str, out: str | None):
    """Emit per-device rule files for a conflict-free graph."""
    try:
        engine = _load(config)
        rules = engine.reconcile_rules()
    except (PolicyWeaveError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    bundle_dir = Path(out) if out else engine.config.output / "rules"
    manifest = write_rule_bundle(rules, bundle_dir)
    click.echo(f"{len(manifest['rules'])} rules written to {bundle_dir}")


@main.command()
@click.option("--n-policies", type=int, default=900)
@click.option("--n-attributes", type=int, default=30)
@click.option("--tree-depth", type=int, default=4)
@click.option("--n-devices", type=int, default=2000)
@click.option("--n-trees", type=int, default=40)
@click.option("--seed", type=int, default=0)
@click.option("--compare-fast-paths/--no-compare-fast-paths", default=False,
              help="also run with the hash+cache fast paths disabled")
def bench(n_policies: int, n_attributes: int, tree_depth: int, n_devices: int,
          n_trees: int, seed: int, compare_fast_paths: bool):
    """Generate a seeded synthetic policy set, compose it, print timings."""
    t0 = time.perf_counter()
    db = synth_inventory(n_devices, n_attributes=n_attributes, seed=seed)
    trees = synth_trees(db, n_trees, seed=seed)
    t_trees = time.perf_counter() - t0
    vocab = synth_vocabulary(n_attributes)
    prec = synth_precedence()
    t0 = time.perf_counter()
    policies = synth_policies(db, trees, n_policies, n_attributes, tree_depth, seed)
    t_gen = time.perf_counter() - t0
    rows = []
    t0 = time.perf_counter()
    graph = compose(policies, trees, db, vocab, prec)
    t_compose = time.perf_counter() - t0
    rows.append(("fast", t_compose, graph.stats))
    if compare_fast_paths:
        t0 = time.perf_counter()
        slow = compose(policies, trees, db, vocab, prec, use_fast_paths=False)
        rows.append(("baseline", time.perf_counter() - t0, slow.stats))
    t0 = time.perf_counter()
    if policies:
        changed = policies[: max(1, min(10, len(policies)))]
        incremental_update(graph, [], [p.policy_id for p in changed])
        incremental_update(graph, changed, [])
    t_incremental = time.perf_counter() - t0
    click.echo(f"policies={len(policies)} attributes={n_attributes} depth={tree_depth} seed={seed}")
    click.echo(f"trees: {len(trees)} built in {t_trees*1000:.1f} ms; "
               f"generation {t_gen*1000:.1f} ms")
    for name, seconds, stats in rows:
        click.echo(f"compose[{name}]: {seconds*1000:.1f} ms  probes={stats.source_probes} "
                   f"set_comparisons={stats.set_comparisons} cache_hits={stats.cache_hits} "
                   f"expanded={stats.expanded_nodes} comparisons={stats.comparisons}")
    click.echo(f"incremental(10): {t_incremental*1000:.1f} ms")
    click.echo(f"conflicts: unresolved={len(graph.active_conflicts('Unresolved'))} "
               f"resolved={len(graph.active_conflicts('Resolved'))} "
               f"duplicates={len(graph.active_conflicts('Duplicate'))}")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=None)
def serve(config: str, host: str, port: int | None):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    engine = _load(config)
    app = create_app(engine)
    uvicorn.run(app, host=host, port=port or engine.config.port, log_level="warning")


if __name__ == "__main__":
    main()
