"""Command-line front door: ingest networks, run the reconfiguration search,
benchmark scalability, manage the case base, and launch the HTTP service.

Exit codes: 0 success, 1 domain error (the error code name is printed),
2 usage error. Every command accepts ``--format structured`` for
schema-stable JSON on stdout.
"""

from __future__ import annotations

import json
import math
import sys
import time

import click

from . import casestore, cbr
from .cdf import load_network
from .errors import BindError, GridHealError, StorageError
from .hatsga import HatsgaParams, reconfigure
from .model import count_spanning_trees
from .orchestrator import Alert, Orchestrator, AUTONOMOUS, MANUAL

FORMATS = click.Choice(["text", "structured"])

CASE_BASE_ENV = "GRIDHEAL_CASE_BASE"


def _echo_structured(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=1, sort_keys=True))


def _load_net(path: str):
    try:
        return load_network(path)
    except OSError as exc:
        raise StorageError(f"cannot read network file {path}: {exc}") from exc


def _params(elite_fraction, max_passes, tol, quality_limit) -> HatsgaParams:
    return HatsgaParams(
        elite_fraction=elite_fraction,
        max_passes=max_passes,
        tol=tol,
        quality_limit=quality_limit,
    )


@click.group()
def main():
    """Self-healing grid reconfiguration toolkit."""


@main.command("reconfigure")
@click.argument("network", type=click.Path())
@click.option("--fail-bus", "fail_buses", type=int, multiple=True, help="Failed bus id (repeatable).")
@click.option("--fail-branch", "fail_branches", type=int, multiple=True, help="Failed branch id (repeatable).")
@click.option("--elite-fraction", default=0.5, show_default=True)
@click.option("--max-passes", default=20, show_default=True)
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--quality-limit", default=0.05, show_default=True)
@click.option("--output", type=click.Path(), help="Write the resulting topology as JSON.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def cmd_reconfigure(network, fail_buses, fail_branches, elite_fraction, max_passes, tol,
                    quality_limit, output, fmt):
    """Compute a minimum-loss radial topology for NETWORK (CDF or native)."""
    net = _load_net(network)
    params = _params(elite_fraction, max_passes, tol, quality_limit)
    started = time.perf_counter()
    result = reconfigure(net, params, failed_buses=fail_buses, failed_branches=fail_branches)
    elapsed = time.perf_counter() - started
    doc = {
        "network": network,
        "buses_total": len(net.buses),
        "failed_buses": sorted(fail_buses),
        "failed_branches": sorted(fail_branches),
        "shed_buses": result.shed_buses,
        "open_switches": list(result.best_topology.open_switches),
        "loss_mw": result.best_loss,
        "quality": {
            "profile_sum": result.quality.profile_sum,
            "violation_count": result.quality.violation_count,
            "loss_ratio": result.quality.loss_ratio,
        },
        "quality_met": result.quality_met,
        "evaluations": result.evaluations,
        "passes": result.passes,
        "timing": {"seconds": elapsed},
    }
    if output:
        topo_doc = {
            "format": "grid-topology",
            "version": 1,
            "network": network,
            "open_switches": list(result.best_topology.open_switches),
            "loss_mw": result.best_loss,
        }
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(topo_doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if fmt == "structured":
        _echo_structured(doc)
        return
    click.echo(f"network            {network}")
    if fail_buses or fail_branches:
        click.echo(f"fault              buses={sorted(fail_buses)} branches={sorted(fail_branches)}")
    if result.shed_buses:
        click.echo(f"shed buses         {result.shed_buses}")
    click.echo(f"open switches      {list(result.best_topology.open_switches)}")
    click.echo(f"loss               {result.best_loss:.4f} MW")
    click.echo(f"voltage violations {result.quality.violation_count}"
               + ("" if result.quality_met else "  (no topology met the voltage band)"))
    click.echo(f"evaluations        {result.evaluations} power flows over {result.passes} passes")
    click.echo(f"elapsed            {elapsed:.3f} s")


@main.command("benchmark")
@click.argument("networks", type=click.Path(), nargs=-1, required=True)
@click.option("--repetitions", default=30, show_default=True)
@click.option("--elite-fraction", default=0.5, show_default=True)
@click.option("--max-passes", default=20, show_default=True)
@click.option("--output", type=click.Path(), help="Write the report as JSON.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def cmd_benchmark(networks, repetitions, elite_fraction, max_passes, output, fmt):
    """Time the search across systems; report mean/stddev/CI95 per system."""
    from scipy import stats

    if repetitions < 2:
        raise click.UsageError("benchmark needs at least 2 repetitions for a deviation")
    rows = []
    for path in networks:
        try:
            net = _load_net(path)
            params = _params(elite_fraction, max_passes, 1e-6, 0.05)
            trees = count_spanning_trees(net)
            times = []
            evaluations = 0
            for _ in range(repetitions):
                started = time.perf_counter()
                result = reconfigure(net, params)
                times.append(time.perf_counter() - started)
                evaluations = result.evaluations
            mean = sum(times) / len(times)
            sd = math.sqrt(sum((t - mean) ** 2 for t in times) / (len(times) - 1))
            half = stats.t.ppf(0.975, len(times) - 1) * sd / math.sqrt(len(times))
            rows.append({
                "system": path,
                "buses": len(net.buses),
                "switches": len(net.branches),
                "spanning_trees": str(trees),
                "mean_seconds": mean,
                "stddev_seconds": sd,
                "ci95": [mean - half, mean + half],
                "evaluations": evaluations,
                "error": None,
            })
        except GridHealError as exc:
            rows.append({"system": path, "error": f"{exc.error_code}: {exc}"})
    doc = {"repetitions": repetitions, "rows": rows}
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if fmt == "structured":
        _echo_structured(doc)
        return
    header = f"{'system':28} {'buses':>5} {'switch':>6} {'trees':>12} {'mean s':>9} {'sd':>8} {'ci95':>21} {'evals':>6}"
    click.echo(header)
    for row in rows:
        if row.get("error"):
            click.echo(f"{row['system']:28} FAILED {row['error']}")
            continue
        trees = float(row["spanning_trees"])
        ci = f"[{row['ci95'][0]:.3f}, {row['ci95'][1]:.3f}]"
        click.echo(
            f"{row['system']:28} {row['buses']:>5} {row['switches']:>6} {trees:>12.4g} "
            f"{row['mean_seconds']:>9.3f} {row['stddev_seconds']:>8.4f} {ci:>21} {row['evaluations']:>6}"
        )


def _open_base(path: str | None, must_exist: bool = False) -> tuple[casestore.CaseBase, str]:
    import os

    path = path or os.environ.get(CASE_BASE_ENV) or "casebase.json"
    if os.path.exists(path):
        return casestore.load(path), path
    if must_exist:
        raise StorageError(f"case base {path} does not exist")
    return casestore.CaseBase(), path


@main.group("case")
def cmd_case():
    """Inspect and maintain the case base."""


@cmd_case.command("list")
@click.option("--base", "base_path", type=click.Path(), help=f"Case-base file (default ${CASE_BASE_ENV}).")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def case_list(base_path, fmt):
    """List stored cases."""
    base, path = _open_base(base_path)
    cases = list(base.cases())
    if fmt == "structured":
        _echo_structured({"path": path, "count": len(cases),
                          "cases": [casestore._case_to_doc(c) for c in cases]})
        return
    click.echo(f"{'id':>4} {'problem':18} {'affected':16} {'open':>4} {'loss MW':>9} {'uses':>4}")
    for c in cases:
        affected = ",".join(map(str, c.problem.affected_buses + c.problem.affected_branches)) or "-"
        click.echo(f"{c.id:>4} {c.problem.kind:18} {affected:16} "
                   f"{len(c.solution.open_switches):>4} {c.loss:>9.3f} {c.occurrences:>4}")
    if not cases:
        click.echo("(empty)")


@cmd_case.command("seed")
@click.argument("network", type=click.Path())
@click.option("--base", "base_path", type=click.Path())
@click.option("--bus-fault", "bus_faults", type=int, multiple=True,
              help="Seed a single-bus-fault scenario (repeatable).")
@click.option("--branch-fault", "branch_faults", type=int, multiple=True,
              help="Seed a single-branch-fault scenario (repeatable).")
@click.option("--rebalance", is_flag=True, help="Seed the no-fault rebalance scenario.")
@click.option("--elite-fraction", default=0.5, show_default=True)
@click.option("--max-passes", default=20, show_default=True)
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def case_seed(network, base_path, bus_faults, branch_faults, rebalance, elite_fraction,
              max_passes, fmt):
    """Populate the base by solving fault scenarios on NETWORK."""
    net = _load_net(network)
    base, path = _open_base(base_path)
    orch = Orchestrator(case_base=base, params=_params(elite_fraction, max_passes, 1e-6, 0.05))
    nid = orch.register_network(net)
    scenarios = [Alert("fault", failed_buses={b}) for b in bus_faults]
    scenarios += [Alert("fault", failed_branches={b}) for b in branch_faults]
    if rebalance:
        scenarios.append(Alert("rebalance"))
    reports = orch.seed_base(nid, scenarios)
    casestore.save(base, path)
    doc = {
        "path": path,
        "cases": len(base),
        "reports": [
            {"kind": r.alert.kind,
             "failed_buses": sorted(r.alert.failed_buses),
             "failed_branches": sorted(r.alert.failed_branches),
             "outcome": r.outcome, "detail": r.detail, "case_id": r.case_id}
            for r in reports
        ],
    }
    if fmt == "structured":
        _echo_structured(doc)
        return
    for r in doc["reports"]:
        what = f"buses={r['failed_buses']} branches={r['failed_branches']}"
        click.echo(f"{r['kind']:12} {what:32} {r['outcome']} {r['detail']}")
    click.echo(f"case base {path} now holds {len(base)} cases")


@cmd_case.command("retrieve")
@click.option("--base", "base_path", type=click.Path())
@click.option("--threshold", default=0.92, show_default=True)
@click.option("--limit", type=int, default=None)
@click.option("--kind", default="bus_fault", show_default=True)
@click.option("--loss-ratio", default=0.0, show_default=True)
@click.option("--profile-sum", default=0.0, show_default=True)
@click.option("--violation-count", default=0.0, show_default=True)
@click.option("--weight", "weight_specs", multiple=True, metavar="ATTR=W",
              help="Attribute weight, e.g. --weight violation_count=5 (repeatable).")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def case_retrieve(base_path, threshold, limit, kind, loss_ratio, profile_sum,
                  violation_count, weight_specs, fmt):
    """Rank stored cases against query attributes."""
    base, path = _open_base(base_path, must_exist=True)
    weights = {"loss_ratio": 1.0, "profile_sum": 1.0, "violation_count": 1.0}
    for spec in weight_specs:
        name, _, value = spec.partition("=")
        if name not in weights or not value:
            raise click.UsageError(f"bad --weight {spec!r}; attributes: {sorted(weights)}")
        weights[name] = float(value)
    query = cbr.Query(
        state=cbr.NetworkState((), (), 0.0, {}),
        problem=cbr.Problem(kind=kind),
        attributes=cbr.AttributeVector(loss_ratio, profile_sum, violation_count),
    )
    results = cbr.retrieve(base, query, threshold, cbr.SimilarityWeights(**weights), limit)
    if fmt == "structured":
        _echo_structured({"path": path, "results": [
            dict(casestore._case_to_doc(c), similarity=s) for c, s in results]})
        return
    if not results:
        click.echo("(no case at or above the threshold)")
        return
    for c, s in results:
        click.echo(f"case {c.id:>4} similarity {s:.4f} kind={c.problem.kind} "
                   f"loss={c.loss:.3f} MW uses={c.occurrences}")


@cmd_case.command("evict")
@click.option("--base", "base_path", type=click.Path())
@click.option("--capacity", type=int, required=True, help="Shrink the base to this size.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
def case_evict(base_path, capacity, fmt):
    """Apply capacity-bounded maintenance to the base."""
    base, path = _open_base(base_path, must_exist=True)
    base.capacity = capacity
    evicted = base.maintain()
    casestore.save(base, path)
    doc = {"path": path, "capacity": capacity, "evicted": [c.id for c in evicted],
           "remaining": len(base)}
    if fmt == "structured":
        _echo_structured(doc)
        return
    click.echo(f"evicted {len(evicted)} cases ({[c.id for c in evicted]}); {len(base)} remain")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--case-base", "base_path", type=click.Path())
@click.option("--mode", type=click.Choice([MANUAL, AUTONOMOUS]), default=MANUAL, show_default=True)
@click.option("--threshold", default=0.92, show_default=True)
@click.option("--token", default=None, help="Static bearer token (default $GRIDHEAL_API_TOKEN).")
@click.option("--network", "networks", type=click.Path(), multiple=True,
              help="Preload a network file (repeatable).")
def cmd_serve(host, port, base_path, mode, threshold, token, networks):
    """Serve the orchestrator HTTP API until interrupted."""
    import uvicorn

    from .service import create_app

    base, path = _open_base(base_path)
    orch = Orchestrator(case_base=base, mode=mode, threshold=threshold)
    for net_path in networks:
        orch.register_network(_load_net(net_path))
    app = create_app(orch, token=token, case_base_path=path)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit as exc:  # uvicorn signals bind failures via SystemExit
        raise BindError(f"cannot listen on {host}:{port}") from exc
    finally:
        casestore.save(base, path)


def entrypoint(argv=None) -> int:
    """Run the CLI, mapping domain errors to exit code 1."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except GridHealError as exc:
        click.echo(f"error: {exc.error_code}: {exc}", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 130


if __name__ == "__main__":
    sys.exit(entrypoint())
