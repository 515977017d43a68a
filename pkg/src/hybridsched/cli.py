"""Command-line interface: workload generation, single runs, and sweeps."""
from __future__ import annotations

import csv
import json
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import click

from .config import BASELINE, MECHANISM_NAMES, MechanismConfig, SystemConfig
from .engine import Simulator
from .metrics import report_from_engine, report_from_oracle
from .oracle import PerSecondOracle
from .workload import (
    NOTICE_MIXES,
    SyntheticTraceConfig,
    WorkloadConfig,
    generate_workload,
    parse_native,
    parse_swf,
    synthesize_trace,
    write_native,
)


@click.group()
def main() -> None:
    """Hybrid workload scheduling simulator."""


@main.command()
@click.option("--trace", type=click.Path(exists=True), default=None, help="SWF trace to annotate; omit to synthesize one.")
@click.option("--out", type=click.Path(), required=True, help="Output workload file (native format).")
@click.option("--capacity", type=int, default=4392, show_default=True)
@click.option("--notice-mix", type=click.Choice(sorted(NOTICE_MIXES)), default="W5", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-jobs", type=int, default=2000, show_default=True, help="Synthetic trace size.")
@click.option("--n-projects", type=int, default=40, show_default=True)
@click.option("--load-factor", type=float, default=1.3, show_default=True)
@click.option("--od-fraction", type=float, default=0.15, show_default=True, help="Fraction of projects that are on-demand.")
def generate(trace, out, capacity, notice_mix, seed, n_jobs, n_projects, load_factor, od_fraction) -> None:
    """Build an annotated workload from a trace (or a synthetic one)."""
    if trace is not None:
        raw, stats = parse_swf(trace)
        if stats.skipped_malformed or stats.dropped_invalid:
            click.echo(
                f"parsed {stats.parsed} jobs "
                f"({stats.skipped_malformed} malformed, {stats.dropped_invalid} dropped)",
                err=True,
            )
    else:
        raw = synthesize_trace(
            SyntheticTraceConfig(
                n_jobs=n_jobs,
                n_projects=n_projects,
                capacity=capacity,
                load_factor=load_factor,
                seed=seed,
            )
        )
    rest = 1.0 - od_fraction
    cfg = WorkloadConfig(
        capacity=capacity,
        on_demand_fraction=od_fraction,
        rigid_fraction=rest * 2 / 3,
        malleable_fraction=rest / 3,
        notice_mix=NOTICE_MIXES[notice_mix],
        rng_seed=seed,
    )
    specs = generate_workload(raw, cfg)
    write_native(specs, out, capacity=capacity)
    click.echo(f"wrote {len(specs)} jobs to {out}")


def _run_one(args):
    path, mechanism, capacity, checkpoint_scale, collect_log = args
    specs = parse_native(path)
    system = SystemConfig(capacity=capacity, checkpoint_scale=checkpoint_scale)
    mech = MechanismConfig.parse(mechanism)
    sim = Simulator(specs, system, mech, collect_log=collect_log).run()
    return report_from_engine(sim), sim.log if collect_log else None


def _workload_capacity(path: str, override: int | None) -> int:
    if override is not None:
        return override
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
    cap = header.get("capacity")
    if cap is None:
        raise click.UsageError("workload header has no capacity; pass --capacity")
    return cap


@main.command()
@click.option("--workload", type=click.Path(exists=True), required=True)
@click.option("--mechanism", default=BASELINE, show_default=True, help=f"One of {', '.join(MECHANISM_NAMES)} or {BASELINE}.")
@click.option("--capacity", type=int, default=None, help="Override the workload header capacity.")
@click.option("--checkpoint-scale", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Metrics JSON output (default stdout).")
@click.option("--event-log", type=click.Path(), default=None, help="Write the event log (JSON lines).")
@click.option("--ledger-audit", is_flag=True, help="Print every node-ledger mutation to stderr.")
def simulate(workload, mechanism, capacity, checkpoint_scale, out, event_log, ledger_audit) -> None:
    """Run one mechanism over one workload."""
    specs = parse_native(workload)
    cap = _workload_capacity(workload, capacity)
    system = SystemConfig(capacity=cap, checkpoint_scale=checkpoint_scale)
    mech = MechanismConfig.parse(mechanism)
    audit = None
    if ledger_audit:
        audit = lambda t, op, kw: print(f"[ledger t={t}] {op} {kw}", file=sys.stderr)
    sim = Simulator(specs, system, mech, collect_log=event_log is not None, ledger_audit=audit).run()
    report = report_from_engine(sim)
    if event_log:
        with open(event_log, "w", encoding="utf-8", newline="\n") as fh:
            for rec in sim.log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    text = report.to_json()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


SWEEP_COLUMNS = (
    "avg_turnaround",
    "instant_start_rate",
    "utilization",
    "preempted_fraction_rigid",
    "preempted_fraction_malleable",
)


@main.command()
@click.option("--workload", "workloads", type=click.Path(exists=True), multiple=True, required=True, help="Repeatable; each counts as one sample.")
@click.option("--mechanism", "mechanisms", multiple=True, default=MECHANISM_NAMES + (BASELINE,), show_default=True)
@click.option("--capacity", type=int, default=None)
@click.option("--checkpoint-scale", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Summary CSV.")
@click.option("--jobs", "n_jobs", type=int, default=1, show_default=True, help="Parallel worker processes.")
def sweep(workloads, mechanisms, capacity, checkpoint_scale, out, n_jobs) -> None:
    """Run mechanisms over several workloads; write mean/stddev per mechanism."""
    tasks = []
    for mech in mechanisms:
        for path in workloads:
            cap = _workload_capacity(path, capacity)
            tasks.append((path, mech, cap, checkpoint_scale, False))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]

    by_mech: dict[str, list] = {}
    for (path, mech, *_), (report, _log) in zip(tasks, results):
        by_mech.setdefault(mech, []).append(report)

    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["mechanism", "samples"]
        for col in SWEEP_COLUMNS:
            header += [f"{col}_mean", f"{col}_std"]
        writer.writerow(header)
        for mech in mechanisms:
            reports = by_mech.get(mech, [])
            row = [mech, len(reports)]
            for col in SWEEP_COLUMNS:
                vals = [getattr(r, col) for r in reports if getattr(r, col) is not None]
                if vals:
                    row += [
                        f"{statistics.fmean(vals):.6f}",
                        f"{statistics.pstdev(vals):.6f}" if len(vals) > 1 else "0.000000",
                    ]
                else:
                    row += ["", ""]
            writer.writerow(row)
    click.echo(f"wrote {out}")


@main.command(hidden=True, name="oracle-check")
@click.option("--workload", type=click.Path(exists=True), required=True)
@click.option("--mechanism", default=BASELINE, show_default=True)
@click.option("--capacity", type=int, default=None)
@click.option("--checkpoint-scale", type=float, default=1.0)
def oracle_check(workload, mechanism, capacity, checkpoint_scale) -> None:
    """Cross-check the event engine against the per-second reference run."""
    specs = parse_native(workload)
    cap = _workload_capacity(workload, capacity)
    system = SystemConfig(capacity=cap, checkpoint_scale=checkpoint_scale)
    mech = MechanismConfig.parse(mechanism)
    sim = Simulator(specs, system, mech).run()
    orc = PerSecondOracle(specs, system, mech).run()
    ok = sim.log == orc.log and report_from_engine(sim).comparable() == report_from_oracle(orc).comparable()
    click.echo("match" if ok else "MISMATCH")
    if not ok:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
