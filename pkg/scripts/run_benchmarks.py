"""Run the mechanism comparison benchmark on synthetic traces.

Simulates every scheduling mechanism (plus the plain FCFS/EASY baseline)
over a set of seeded synthetic traces and prints per-mechanism means for
the headline metrics.  Optional sections repeat the comparison across
notice-accuracy mixes and checkpoint-interval scales.

Usage:
    python scripts/run_benchmarks.py [--seeds 10] [--capacity 512]
        [--mixes] [--checkpoint-scales] [--csv out.csv]
"""
import argparse
import csv
import statistics
import sys

from hybridsched.config import BASELINE, MECHANISM_NAMES, MechanismConfig, SystemConfig
from hybridsched.engine import Simulator
from hybridsched.metrics import report_from_engine
from hybridsched.workload import (
    NOTICE_MIXES,
    SyntheticTraceConfig,
    WorkloadConfig,
    generate_workload,
    synthesize_trace,
)


def one_run(seed, mechanism, capacity, mix, scale):
    raw = synthesize_trace(SyntheticTraceConfig(capacity=capacity, seed=seed))
    cfg = WorkloadConfig(
        capacity=capacity,
        rng_seed=seed,
        notice_mix=NOTICE_MIXES[mix],
        on_demand_fraction=0.15,
        rigid_fraction=0.60,
        malleable_fraction=0.25,
    )
    specs = generate_workload(raw, cfg)
    system = SystemConfig(capacity=capacity, checkpoint_scale=scale)
    sim = Simulator(
        specs, system, MechanismConfig.parse(mechanism), collect_log=False
    ).run()
    return report_from_engine(sim)


def summarize(args, mechanisms, mix="W5", scale=1.0):
    rows = []
    for mechanism in mechanisms:
        reports = [
            one_run(seed, mechanism, args.capacity, mix, scale)
            for seed in range(args.seeds)
        ]
        f = statistics.fmean
        rows.append(
            {
                "mechanism": mechanism,
                "mix": mix,
                "checkpoint_scale": scale,
                "avg_turnaround": f(r.avg_turnaround for r in reports),
                "utilization": f(r.utilization for r in reports),
                "instant_start_rate": f(r.instant_start_rate for r in reports),
                "preempted_rigid": f(r.preempted_fraction_rigid for r in reports),
                "preempted_malleable": f(r.preempted_fraction_malleable for r in reports),
                "rigid_turnaround": f(
                    r.avg_turnaround_by_kind.get("rigid", 0.0) for r in reports
                ),
                "malleable_turnaround": f(
                    r.avg_turnaround_by_kind.get("malleable", 0.0) for r in reports
                ),
            }
        )
    return rows


def print_rows(rows):
    print(
        f"{'mechanism':<10} {'mix':<4} {'scale':>5} {'turnaround':>10} "
        f"{'util':>7} {'instant':>8} {'pre_r':>6} {'pre_m':>6}"
    )
    for r in rows:
        print(
            f"{r['mechanism']:<10} {r['mix']:<4} {r['checkpoint_scale']:>5.2f} "
            f"{r['avg_turnaround']:>10.0f} {r['utilization']:>7.4f} "
            f"{r['instant_start_rate']:>8.3f} {r['preempted_rigid']:>6.3f} "
            f"{r['preempted_malleable']:>6.3f}"
        )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--capacity", type=int, default=512)
    parser.add_argument("--mixes", action="store_true",
                        help="also compare notice mixes W1..W5")
    parser.add_argument("--checkpoint-scales", action="store_true",
                        help="also compare checkpoint interval scales 1.0 and 0.5")
    parser.add_argument("--csv", type=str, default=None)
    args = parser.parse_args(argv)

    mechanisms = list(MECHANISM_NAMES) + [BASELINE]
    all_rows = summarize(args, mechanisms)
    print("== default mix (W5), checkpoint scale 1.0")
    print_rows(all_rows)

    if args.mixes:
        for mix in ("W1", "W2", "W3", "W4"):
            rows = summarize(args, list(MECHANISM_NAMES), mix=mix)
            print(f"== notice mix {mix}")
            print_rows(rows)
            all_rows += rows
    if args.checkpoint_scales:
        rows = summarize(args, list(MECHANISM_NAMES), scale=0.5)
        print("== checkpoint scale 0.5")
        print_rows(rows)
        all_rows += rows

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(all_rows[0]))
            writer.writeheader()
            writer.writerows(all_rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
