"""Command-line surface: plan, simulate, run, analyze, sweep.

Exit codes: 0 success, 2 input/config error, 3 runtime capacity error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from fractions import Fraction

from . import aggregate, metrics, plots, runner, sim
from .errors import (
    CapacityError,
    CapacityExceededError,
    ConfigError,
    EmptyLogError,
    InsufficientDataError,
    MalformedLogError,
    NodepackError,
    OversubscriptionError,
    SizeError,
    TemplateError,
    UnknownPresetError,
)
from .model import (
    AggregationStrategy,
    BenchmarkConfig,
    EventLog,
    paper_config,
    seconds_to_us,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPACITY = 3

_CONFIG_ERRORS = (
    ConfigError,
    UnknownPresetError,
    MalformedLogError,
    EmptyLogError,
    InsufficientDataError,
    TemplateError,
    SizeError,
)
_CAPACITY_ERRORS = (CapacityError, OversubscriptionError, CapacityExceededError)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="published grid preset, e.g. S1-rapid")
    p.add_argument("--nodes", type=int, help="node count")
    p.add_argument("--cores", type=int, help="cores per node")
    p.add_argument("--task-time", type=float, help="task time in seconds")
    p.add_argument("--job-time", type=float, help="per-core job time in seconds")
    p.add_argument("--config", help="JSON file of flag defaults (flags win)")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--dispatch-cost",
        type=float,
        default=sim.DEFAULT_DISPATCH_COST_US / 1e6,
        help="scheduler dispatch cost per unit, seconds",
    )
    p.add_argument(
        "--cleanup-cost",
        type=float,
        default=sim.DEFAULT_CLEANUP_COST_US / 1e6,
        help="scheduler cleanup cost per unit, seconds",
    )
    p.add_argument(
        "--cleanup-blocks-dispatch",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="queued cleanup work stalls dispatching",
    )


def _apply_config_file(args) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config, encoding="utf-8") as fh:
        defaults = json.load(fh)
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def _config_from_args(args) -> BenchmarkConfig:
    _apply_config_file(args)
    if args.preset:
        return paper_config(args.preset)
    missing = [
        flag
        for flag, value in (
            ("--nodes", args.nodes),
            ("--cores", args.cores),
            ("--task-time", args.task_time),
            ("--job-time", args.job_time),
        )
        if value is None
    ]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)} (or use --preset)")
    return BenchmarkConfig(
        task_time_us=seconds_to_us(args.task_time),
        job_time_per_processor_us=seconds_to_us(args.job_time),
        nodes=args.nodes,
        cores_per_node=args.cores,
        label=f"{args.nodes}x{args.cores}-t{args.task_time:g}",
    )


def _model_from_args(args) -> sim.SchedulerModel:
    return sim.SchedulerModel(
        dispatch_cost_us=seconds_to_us(args.dispatch_cost),
        cleanup_cost_us=seconds_to_us(args.cleanup_cost),
        cleanup_blocks_dispatch=args.cleanup_blocks_dispatch,
    )


def _plan_from_args(args):
    if getattr(args, "plan", None):
        return aggregate.read_plan(args.plan)
    config = _config_from_args(args)
    if not args.strategy:
        raise ConfigError("missing --strategy")
    return aggregate.build_plan(config, AggregationStrategy.parse(args.strategy))


def _format_ratio(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{float(value):.6f}"


def cmd_plan(args) -> int:
    config = _config_from_args(args)
    strategy = AggregationStrategy.parse(args.strategy)
    plan = aggregate.build_plan(config, strategy)
    manifest = aggregate.write_plan(plan, args.out)
    print(f"wrote {manifest}: {len(plan.units)} units ({strategy.value})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    plan = _plan_from_args(args)
    model = _model_from_args(args)
    result = sim.simulate(plan, model)
    runtime = metrics.job_runtime(result.log)
    overhead = metrics.normalized_overhead(
        runtime, plan.config.job_time_per_processor_us
    )
    if args.out:
        sidecar = os.path.splitext(args.out)[0] + "_sidecar.json"
        sim.write_result(result, args.out, sidecar)
    print(_format_ratio(overhead))
    return EXIT_OK


def cmd_run(args) -> int:
    plan = _plan_from_args(args)
    opts = runner.RunnerOptions(
        allow_oversubscribe=args.oversubscribe,
        pin_enabled=args.pin,
        max_host_slots=args.max_slots,
    )
    if args.sim_dispatch:
        log = runner.execute_through_sim_dispatch(plan, _model_from_args(args), opts)
    else:
        log = runner.execute(plan, opts)
    if args.out:
        log.write_csv(args.out)
    runtime = metrics.job_runtime(log)
    overhead = metrics.normalized_overhead(
        runtime, plan.config.job_time_per_processor_us
    )
    print(
        f"runtime {runtime / 1e6:.3f}s normalized_overhead {_format_ratio(overhead)}"
    )
    return EXIT_OK


def _analyze_paper(args) -> int:
    runs = metrics.load_paper_runs()
    cells = metrics.overhead_table(runs)
    rows = []
    for c in cells:
        rows.append(
            {
                "nodes": c.nodes,
                "strategy": c.strategy,
                "task_time_s": c.task_time_s,
                "median_runtime_s": float(c.median_runtime_s),
                "normalized_overhead": float(c.normalized),
                "flagged_over_10pct": c.flagged,
            }
        )
        print(
            f"{c.strategy} {c.nodes:>3} nodes t={c.task_time_s:<2} "
            f"median {float(c.median_runtime_s):7.1f}s "
            f"normalized_overhead {float(c.normalized):.5f}"
            f"{'  [>10%]' if c.flagged else ''}"
        )
    ratio_rows = []
    if args.ratios:
        node_counts = sorted({r.nodes for r in runs if r.strategy == "M"})
        for nodes in node_counts:
            for basis in ("median", "best"):
                for rep in metrics.strategy_ratio(runs, nodes, basis):
                    label = rep.pairing + (
                        f" t={rep.task_time_s}" if rep.task_time_s is not None else ""
                    )
                    ratio_rows.append(
                        {
                            "nodes": rep.nodes,
                            "basis": rep.basis,
                            "pairing": label,
                            "m_runtime_s": float(rep.m_runtime_s),
                            "n_runtime_s": float(rep.n_runtime_s),
                            "ratio": float(rep.ratio),
                        }
                    )
                    print(
                        f"ratio {rep.nodes:>3} nodes {rep.basis:<6} {label:<18} "
                        f"{float(rep.ratio):.1f}x"
                    )
        print(f"note: {metrics.RATIO_DISCREPANCY_NOTE}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_rows(os.path.join(args.out, "overhead_cells"), rows)
        if ratio_rows:
            _write_rows(os.path.join(args.out, "ratios"), ratio_rows)
            with open(
                os.path.join(args.out, "ratio_note.txt"), "w", encoding="utf-8"
            ) as fh:
                fh.write(metrics.RATIO_DISCREPANCY_NOTE + "\n")
        with open(
            os.path.join(args.out, "overhead.svg"), "w", encoding="utf-8"
        ) as fh:
            fh.write(plots.overhead_svg(cells))
    return EXIT_OK


def _analyze_log(args) -> int:
    log = EventLog.read_csv(args.log)
    runtime = metrics.job_runtime(log)
    print(f"job_runtime_s {runtime / 1e6:.6f}")
    if args.job_time is not None:
        overhead = metrics.normalized_overhead(runtime, seconds_to_us(args.job_time))
        print(f"normalized_overhead {_format_ratio(overhead)}")
    processors = args.processors
    if processors is None:
        processors = metrics.peak_concurrency(log)
    series = metrics.utilization(log, processors)
    full_at = series.first_full_utilization_us()
    print(f"processors {processors}")
    print(
        "full_utilization_at_s "
        + (f"{full_at / 1e6:.6f}" if full_at is not None else "never")
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(
            os.path.join(args.out, "utilization.svg"), "w", encoding="utf-8"
        ) as fh:
            fh.write(plots.utilization_svg([(os.path.basename(args.log), series)]))
        with open(
            os.path.join(args.out, "utilization.json"), "w", encoding="utf-8"
        ) as fh:
            json.dump(
                {
                    "breakpoints_us": series.breakpoints,
                    "busy_counts": series.busy_counts,
                    "processors": series.processors,
                },
                fh,
            )
            fh.write("\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.paper:
        return _analyze_paper(args)
    if not args.log:
        raise ConfigError("provide a log path or --paper")
    return _analyze_log(args)


def _write_rows(base_path: str, rows) -> None:
    with open(base_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    with open(base_path + ".csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _parse_list(text: str, parse, flag: str):
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError(f"{flag} must be a non-empty comma-separated list")
    return [parse(x) for x in items]


def cmd_sweep(args) -> int:
    node_counts = _parse_list(args.node_counts, int, "--node-counts")
    task_times = _parse_list(args.task_times, float, "--task-times")
    strategies = _parse_list(
        args.strategies, AggregationStrategy.parse, "--strategies"
    )
    if args.repetitions < 1:
        raise ConfigError("--repetitions must be >= 1")
    model = _model_from_args(args)
    rows = []
    for nodes in node_counts:
        for task_time in task_times:
            for strategy in strategies:
                cell = {
                    "nodes": nodes,
                    "cores": args.cores,
                    "task_time_s": task_time,
                    "strategy": strategy.value,
                }
                runtimes = []
                for rep in range(1, args.repetitions + 1):
                    row = dict(cell, rep=rep)
                    try:
                        config = BenchmarkConfig(
                            task_time_us=seconds_to_us(task_time),
                            job_time_per_processor_us=seconds_to_us(args.job_time),
                            nodes=nodes,
                            cores_per_node=args.cores,
                        )
                        plan = aggregate.build_plan(config, strategy)
                        if args.real:
                            log = runner.execute(
                                plan,
                                runner.RunnerOptions(
                                    allow_oversubscribe=args.oversubscribe
                                ),
                            )
                        else:
                            log = sim.simulate(plan, model).log
                        runtime = metrics.job_runtime(log)
                        overhead = metrics.normalized_overhead(
                            runtime, config.job_time_per_processor_us
                        )
                        row.update(
                            status="ok",
                            runtime_us=runtime,
                            normalized_overhead=float(overhead),
                        )
                        runtimes.append(runtime)
                    except NodepackError as exc:
                        row.update(status=f"error: {exc}", runtime_us="", normalized_overhead="")
                    rows.append(row)
                if runtimes:
                    median = statistics.median(runtimes)
                    rows.append(
                        dict(
                            cell,
                            rep="median",
                            status="ok",
                            runtime_us=median,
                            normalized_overhead=float(
                                metrics.normalized_overhead(
                                    round(median), seconds_to_us(args.job_time)
                                )
                            ),
                        )
                    )
    fieldnames = [
        "nodes",
        "cores",
        "task_time_s",
        "strategy",
        "rep",
        "status",
        "runtime_us",
        "normalized_overhead",
    ]
    out_fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out_fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out_fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodepack",
        description="Node-based task aggregation benchmarking toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build a plan and write manifest/scripts")
    _add_config_flags(p)
    p.add_argument("--strategy", required=True, help="flat | per-core | per-node")
    p.add_argument("--out", default="plan_out", help="output directory")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="simulate a plan, print normalized overhead")
    _add_config_flags(p)
    p.add_argument("--strategy", help="flat | per-core | per-node")
    p.add_argument("--plan", help="plan manifest JSON (instead of config flags)")
    _add_model_flags(p)
    p.add_argument("--out", help="event log CSV path (sidecar JSON written next to it)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="execute a plan for real on this machine")
    _add_config_flags(p)
    p.add_argument("--strategy", help="flat | per-core | per-node")
    p.add_argument("--plan", help="plan manifest JSON")
    p.add_argument("--out", help="event log CSV path")
    p.add_argument("--oversubscribe", action="store_true")
    p.add_argument("--pin", action="store_true", help="pin workers to cores")
    p.add_argument("--max-slots", type=int, help="override host slot cap")
    p.add_argument(
        "--sim-dispatch",
        action="store_true",
        help="release units at simulator-computed dispatch times",
    )
    _add_model_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="analyze a log or the embedded dataset")
    p.add_argument("log", nargs="?", help="event log CSV")
    p.add_argument("--paper", action="store_true", help="analyze the embedded runtime dataset")
    p.add_argument("--ratios", action="store_true", help="emit cross-strategy overhead ratios")
    p.add_argument("--job-time", type=float, help="per-core job time in seconds")
    p.add_argument("--processors", type=int, help="slot count for utilization")
    p.add_argument("--out", help="output directory for reports and SVG plots")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="simulate (or run) a config cross product")
    p.add_argument("--node-counts", required=True, help="comma list, e.g. 2,4,8")
    p.add_argument("--task-times", required=True, help="comma list of seconds")
    p.add_argument(
        "--strategies", default="flat,per-core,per-node", help="comma list"
    )
    p.add_argument("--cores", type=int, default=8)
    p.add_argument("--job-time", type=float, default=240.0)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--real", action="store_true", help="execute instead of simulating")
    p.add_argument("--oversubscribe", action="store_true")
    p.add_argument("--out", help="results CSV path (default stdout)")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MalformedLogError as exc:
        line = f" (line {exc.line_number})" if exc.line_number else ""
        print(f"error: {exc}{line}", file=sys.stderr)
        return EXIT_CONFIG
    except _CAPACITY_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
