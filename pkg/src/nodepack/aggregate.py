"""Plan construction: task grouping per strategy, affinity, node job scripts."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

from .errors import ConfigError, OversubscriptionError, TemplateError
from .model import (
    AggregationStrategy,
    BenchmarkConfig,
    ExecutionPlan,
    SchedulingUnit,
    task_id_of,
)


@dataclass(frozen=True)
class ScriptTemplate:
    """Text patterns for rendering a per-node job script.

    pin_command_pattern wraps one slot's sequential command string and pins it
    to a core; task_command_pattern renders a single task.
    """

    shell_preamble: str = "#!/bin/sh"
    pin_command_pattern: str = "taskset -c {core} sh -c '{command}' &"
    task_command_pattern: str = "TASK_ID={task_id} sleep {duration_s}"


DEFAULT_TEMPLATE = ScriptTemplate()


def assign_affinity(unit: SchedulingUnit, cores_per_node: int) -> SchedulingUnit:
    """Pin slot i to core i and split idle cores evenly into threads.

    Idempotent; raises OversubscriptionError if the unit has more slot runs
    than the node has cores.
    """
    n_slots = len(unit.slot_runs)
    if n_slots > cores_per_node:
        raise OversubscriptionError(
            f"unit {unit.unit_id} has {n_slots} slot runs on a "
            f"{cores_per_node}-core node"
        )
    return replace(
        unit,
        affinity=tuple(range(n_slots)),
        threads_per_task=cores_per_node // n_slots,
    )


def build_plan(config: BenchmarkConfig, strategy: AggregationStrategy) -> ExecutionPlan:
    """Group the config's task expansion into scheduling units.

    Flat: one unit per task. PerCore: one unit per (node, core) holding that
    core's n tasks in a loop. PerNode: one unit per node holding one run per
    core, pinned by identity.
    """
    n = config.tasks_per_processor
    cores = config.cores_per_node
    units = []
    if strategy is AggregationStrategy.FLAT:
        for node in range(config.nodes):
            for slot in range(cores):
                for seq in range(n):
                    tid = task_id_of(config, node, slot, seq)
                    units.append(
                        SchedulingUnit(
                            unit_id=tid,
                            node_index=node,
                            slot_runs=((tid,),),
                            affinity=(slot,),
                        )
                    )
    elif strategy is AggregationStrategy.PER_CORE:
        uid = 0
        for node in range(config.nodes):
            for slot in range(cores):
                base = task_id_of(config, node, slot, 0)
                units.append(
                    SchedulingUnit(
                        unit_id=uid,
                        node_index=node,
                        slot_runs=(tuple(range(base, base + n)),),
                        affinity=(slot,),
                    )
                )
                uid += 1
    elif strategy is AggregationStrategy.PER_NODE:
        for node in range(config.nodes):
            slot_runs = tuple(
                tuple(
                    task_id_of(config, node, slot, 0) + seq for seq in range(n)
                )
                for slot in range(cores)
            )
            unit = SchedulingUnit(
                unit_id=node,
                node_index=node,
                slot_runs=slot_runs,
                affinity=tuple(range(cores)),
            )
            units.append(assign_affinity(unit, cores))
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unsupported strategy {strategy!r}")
    return ExecutionPlan(config=config, strategy=strategy, units=tuple(units))


def render_node_script(
    unit: SchedulingUnit, template: ScriptTemplate, task_time_us: int
) -> str:
    """Render one POSIX-shell script: a pinned background worker per slot run,
    sequential task commands inside each worker, then a single wait barrier."""
    duration_s = task_time_us / 1_000_000
    duration_text = f"{duration_s:g}"
    lines = [template.shell_preamble]
    lines.append(f"# unit {unit.unit_id} on node {unit.node_index}")
    for run, core in zip(unit.slot_runs, unit.affinity):
        commands = []
        for tid in run:
            commands.append(
                _render(
                    template.task_command_pattern,
                    duration_s=duration_text,
                    task_id=tid,
                )
            )
        lines.append(
            _render(
                template.pin_command_pattern,
                core=core,
                command="; ".join(commands),
            )
        )
    lines.append("wait")
    return "\n".join(lines) + "\n"


def _render(pattern: str, **values) -> str:
    try:
        text = pattern.format(**values)
    except (KeyError, IndexError) as exc:
        raise TemplateError(f"unresolved placeholder {exc} in {pattern!r}") from exc
    return text


@dataclass
class PartitionReport:
    """Result of a plan partition check; truthy iff the partition is exact."""

    ok: bool
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_partition(plan: ExecutionPlan) -> PartitionReport:
    """Check every expanded task id appears in exactly one unit, exactly once."""
    total = plan.config.total_tasks
    seen = bytearray(total)
    for unit in plan.units:
        for run in unit.slot_runs:
            for tid in run:
                if tid < 0 or tid >= total:
                    return PartitionReport(False, f"task id {tid} out of range")
                if seen[tid]:
                    return PartitionReport(False, f"task id {tid} duplicated")
                seen[tid] = 1
    missing = seen.find(0)
    if missing != -1:
        return PartitionReport(False, f"task id {missing} missing")
    return PartitionReport(True)


def write_plan(plan: ExecutionPlan, out_dir, template: ScriptTemplate = DEFAULT_TEMPLATE) -> str:
    """Write a plan manifest (and per-node scripts for PerNode plans).

    Returns the manifest path. Scripts are named unit_<id>.sh.
    """
    os.makedirs(out_dir, exist_ok=True)
    scripts = {}
    if plan.strategy is AggregationStrategy.PER_NODE:
        for unit in plan.units:
            name = f"unit_{unit.unit_id}.sh"
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(render_node_script(unit, template, plan.config.task_time_us))
            scripts[str(unit.unit_id)] = name
    manifest = plan.to_json_dict()
    manifest["scripts"] = scripts
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


def read_plan(manifest_path) -> ExecutionPlan:
    with open(manifest_path, encoding="utf-8") as fh:
        return ExecutionPlan.from_json_dict(json.load(fh))
