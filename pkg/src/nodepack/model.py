"""Shared data model: benchmark configs, tasks, scheduling units, event logs.

All durations are unsigned integer microseconds. Exact integer time keeps
conservation checks exact and the simulator bit-deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterator, NamedTuple

from .errors import ConfigError, MalformedLogError, UnknownPresetError

US_PER_SECOND = 1_000_000


def seconds_to_us(seconds) -> int:
    """Convert a second count (int or float) to integer microseconds."""
    us = round(seconds * US_PER_SECOND)
    if abs(us - seconds * US_PER_SECOND) > 0.5:
        raise ConfigError(f"duration {seconds}s is not a whole microsecond count")
    return int(us)


@dataclass(frozen=True)
class BenchmarkConfig:
    """One benchmark cell: constant task time, per-core work budget, cluster size.

    job_time_per_processor_us is the total sequential work each core slot
    performs; it must divide evenly into tasks of task_time_us each.
    """

    task_time_us: int
    job_time_per_processor_us: int
    nodes: int
    cores_per_node: int
    label: str = ""

    def __post_init__(self):
        if self.task_time_us <= 0:
            raise ConfigError("task_time_us must be > 0")
        if self.job_time_per_processor_us <= 0:
            raise ConfigError("job_time_per_processor_us must be > 0")
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if self.cores_per_node < 1:
            raise ConfigError("cores_per_node must be >= 1")
        if self.job_time_per_processor_us % self.task_time_us != 0:
            raise ConfigError(
                f"job time {self.job_time_per_processor_us}us is not an integer "
                f"multiple of task time {self.task_time_us}us"
            )

    @property
    def tasks_per_processor(self) -> int:
        return self.job_time_per_processor_us // self.task_time_us

    @property
    def processors(self) -> int:
        return self.nodes * self.cores_per_node

    @property
    def total_tasks(self) -> int:
        return self.processors * self.tasks_per_processor

    def to_json_dict(self) -> dict:
        return {
            "task_time_us": self.task_time_us,
            "job_time_per_processor_us": self.job_time_per_processor_us,
            "nodes": self.nodes,
            "cores_per_node": self.cores_per_node,
            "label": self.label,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "BenchmarkConfig":
        return cls(
            task_time_us=d["task_time_us"],
            job_time_per_processor_us=d["job_time_per_processor_us"],
            nodes=d["nodes"],
            cores_per_node=d["cores_per_node"],
            label=d.get("label", ""),
        )


class TaskSpec(NamedTuple):
    """One constant-duration compute task with its dense id and placement."""

    task_id: int
    node_index: int
    slot_index: int
    sequence_index: int
    duration_us: int


class AggregationStrategy(Enum):
    """How compute tasks are grouped into scheduling units."""

    FLAT = "flat"
    PER_CORE = "per-core"
    PER_NODE = "per-node"

    @classmethod
    def parse(cls, text: str) -> "AggregationStrategy":
        for member in cls:
            if member.value == text:
                return member
        raise ConfigError(f"unknown strategy {text!r}")


@dataclass(frozen=True)
class SchedulingUnit:
    """The granule the scheduler dispatches: one or more per-slot task runs.

    affinity[i] is the core id that slot_runs[i] is pinned to.
    """

    unit_id: int
    node_index: int
    slot_runs: tuple  # tuple of tuples of task ids, each run in sequence order
    affinity: tuple  # core id per slot run
    threads_per_task: int = 1

    def __post_init__(self):
        if not self.slot_runs or any(not run for run in self.slot_runs):
            raise ConfigError("every slot run must be non-empty")
        if len(self.affinity) != len(self.slot_runs):
            raise ConfigError("affinity must map every slot run to a core")
        if len(set(self.affinity)) != len(self.affinity):
            raise ConfigError("affinity must be injective")
        if self.threads_per_task < 1:
            raise ConfigError("threads_per_task must be >= 1")

    @property
    def task_count(self) -> int:
        return sum(len(run) for run in self.slot_runs)

    def to_json_dict(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "node_index": self.node_index,
            "slot_runs": [list(run) for run in self.slot_runs],
            "affinity": list(self.affinity),
            "threads_per_task": self.threads_per_task,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SchedulingUnit":
        return cls(
            unit_id=d["unit_id"],
            node_index=d["node_index"],
            slot_runs=tuple(tuple(run) for run in d["slot_runs"]),
            affinity=tuple(d["affinity"]),
            threads_per_task=d["threads_per_task"],
        )


@dataclass(frozen=True)
class ExecutionPlan:
    """A config plus the ordered scheduling units one strategy produced."""

    config: BenchmarkConfig
    strategy: AggregationStrategy
    units: tuple

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "strategy": self.strategy.value,
            "units": [u.to_json_dict() for u in self.units],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExecutionPlan":
        return cls(
            config=BenchmarkConfig.from_json_dict(d["config"]),
            strategy=AggregationStrategy.parse(d["strategy"]),
            units=tuple(SchedulingUnit.from_json_dict(u) for u in d["units"]),
        )


class EventRecord(NamedTuple):
    """One task's start/end within a log, microseconds from the log origin."""

    unit_id: int
    task_id: int
    node_index: int
    slot_index: int
    start_us: int
    end_us: int


EVENT_CSV_HEADER = ["unit_id", "task_id", "node", "slot", "start_us", "end_us"]


@dataclass
class EventLog:
    """Per-task start/end records; the common currency of sim, runner, metrics."""

    records: list
    origin_note: str = ""

    def shifted(self) -> "EventLog":
        """Return a copy shifted so the earliest start is time zero."""
        if not self.records:
            return EventLog([], self.origin_note)
        t0 = min(r.start_us for r in self.records)
        shifted = [
            r._replace(start_us=r.start_us - t0, end_us=r.end_us - t0)
            for r in self.records
        ]
        return EventLog(shifted, self.origin_note)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(EVENT_CSV_HEADER)
            for r in self.records:
                writer.writerow(list(r))

    @classmethod
    def read_csv(cls, path) -> "EventLog":
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != EVENT_CSV_HEADER:
                raise MalformedLogError(
                    f"bad or missing header in {path}", line_number=1
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 6:
                    raise MalformedLogError(
                        f"expected 6 fields, got {len(row)}", line_number=lineno
                    )
                try:
                    records.append(EventRecord(*(int(v) for v in row)))
                except ValueError as exc:
                    raise MalformedLogError(str(exc), line_number=lineno) from exc
        return cls(records, origin_note=f"loaded from {path}")


def check_slot_non_overlap(log: EventLog) -> bool:
    """True iff records sharing a (node, slot) have disjoint [start, end)."""
    by_slot = {}
    for r in log.records:
        by_slot.setdefault((r.node_index, r.slot_index), []).append(r)
    for recs in by_slot.values():
        recs.sort(key=lambda r: r.start_us)
        for a, b in zip(recs, recs[1:]):
            if b.start_us < a.end_us:
                return False
    return True


def iter_tasks(config: BenchmarkConfig) -> Iterator[TaskSpec]:
    """Yield the full task expansion in node-major, slot, sequence order."""
    n = config.tasks_per_processor
    t = config.task_time_us
    task_id = 0
    for node in range(config.nodes):
        for slot in range(config.cores_per_node):
            for seq in range(n):
                yield TaskSpec(task_id, node, slot, seq, t)
                task_id += 1


def expand_tasks(config: BenchmarkConfig) -> list:
    """Materialize the full expansion: exactly nodes * cores * n tasks."""
    return list(iter_tasks(config))


def task_id_of(config: BenchmarkConfig, node: int, slot: int, seq: int) -> int:
    """Dense id of a task under the node-major expansion ordering."""
    n = config.tasks_per_processor
    return (node * config.cores_per_node + slot) * n + seq


# Published benchmark grid: five cluster sizes on 64-core nodes, four task
# times against a constant 240 s per-core work budget.
SCALE_PRESETS = {"S1": 32, "S2": 64, "S3": 128, "S4": 256, "S5": 512}
TASK_TIME_PRESETS_S = {"rapid": 1, "fast": 5, "medium": 30, "long": 60}
PRESET_CORES_PER_NODE = 64
PRESET_JOB_TIME_S = 240


def paper_config(preset_name: str) -> BenchmarkConfig:
    """Build the config for a preset like "S3-medium" from the published grid."""
    parts = preset_name.split("-", 1)
    if len(parts) != 2 or parts[0] not in SCALE_PRESETS or parts[1] not in TASK_TIME_PRESETS_S:
        raise UnknownPresetError(
            f"unknown preset {preset_name!r}; expected <S1..S5>-<rapid|fast|medium|long>"
        )
    scale, speed = parts
    return BenchmarkConfig(
        task_time_us=TASK_TIME_PRESETS_S[speed] * US_PER_SECOND,
        job_time_per_processor_us=PRESET_JOB_TIME_S * US_PER_SECOND,
        nodes=SCALE_PRESETS[scale],
        cores_per_node=PRESET_CORES_PER_NODE,
        label=preset_name,
    )


def total_processor_time_hours(config: BenchmarkConfig) -> Fraction:
    """P * T_job as an exact fraction of hours."""
    total_us = config.processors * config.job_time_per_processor_us
    return Fraction(total_us, 3600 * US_PER_SECOND)


def format_hours(hours: Fraction) -> str:
    """Round an exact hour count to one decimal (half up) for display."""
    tenths = (hours * 10 + Fraction(1, 2)).__floor__()
    return f"{tenths // 10}.{tenths % 10}"
