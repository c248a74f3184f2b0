"""Deterministic discrete-event simulation of a centralized scheduler.

The scheduler is a single serial loop over a FIFO work queue. Dispatching a
unit occupies the loop for dispatch_cost_us; the unit's tasks then run
back-to-back on its pinned cores. When a unit's last task ends, a cleanup
item is queued; with cleanup_blocks_dispatch the loop must process it (for
cleanup_cost_us) before the unit's cores are released, and queued cleanup
work takes precedence over further dispatching. Without it, cores are
released the instant the last task ends and cleanup costs nothing on the
loop. All times are integer microseconds; ties break by unit id ascending.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass

from .aggregate import verify_partition
from .errors import CapacityError, ConfigError, NodepackError, SizeError
from .model import EventLog, EventRecord, ExecutionPlan, SchedulingUnit

# Default cost model, calibrated so the 512-node per-core long-task scenario
# lands near its published ~2768 s median while a 128-node per-node run still
# fills the cluster within 1% of its runtime (see README, "Calibration").
DEFAULT_DISPATCH_COST_US = 15_000
DEFAULT_CLEANUP_COST_US = 64_000

ORACLE_TASK_CAP = 10_000


@dataclass(frozen=True)
class SchedulerModel:
    """Per-unit serial costs charged by the scheduler loop."""

    dispatch_cost_us: int = DEFAULT_DISPATCH_COST_US
    cleanup_cost_us: int = DEFAULT_CLEANUP_COST_US
    cleanup_blocks_dispatch: bool = True

    def __post_init__(self):
        if self.dispatch_cost_us < 0 or self.cleanup_cost_us < 0:
            raise ConfigError("scheduler costs must be >= 0")


@dataclass
class SimResult:
    """Simulation output: event log, per-unit release times, loop busy spans."""

    log: EventLog
    resource_release_us: dict
    scheduler_busy_intervals: list


def unit_makespan(unit: SchedulingUnit, durations) -> int:
    """Max over slots of the summed task durations in that slot.

    durations is either a single integer (uniform task time) or a mapping
    from task id to duration.
    """
    if isinstance(durations, int):
        return max(len(run) * durations for run in unit.slot_runs)
    return max(sum(durations[tid] for tid in run) for run in unit.slot_runs)


class _ClusterState:
    """Shared bookkeeping for both simulator implementations."""

    def __init__(self, plan: ExecutionPlan):
        config = plan.config
        cores = config.cores_per_node
        self.units = plan.units
        self.task_time_us = config.task_time_us
        for unit in self.units:
            if len(unit.slot_runs) > cores:
                raise CapacityError(
                    f"unit {unit.unit_id} needs {len(unit.slot_runs)} slots on a "
                    f"{cores}-core node"
                )
            if any(c < 0 or c >= cores for c in unit.affinity):
                raise CapacityError(
                    f"unit {unit.unit_id} pins outside cores 0..{cores - 1}"
                )
        # Per-(node, core) chain of unit indices in queue order, plus a cursor
        # to the next undispatched unit in each chain.
        self.chains = {}
        for idx, unit in enumerate(self.units):
            for core in unit.affinity:
                self.chains.setdefault((unit.node_index, core), []).append(idx)
        self.ptr = {key: 0 for key in self.chains}
        self.core_free = {key: True for key in self.chains}

    def keys_of(self, idx: int):
        unit = self.units[idx]
        return [(unit.node_index, core) for core in unit.affinity]

    def eligible(self, idx: int) -> bool:
        """A unit may dispatch when it heads every chain it needs, all free."""
        for key in self.keys_of(idx):
            chain = self.chains[key]
            cursor = self.ptr[key]
            if not self.core_free[key] or cursor >= len(chain) or chain[cursor] != idx:
                return False
        return True

    def occupy(self, idx: int) -> None:
        for key in self.keys_of(idx):
            self.ptr[key] += 1
            self.core_free[key] = False

    def free(self, idx: int):
        """Release a unit's cores; return newly eligible unit indices."""
        newly = []
        for key in self.keys_of(idx):
            self.core_free[key] = True
        for key in self.keys_of(idx):
            cursor = self.ptr[key]
            chain = self.chains[key]
            if cursor < len(chain):
                cand = chain[cursor]
                if self.eligible(cand):
                    newly.append(cand)
        return newly

    def start_tasks(self, idx: int, start_us: int, records: list) -> int:
        """Record all of a unit's tasks starting at start_us; return last end."""
        unit = self.units[idx]
        t = self.task_time_us
        unit_end = start_us
        for run, core in zip(unit.slot_runs, unit.affinity):
            at = start_us
            for tid in run:
                records.append(
                    EventRecord(unit.unit_id, tid, unit.node_index, core, at, at + t)
                )
                at += t
            unit_end = max(unit_end, at)
        return unit_end


class _BusyTracker:
    def __init__(self):
        self.intervals = []

    def add(self, start_us: int, end_us: int) -> None:
        if end_us <= start_us:
            return
        if self.intervals and self.intervals[-1][1] == start_us:
            self.intervals[-1][1] = end_us
        else:
            self.intervals.append([start_us, end_us])

    def as_tuples(self):
        return [tuple(iv) for iv in self.intervals]


def _check_plan(plan: ExecutionPlan) -> None:
    report = verify_partition(plan)
    if not report:
        raise ConfigError(f"plan fails partition check: {report.detail}")


def simulate(plan: ExecutionPlan, model: SchedulerModel, validate: bool = True) -> SimResult:
    """Event-driven simulation; bit-deterministic for fixed inputs."""
    if validate:
        _check_plan(plan)
    state = _ClusterState(plan)
    n_units = len(state.units)
    dd = model.dispatch_cost_us
    dc = model.cleanup_cost_us
    blocks = model.cleanup_blocks_dispatch

    ready = []  # heap of unit indices (plan order == unit_id order)
    in_ready = [False] * n_units
    dispatched = [False] * n_units
    completions = []  # heap of (end_us, idx)
    cleanupq = deque()
    records = []
    release_us = {}
    busy = _BusyTracker()

    def push_ready(idx: int) -> None:
        if not dispatched[idx] and not in_ready[idx]:
            in_ready[idx] = True
            heapq.heappush(ready, idx)

    for key, chain in state.chains.items():
        if state.eligible(chain[0]):
            push_ready(chain[0])

    remaining = n_units
    now = 0
    while remaining or completions or cleanupq:
        # Matured completions enter the cleanup queue (or release directly).
        while completions and completions[0][0] <= now:
            end_us, idx = heapq.heappop(completions)
            if blocks:
                cleanupq.append((end_us, idx))
            else:
                release_us[state.units[idx].unit_id] = end_us
                for cand in state.free(idx):
                    push_ready(cand)
        if blocks and cleanupq:
            _, idx = cleanupq.popleft()
            busy.add(now, now + dc)
            now += dc
            release_us[state.units[idx].unit_id] = now
            for cand in state.free(idx):
                push_ready(cand)
            continue
        if ready:
            idx = heapq.heappop(ready)
            in_ready[idx] = False
            dispatched[idx] = True
            state.occupy(idx)
            busy.add(now, now + dd)
            now += dd
            unit_end = state.start_tasks(idx, now, records)
            heapq.heappush(completions, (unit_end, idx))
            remaining -= 1
            continue
        if completions:
            now = max(now, completions[0][0])
            continue
        if remaining:
            raise NodepackError("scheduler stalled with units still pending")
        break  # everything promoted and released in this iteration

    records.sort(key=lambda r: r.task_id)
    log = EventLog(records, origin_note="simulated")
    return SimResult(log, release_us, busy.as_tuples())


def replay_oracle(
    plan: ExecutionPlan,
    model: SchedulerModel,
    validate: bool = True,
    max_ticks: int = 10_000_000,
) -> SimResult:
    """Naive 1 us time-stepped reference with the same semantics as simulate.

    Exists to cross-check simulate on small instances; refuses plans above
    ORACLE_TASK_CAP tasks.
    """
    if plan.config.total_tasks > ORACLE_TASK_CAP:
        raise SizeError(
            f"oracle capped at {ORACLE_TASK_CAP} tasks, got {plan.config.total_tasks}"
        )
    if validate:
        _check_plan(plan)
    state = _ClusterState(plan)
    n_units = len(state.units)
    dd = model.dispatch_cost_us
    dc = model.cleanup_cost_us
    blocks = model.cleanup_blocks_dispatch

    dispatched = [False] * n_units
    completions = []  # heap of (end_us, idx)
    cleanupq = deque()
    records = []
    release_us = {}
    busy = _BusyTracker()
    pending = None  # (kind, idx) whose effect lands at loop_free_at
    loop_free_at = 0
    remaining = n_units

    def apply_effect(kind: str, idx: int, at: int) -> None:
        if kind == "cleanup":
            release_us[state.units[idx].unit_id] = at
            state.free(idx)
        else:
            unit_end = state.start_tasks(idx, at, records)
            heapq.heappush(completions, (unit_end, idx))

    tick = 0
    while remaining or completions or cleanupq or pending:
        if tick > max_ticks:
            raise SizeError("oracle exceeded its tick budget")
        while completions and completions[0][0] == tick:
            end_us, idx = heapq.heappop(completions)
            if blocks:
                cleanupq.append((end_us, idx))
            else:
                release_us[state.units[idx].unit_id] = end_us
                state.free(idx)
        if pending is not None and loop_free_at == tick:
            apply_effect(pending[0], pending[1], tick)
            pending = None
        while pending is None:
            if blocks and cleanupq:
                _, idx = cleanupq.popleft()
                if dc == 0:
                    apply_effect("cleanup", idx, tick)
                    continue
                busy.add(tick, tick + dc)
                pending = ("cleanup", idx)
                loop_free_at = tick + dc
                break
            chosen = None
            for idx in range(n_units):
                if not dispatched[idx] and state.eligible(idx):
                    chosen = idx
                    break
            if chosen is None:
                break
            dispatched[chosen] = True
            state.occupy(chosen)
            remaining -= 1
            if dd == 0:
                apply_effect("dispatch", chosen, tick)
                continue
            busy.add(tick, tick + dd)
            pending = ("dispatch", chosen)
            loop_free_at = tick + dd
            break
        tick += 1

    records.sort(key=lambda r: r.task_id)
    log = EventLog(records, origin_note="simulated")
    return SimResult(log, release_us, busy.as_tuples())


def write_result(result: SimResult, log_path, sidecar_path=None) -> None:
    """Write the event log CSV and a JSON sidecar of releases/busy spans."""
    result.log.write_csv(log_path)
    if sidecar_path is not None:
        payload = {
            "release_us": {str(uid): t for uid, t in sorted(result.resource_release_us.items())},
            "scheduler_busy_intervals_us": [list(iv) for iv in result.scheduler_busy_intervals],
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def job_runtime_of(result: SimResult) -> int:
    records = result.log.records
    return max(r.end_us for r in records) - min(r.start_us for r in records)


def calibrate_cleanup_cost(
    plan: ExecutionPlan,
    target_runtime_us: int,
    dispatch_cost_us: int = DEFAULT_DISPATCH_COST_US,
    lo_us: int = 0,
    hi_us: int = 1_000_000,
    tol_us: int = 100_000,
) -> int:
    """Bisect cleanup_cost_us until the simulated runtime meets the target.

    Assumes runtime is non-decreasing in cleanup cost for the given plan,
    which holds whenever cleanup work can stall dispatching.
    """
    _check_plan(plan)

    def runtime(dc: int) -> int:
        model = SchedulerModel(dispatch_cost_us, dc, cleanup_blocks_dispatch=True)
        return job_runtime_of(simulate(plan, model, validate=False))

    lo, hi = lo_us, hi_us
    while hi - lo > 1:
        mid = (lo + hi) // 2
        r = runtime(mid)
        if abs(r - target_runtime_us) <= tol_us:
            return mid
        if r < target_runtime_us:
            lo = mid
        else:
            hi = mid
    return hi
