"""Real local execution of a plan at desk scale.

One worker thread per (node, slot) pair runs its task sequence as timed
waits (or spawned commands), with best-effort core pinning. Virtual nodes
are bookkeeping only; the emitted log uses the same CSV format and metric
pipeline as the simulator.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import threading
import time
import warnings
from dataclasses import dataclass

from .errors import OversubscriptionError
from .model import EventLog, EventRecord, ExecutionPlan
from .sim import SchedulerModel, simulate

MAX_SLOTS_ENV = "NODEPACK_MAX_SLOTS"


@dataclass
class RunnerOptions:
    allow_oversubscribe: bool = False
    pin_enabled: bool = False
    max_host_slots: int | None = None  # None: env override, then cpu count
    task_command_override: str | None = None


def resolve_max_slots(opts: RunnerOptions) -> int:
    if opts.max_host_slots is not None:
        slots = opts.max_host_slots
    elif os.environ.get(MAX_SLOTS_ENV):
        slots = int(os.environ[MAX_SLOTS_ENV])
    else:
        slots = os.cpu_count() or 1
    if slots < 1:
        raise OversubscriptionError("max_host_slots must be >= 1")
    return slots


def _slot_sequences(plan: ExecutionPlan):
    """Per-(node, core) ordered task list across units, in unit order."""
    sequences = {}
    for unit in plan.units:
        for run, core in zip(unit.slot_runs, unit.affinity):
            key = (unit.node_index, core)
            sequences.setdefault(key, []).append((unit.unit_id, run))
    return sequences


def _pin_current_thread(core: int, warned: list) -> None:
    try:
        host_cores = os.cpu_count() or 1
        os.sched_setaffinity(0, {core % host_cores})
    except (AttributeError, OSError) as exc:
        if not warned:
            warned.append(True)
            warnings.warn(f"core pinning unavailable, running unpinned: {exc}")


def _run_task(duration_us: int, task_id: int, override: str | None) -> None:
    if override is None:
        time.sleep(duration_us / 1_000_000)
        return
    cmd = override.format(duration_s=f"{duration_us / 1_000_000:g}", task_id=task_id)
    subprocess.run(shlex.split(cmd), check=True)


def execute(plan: ExecutionPlan, opts: RunnerOptions | None = None) -> EventLog:
    """Run every slot concurrently; tasks within a slot run back-to-back.

    The log is shifted so the earliest start is zero; recorded durations are
    at least the nominal task time (real waits cannot compress).
    """
    return _execute_with_releases(plan, opts, release_us=None)


def execute_through_sim_dispatch(
    plan: ExecutionPlan, model: SchedulerModel, opts: RunnerOptions | None = None
) -> EventLog:
    """Hybrid mode: units start at simulator-computed dispatch times, tasks
    run for real. Lets desk-scale runs show the dispatch ramp with real
    processes."""
    result = simulate(plan, model)
    starts = {}
    for r in result.log.records:
        starts[r.unit_id] = min(starts.get(r.unit_id, r.start_us), r.start_us)
    origin = min(starts.values(), default=0)
    release_us = {uid: t - origin for uid, t in starts.items()}
    return _execute_with_releases(plan, opts, release_us=release_us)


def _execute_with_releases(plan, opts, release_us):
    opts = opts or RunnerOptions()
    sequences = _slot_sequences(plan)
    if not sequences:
        return EventLog([], origin_note="local-runner (empty plan)")
    max_slots = resolve_max_slots(opts)
    if len(sequences) > max_slots and not opts.allow_oversubscribe:
        raise OversubscriptionError(
            f"plan needs {len(sequences)} concurrent slots, host allows {max_slots}"
        )

    task_time = plan.config.task_time_us
    start_event = threading.Event()
    t0_holder = {}
    pin_warned = []
    results = []  # one record list per worker, merged after join
    threads = []

    def worker(key, segments, out_records):
        node, core = key
        if opts.pin_enabled:
            _pin_current_thread(core, pin_warned)
        start_event.wait()
        t0 = t0_holder["t0"]
        for unit_id, run in segments:
            if release_us is not None:
                remaining = release_us[unit_id] - (time.monotonic_ns() // 1000 - t0)
                if remaining > 0:
                    time.sleep(remaining / 1_000_000)
            for tid in run:
                start = time.monotonic_ns() // 1000 - t0
                _run_task(task_time, tid, opts.task_command_override)
                end = time.monotonic_ns() // 1000 - t0
                out_records.append(EventRecord(unit_id, tid, node, core, start, end))

    for key in sorted(sequences):
        out = []
        results.append(out)
        th = threading.Thread(target=worker, args=(key, sequences[key], out))
        th.start()
        threads.append(th)
    t0_holder["t0"] = time.monotonic_ns() // 1000
    start_event.set()
    for th in threads:
        th.join()

    records = [r for out in results for r in out]
    records.sort(key=lambda r: r.task_id)
    note = "local-runner" if release_us is None else "local-runner (simulated dispatch)"
    return EventLog(records, origin_note=note).shifted()
