import pytest

from nodepack.aggregate import build_plan
from nodepack.errors import OversubscriptionError
from nodepack.metrics import job_runtime
from nodepack.model import (
    AggregationStrategy,
    BenchmarkConfig,
    ExecutionPlan,
    check_slot_non_overlap,
)
from nodepack.runner import (
    RunnerOptions,
    execute,
    execute_through_sim_dispatch,
    resolve_max_slots,
)
from nodepack.sim import SchedulerModel

MS = 1_000


def opts(slots=16, **kwargs):
    return RunnerOptions(max_host_slots=slots, **kwargs)


class TestExecute:
    def test_single_task(self):
        c = BenchmarkConfig(200 * MS, 200 * MS, 1, 1)
        log = execute(build_plan(c, AggregationStrategy.PER_NODE), opts())
        assert len(log.records) == 1
        duration = log.records[0].end_us - log.records[0].start_us
        assert 200 * MS <= duration <= 300 * MS

    def test_per_node_eight_slots(self):
        c = BenchmarkConfig(200 * MS, 2_000 * MS, 1, 8)
        log = execute(build_plan(c, AggregationStrategy.PER_NODE), opts(slots=8))
        assert len(log.records) == 80
        assert check_slot_non_overlap(log)
        runtime = job_runtime(log)
        assert 2_000 * MS <= runtime <= 2_500 * MS

    def test_empty_plan(self):
        c = BenchmarkConfig(1, 1, 1, 1)
        empty = ExecutionPlan(c, AggregationStrategy.FLAT, ())
        assert execute(empty, opts()).records == []

    def test_conservation_and_duration_floor(self):
        c = BenchmarkConfig(50 * MS, 100 * MS, 2, 2)
        plan = build_plan(c, AggregationStrategy.PER_CORE)
        log = execute(plan, opts())
        assert len(log.records) == c.total_tasks
        assert all(r.end_us - r.start_us >= 50 * MS for r in log.records)
        assert min(r.start_us for r in log.records) == 0

    def test_oversubscription_rejected(self):
        c = BenchmarkConfig(10 * MS, 10 * MS, 2, 4)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        with pytest.raises(OversubscriptionError):
            execute(plan, opts(slots=4))

    def test_oversubscription_allowed(self):
        c = BenchmarkConfig(10 * MS, 10 * MS, 2, 4)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        log = execute(plan, opts(slots=4, allow_oversubscribe=True))
        assert len(log.records) == 8

    def test_pinning_best_effort(self):
        c = BenchmarkConfig(10 * MS, 20 * MS, 1, 2)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        log = execute(plan, opts(pin_enabled=True))
        assert len(log.records) == 4


class TestHybridDispatch:
    def test_degenerate_model_matches_execute(self):
        c = BenchmarkConfig(100 * MS, 400 * MS, 1, 4)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        direct = job_runtime(execute(plan, opts()))
        hybrid = job_runtime(
            execute_through_sim_dispatch(plan, SchedulerModel(0, 0), opts())
        )
        assert abs(hybrid - direct) / direct < 0.10

    def test_flat_dispatch_delay_lower_bound(self):
        c = BenchmarkConfig(200 * MS, 800 * MS, 1, 4)
        plan = build_plan(c, AggregationStrategy.FLAT)
        direct = job_runtime(execute(plan, opts()))
        hybrid = job_runtime(
            execute_through_sim_dispatch(plan, SchedulerModel(100 * MS, 0), opts())
        )
        assert hybrid - direct >= (len(plan.units) - 1) * 100 * MS * 0.5

    def test_oversubscribed_rejected(self):
        c = BenchmarkConfig(10 * MS, 10 * MS, 1, 8)
        plan = build_plan(c, AggregationStrategy.PER_NODE)
        with pytest.raises(OversubscriptionError):
            execute_through_sim_dispatch(plan, SchedulerModel(0, 0), opts(slots=2))


class TestSlotResolution:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("NODEPACK_MAX_SLOTS", "3")
        assert resolve_max_slots(RunnerOptions()) == 3

    def test_explicit_wins_over_env(self, monkeypatch):
        monkeypatch.setenv("NODEPACK_MAX_SLOTS", "3")
        assert resolve_max_slots(RunnerOptions(max_host_slots=5)) == 5

    def test_invalid(self):
        with pytest.raises(OversubscriptionError):
            resolve_max_slots(RunnerOptions(max_host_slots=0))
