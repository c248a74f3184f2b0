"""Node-based task aggregation benchmarking toolkit.

Builds execution plans for flat, per-core, and per-node task aggregation,
simulates a centralized scheduler dispatching them, executes them for real
at desk scale, and analyzes the resulting event logs alongside the embedded
published runtime dataset.
"""

from .aggregate import (
    DEFAULT_TEMPLATE,
    ScriptTemplate,
    assign_affinity,
    build_plan,
    read_plan,
    render_node_script,
    verify_partition,
    write_plan,
)
from .metrics import (
    OverheadReport,
    UtilizationSeries,
    job_runtime,
    load_paper_runs,
    median_runtime,
    normalized_overhead,
    overhead_table,
    strategy_ratio,
    utilization,
)
from .model import (
    AggregationStrategy,
    BenchmarkConfig,
    EventLog,
    EventRecord,
    ExecutionPlan,
    SchedulingUnit,
    TaskSpec,
    expand_tasks,
    format_hours,
    iter_tasks,
    paper_config,
    total_processor_time_hours,
)
from .runner import RunnerOptions, execute, execute_through_sim_dispatch
from .sim import (
    SchedulerModel,
    SimResult,
    calibrate_cleanup_cost,
    replay_oracle,
    simulate,
    unit_makespan,
)

__version__ = "0.1.0"
