"""Energy-minimizing DAG workflow scheduling under deadline and reliability constraints."""

from .dynamic import (
    MonteCarloResult,
    RollingHorizon,
    SimConfig,
    SimTrace,
    advance_ready,
    run_dynamic,
    run_monte_carlo,
    sample_actual_time,
    task_stream,
    wilson_interval,
)
from .oracle import OracleResult, enumerate_optimal, evaluate_assignment
from .platform import (
    CatalogError,
    ExecContext,
    Platform,
    VmType,
    critical_frequency,
    execution_time,
    failure_rate,
    load_platform,
    parse_platform,
    platform_to_json,
    power_draw,
    task_energy,
    task_reliability,
    workflow_reliability,
)
from .scheduling import (
    ConstraintReport,
    Schedule,
    ScheduleEntry,
    SchedulePlanner,
    asmfr_schedule,
    asmfr_select,
    bcp_schedule,
    check_constraints,
    effective_energy,
    entry_energy,
    ldd_schedule,
    lef_schedule,
    level_deadlines,
    min_cpf,
    schedule_to_json,
    select_context,
    updated_reliability,
)
from .synth import random_platform, random_workflow
from .workflow import (
    LevelInfo,
    Task,
    TimeBounds,
    Workflow,
    WorkflowError,
    compute_levels,
    compute_time_bounds,
    critical_path_time,
    import_dax,
    max_fanout_ratio,
    parse_workflow,
    workflow_to_json,
)

__version__ = "0.1.0"
