"""hetsched: throughput-maximizing schedulers for stream topologies on
heterogeneous clusters, plus the simulators to evaluate them."""

from .model import (
    BOLT,
    SPOUT,
    Cluster,
    ComponentSpec,
    ExecutionPlan,
    MachineType,
    ProfileEntry,
    ProfileTable,
    UserTopology,
    task_index,
    validate_topology,
)
from .rates import (
    TaskRates,
    UtilizationMap,
    max_feasible_rate,
    predict_load,
    propagate_rates,
    utilization,
)
from .schedulers import (
    ScheduleResult,
    SchedulerConfig,
    enumerate_instance_vectors,
    first_assignment,
    heuristic_schedule,
    maximize_throughput,
    optimal_schedule,
    round_robin_schedule,
)
from .simulate import (
    ComparisonTable,
    SimulationReport,
    compare,
    discrete_oracle,
    simulate,
    weighted_utilization,
)

__all__ = [
    "BOLT",
    "SPOUT",
    "Cluster",
    "ComparisonTable",
    "ComponentSpec",
    "ExecutionPlan",
    "MachineType",
    "ProfileEntry",
    "ProfileTable",
    "ScheduleResult",
    "SchedulerConfig",
    "SimulationReport",
    "TaskRates",
    "UserTopology",
    "UtilizationMap",
    "compare",
    "discrete_oracle",
    "enumerate_instance_vectors",
    "first_assignment",
    "heuristic_schedule",
    "max_feasible_rate",
    "maximize_throughput",
    "optimal_schedule",
    "predict_load",
    "propagate_rates",
    "round_robin_schedule",
    "simulate",
    "task_index",
    "utilization",
    "validate_topology",
    "weighted_utilization",
]

__version__ = "0.1.0"
