"""Tuple-rate propagation and CPU load prediction.

The model is fluid and linear: a task consumes ``slope`` capacity units
per tuple/second of input plus a fixed ``overhead``, and each task splits
its output evenly among the instances of every downstream component.
Because the splits are even, all instances of one component see the same
input rate, and every rate in the graph is proportional to the topology
input rate. That linearity gives a closed form for the largest input
rate a fixed plan can sustain.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InfeasibleAtZeroRate
from .model import Cluster, ExecutionPlan, ProfileTable, UserTopology

#: Slack used when classifying a machine as over-utilized.
CAPACITY_EPSILON = 1e-9


@dataclass(frozen=True)
class TaskRates:
    """Per-task steady-state rates, indexed by task id.

    ``input_rate[t]`` is what task t receives, ``output_rate[t]`` what it
    emits toward each downstream component (input times the component's
    output ratio), and ``processing_rate[t]`` what it actually processes.
    Processing equals input unless degradation was applied.
    """

    input_rate: tuple[float, ...]
    output_rate: tuple[float, ...]
    processing_rate: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.input_rate)


@dataclass(frozen=True)
class UtilizationMap:
    """Predicted CPU load per task and per machine.

    ``headroom[w]`` is capacity minus the load on machine w; negative
    headroom signals over-utilization rather than raising.
    """

    task_load: tuple[float, ...]
    used: tuple[float, ...]
    headroom: tuple[float, ...]

    def over_utilized(self, epsilon: float = CAPACITY_EPSILON) -> tuple[int, ...]:
        """Machine ids whose load exceeds capacity beyond the slack."""
        return tuple(w for w, h in enumerate(self.headroom) if h < -epsilon)

    def feasible(self, epsilon: float = CAPACITY_EPSILON) -> bool:
        return not self.over_utilized(epsilon)


def component_input_totals(
    topology: UserTopology, input_rate: float
) -> tuple[float, ...]:
    """Total tuple rate flowing into each component at a given input rate.

    Each spout component sources the full configured rate. A component
    that feeds several downstream components sends its complete scaled
    output to each of them. Instance counts do not matter here: even
    splitting conserves the per-component totals.
    """
    totals = [0.0] * len(topology)
    for s in topology.spout_ids:
        totals[s] = input_rate
    for j in topology.topological_order():
        out = totals[j] * topology.components[j].output_ratio
        for d in topology.components[j].downstream:
            totals[d] += out
    return tuple(totals)


def throughput_per_unit_rate(topology: UserTopology) -> float:
    """Sum of all per-component rates when the input rate is 1.

    Overall throughput counts the processing rate of every task, so for a
    feasible plan it equals this constant times the input rate, whatever
    the instance counts and placement.
    """
    return sum(component_input_totals(topology, 1.0))


def propagate_rates(plan: ExecutionPlan, topology: UserTopology) -> TaskRates:
    """Steady-state input/output rates of every task of a plan.

    Spout instances split their component's source rate evenly; each
    downstream instance receives an even share of every feeding task's
    output. Processing rate is set equal to input rate (the feasible
    case); apply :func:`degrade_processing_rates` for overload reporting.
    """
    totals = component_input_totals(topology, plan.input_rate)
    ir: list[float] = []
    orate: list[float] = []
    for j, count in enumerate(plan.instance_counts):
        per_instance = totals[j] / count
        ratio = topology.components[j].output_ratio
        ir.extend([per_instance] * count)
        orate.extend([per_instance * ratio] * count)
    return TaskRates(tuple(ir), tuple(orate), tuple(ir))


def predict_load(
    profiles: ProfileTable, profile_key: str, type_id: str, input_rate: float
) -> float:
    """Capacity units one task occupies at the given input rate.

    Linear in the rate: slope * rate + overhead.
    """
    entry = profiles.entry(profile_key, type_id)
    return entry.slope * input_rate + entry.overhead


def utilization(
    plan: ExecutionPlan,
    rates: TaskRates,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> UtilizationMap:
    """Predicted load per task and the resulting per-machine occupancy."""
    task_load = [0.0] * plan.total_tasks
    used = [0.0] * len(cluster)
    for t, j, w in plan.iter_tasks():
        load = predict_load(
            profiles,
            topology.components[j].profile_key,
            cluster.type_of(w),
            rates.input_rate[t],
        )
        task_load[t] = load
        used[w] += load
    headroom = tuple(cluster.capacity - u for u in used)
    return UtilizationMap(tuple(task_load), tuple(used), headroom)


def degrade_processing_rates(
    rates: TaskRates, plan: ExecutionPlan, util: UtilizationMap, capacity: float
) -> TaskRates:
    """Scale processing rates down on over-utilized machines.

    A task on a machine loaded beyond capacity processes only the
    proportional share capacity/used of its input. Schedulers never
    produce such plans; this exists so reports can describe them.
    """
    pr = list(rates.input_rate)
    for t, _, w in plan.iter_tasks():
        if util.used[w] > capacity:
            pr[t] = rates.input_rate[t] * (capacity / util.used[w])
    return TaskRates(rates.input_rate, rates.output_rate, tuple(pr))


def max_feasible_rate(
    instance_counts: tuple[int, ...],
    assignment: tuple[int, ...],
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> float:
    """Largest input rate the given counts and placement can sustain.

    Every task's input rate is proportional to the topology rate, so each
    machine imposes the linear bound slope_sum * R + overhead_sum <=
    capacity. The answer is the tightest bound; infinity if no machine
    carries rate-dependent load.

    Raises InfeasibleAtZeroRate when fixed overhead alone over-fills a
    machine.
    """
    unit = ExecutionPlan(instance_counts, assignment, 1.0)
    coeffs = propagate_rates(unit, topology)
    slope_sum = [0.0] * len(cluster)
    overhead_sum = [0.0] * len(cluster)
    for t, j, w in unit.iter_tasks():
        entry = profiles.entry(
            topology.components[j].profile_key, cluster.type_of(w)
        )
        slope_sum[w] += entry.slope * coeffs.input_rate[t]
        overhead_sum[w] += entry.overhead

    best = float("inf")
    for w in range(len(cluster)):
        room = cluster.capacity - overhead_sum[w]
        if room < -CAPACITY_EPSILON:
            raise InfeasibleAtZeroRate(w, overhead_sum[w], cluster.capacity)
        if slope_sum[w] > 0.0:
            best = min(best, max(0.0, room) / slope_sum[w])
    return best
