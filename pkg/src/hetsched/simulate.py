"""Plan evaluation: analytic steady state, token-level oracle, comparisons.

The analytic path applies the linear rate model directly. The discrete
oracle re-derives the same quantities from first principles by pushing
individual tuples through a time-stepped processor-sharing simulation,
so the two implementations can cross-check each other.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import TickTooCoarse
from .model import Cluster, ExecutionPlan, ProfileTable, UserTopology
from .rates import (
    CAPACITY_EPSILON,
    TaskRates,
    UtilizationMap,
    degrade_processing_rates,
    propagate_rates,
    utilization,
)


@dataclass(frozen=True)
class TaskReport:
    task_id: int
    component: str
    machine_id: int
    input_rate: float
    output_rate: float
    processing_rate: float
    load: float


@dataclass(frozen=True)
class MachineReport:
    machine_id: int
    type_id: str
    used: float
    headroom: float
    tasks: tuple[int, ...]


@dataclass(frozen=True)
class SimulationReport:
    """Everything a schedule evaluation produces.

    ``overall_throughput`` sums the processing rates of all tasks, one
    contribution per pipeline stage; it is a stage-sum, not an end-to-end
    sink rate. ``weighted_utilization`` weights each machine type by its
    profiling-derived speed; the per-kind weights sum to 1 per component
    kind, so the raw value can exceed 1 when several kinds exist. The
    ``_normalized`` variant divides the kind count back out.
    """

    input_rate: float
    overall_throughput: float
    feasible: bool
    weighted_utilization: float
    weighted_utilization_normalized: float
    per_machine: tuple[MachineReport, ...]
    per_task: tuple[TaskReport, ...]


def _type_weights(
    topology: UserTopology, cluster: Cluster, profiles: ProfileTable
) -> dict[str, float]:
    """Speed-derived weight of each machine type.

    For every component kind, a type earns weight proportional to the
    reciprocal of its slope for that kind, normalized over the types
    present; the per-kind weights of one type are then summed.
    """
    types = cluster.present_types()
    weights = {t: 0.0 for t in types}
    for key in topology.distinct_profile_keys():
        inv = {t: 1.0 / profiles.entry(key, t).slope for t in types}
        total = sum(inv.values())
        for t in types:
            weights[t] += inv[t] / total
    return weights


def _weighted_from_used(
    used: tuple[float, ...],
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> tuple[float, float]:
    """Raw and kind-normalized weighted utilization from per-machine load."""
    weights = _type_weights(topology, cluster, profiles)
    raw = 0.0
    for type_id, weight in weights.items():
        members = cluster.machines_of_type(type_id)
        mean_util = sum(used[w] for w in members) / (len(members) * cluster.capacity)
        raw += weight * mean_util
    kinds = len(topology.distinct_profile_keys())
    return raw, raw / kinds


def weighted_utilization(
    report: SimulationReport,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> float:
    """Recompute the speed-weighted overall utilization of a report."""
    used = tuple(m.used for m in report.per_machine)
    raw, _ = _weighted_from_used(used, topology, cluster, profiles)
    return raw


def _build_report(
    plan: ExecutionPlan,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    rates: TaskRates,
    util: UtilizationMap,
    feasible: bool,
) -> SimulationReport:
    tasks = tuple(
        TaskReport(
            task_id=t,
            component=topology.components[j].name,
            machine_id=w,
            input_rate=rates.input_rate[t],
            output_rate=rates.output_rate[t],
            processing_rate=rates.processing_rate[t],
            load=util.task_load[t],
        )
        for t, j, w in plan.iter_tasks()
    )
    machines = tuple(
        MachineReport(
            machine_id=w,
            type_id=cluster.type_of(w),
            used=util.used[w],
            headroom=util.headroom[w],
            tasks=plan.tasks_on(w),
        )
        for w in range(len(cluster))
    )
    raw, normalized = _weighted_from_used(util.used, topology, cluster, profiles)
    return SimulationReport(
        input_rate=plan.input_rate,
        overall_throughput=sum(rates.processing_rate),
        feasible=feasible,
        weighted_utilization=raw,
        weighted_utilization_normalized=normalized,
        per_machine=machines,
        per_task=tasks,
    )


def simulate(
    plan: ExecutionPlan,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> SimulationReport:
    """Analytic steady-state evaluation of a plan.

    Rates follow the even-split propagation model; loads are linear in
    rate. On over-utilized machines the reported processing rates degrade
    proportionally, so the report stays meaningful for infeasible plans.
    """
    rates = propagate_rates(plan, topology)
    util = utilization(plan, rates, topology, cluster, profiles)
    feasible = util.feasible(CAPACITY_EPSILON)
    if not feasible:
        rates = degrade_processing_rates(rates, plan, util, cluster.capacity)
    return _build_report(plan, topology, cluster, profiles, rates, util, feasible)


# ---------------------------------------------------------------------------
# Discrete-token oracle
# ---------------------------------------------------------------------------

WARMUP_FRACTION = 0.1


def discrete_oracle(
    plan: ExecutionPlan,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    horizon: float,
    tick: float,
    jitter_seed: int | None = None,
) -> SimulationReport:
    """Measure a plan by simulating individual tuples tick by tick.

    Spout instances emit tuples at their configured rate (evenly spaced,
    or Poisson when ``jitter_seed`` is set). Each machine is a shared
    processor: per tick it pays the fixed overhead of every resident task
    and divides the remaining budget fairly among tasks with queued work.
    A tuple at task t costs its profiling slope in capacity-seconds.
    Completed tuples feed downstream queues; queues are unbounded.

    Counters reset after a warm-up of 10% of the horizon; reported rates
    and utilizations are averages over the remaining window.

    Raises TickTooCoarse when the tick exceeds 1% of the smallest
    per-tuple cost in use, or the horizon spans fewer than 100 ticks.
    """
    n_machines = len(cluster)
    comp = [j for _, j, _ in plan.iter_tasks()]
    machine = list(plan.assignment)
    slope = []
    overhead = []
    for t, j, w in plan.iter_tasks():
        entry = profiles.entry(
            topology.components[j].profile_key, cluster.type_of(w)
        )
        slope.append(entry.slope)
        overhead.append(entry.overhead)

    min_slope = min(slope)
    if tick > 0.01 * min_slope:
        raise TickTooCoarse(
            f"tick {tick:g}s exceeds 1% of the smallest per-tuple cost "
            f"({min_slope:g} capacity-seconds)"
        )
    if horizon < 100 * tick:
        raise TickTooCoarse(f"horizon {horizon:g}s spans fewer than 100 ticks")

    rng = random.Random(jitter_seed) if jitter_seed is not None else None
    capacity = cluster.capacity

    residents: list[list[int]] = [[] for _ in range(n_machines)]
    for t in range(plan.total_tasks):
        residents[machine[t]].append(t)
    overhead_total = [
        min(capacity, sum(overhead[t] for t in residents[w]))
        for w in range(n_machines)
    ]
    work_budget_rate = [max(0.0, capacity - overhead_total[w]) for w in range(n_machines)]

    # Per spout instance: expected arrivals per second.
    spout_rate: dict[int, float] = {}
    for s in topology.spout_ids:
        share = plan.input_rate / plan.instance_counts[s]
        for t in plan.tasks_of(s):
            spout_rate[t] = share

    ratio = [topology.components[j].output_ratio for j in range(len(topology))]
    downstream = [topology.components[j].downstream for j in range(len(topology))]
    instances = [list(plan.tasks_of(j)) for j in range(len(topology))]

    pending = [0.0] * plan.total_tasks          # queued work, capacity-seconds
    processed = [0.0] * plan.total_tasks        # lifetime processed work
    emitted_whole = [0] * plan.total_tasks      # tuples already fanned out
    arrived = [0] * plan.total_tasks
    credit: dict[tuple[int, int], float] = {}   # (task, downstream comp) remainder
    rr_ptr: dict[tuple[int, int], int] = {}     # round-robin fan-out position

    consumed = [0.0] * n_machines               # capacity-seconds, incl. overhead
    base_processed = [0.0] * plan.total_tasks
    base_arrived = [0] * plan.total_tasks
    base_consumed = [0.0] * n_machines

    def enqueue(task: int, count: int) -> None:
        arrived[task] += count
        pending[task] += count * slope[task]

    warmup = WARMUP_FRACTION * horizon
    steps = int(round(horizon / tick))
    warmup_step = int(round(warmup / tick))
    now = 0.0
    tiny = 1e-12

    for step in range(steps):
        nxt = now + tick
        # Source arrivals.
        for t, r in spout_rate.items():
            if rng is None:
                k = math.floor(r * nxt) - math.floor(r * now)
            else:
                k = _poisson(rng, r * tick)
            if k:
                enqueue(t, k)
        # Processor sharing per machine.
        for w in range(n_machines):
            consumed[w] += overhead_total[w] * tick
            budget = work_budget_rate[w] * tick
            if budget <= 0.0:
                continue
            active = [t for t in residents[w] if pending[t] > tiny]
            remaining = budget
            while active and remaining > tiny:
                share = remaining / len(active)
                still = []
                for t in active:
                    take = pending[t] if pending[t] < share else share
                    pending[t] -= take
                    processed[t] += take
                    remaining -= take
                    if pending[t] > tiny:
                        still.append(t)
                if len(still) == len(active):
                    break  # everyone consumed a full share; budget exhausted
                active = still
            consumed[w] += budget - remaining
        # Fan out completed tuples.
        for t in range(plan.total_tasks):
            done = int(processed[t] / slope[t] + 1e-9)
            fresh = done - emitted_whole[t]
            if fresh <= 0:
                continue
            emitted_whole[t] = done
            j = comp[t]
            for d in downstream[j]:
                key = (t, d)
                credit[key] = credit.get(key, 0.0) + fresh * ratio[j]
                whole = int(credit[key])
                if whole <= 0:
                    continue
                credit[key] -= whole
                targets = instances[d]
                n = len(targets)
                each, extra = divmod(whole, n)
                ptr = rr_ptr.get(key, 0)
                for i, u in enumerate(targets):
                    k = each + (1 if (i - ptr) % n < extra else 0)
                    if k:
                        enqueue(u, k)
                rr_ptr[key] = (ptr + extra) % n
        now = nxt
        if step + 1 == warmup_step:
            base_processed = processed.copy()
            base_arrived = arrived.copy()
            base_consumed = consumed.copy()

    window = now - warmup_step * tick
    pr = tuple(
        (processed[t] - base_processed[t]) / slope[t] / window
        for t in range(plan.total_tasks)
    )
    ir = tuple(
        (arrived[t] - base_arrived[t]) / window for t in range(plan.total_tasks)
    )
    orate = tuple(pr[t] * ratio[comp[t]] for t in range(plan.total_tasks))
    used = tuple(
        (consumed[w] - base_consumed[w]) / window for w in range(n_machines)
    )
    task_load = tuple(
        pr[t] * slope[t] + overhead[t] for t in range(plan.total_tasks)
    )
    util = UtilizationMap(
        task_load, used, tuple(capacity - u for u in used)
    )
    # Stability check: backlog at the end should be a handful of tuples.
    feasible = all(
        pending[t] / slope[t] <= max(5.0, 0.02 * max(arrived[t], 1))
        for t in range(plan.total_tasks)
    )
    rates = TaskRates(ir, orate, pr)
    return _build_report(plan, topology, cluster, profiles, rates, util, feasible)


def _poisson(rng: random.Random, lam: float) -> int:
    """Knuth's method; fine for the small per-tick means used here."""
    limit = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


# ---------------------------------------------------------------------------
# Plan comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    label: str
    input_rate: float
    throughput: float
    weighted_utilization: float
    feasible: bool
    machine_used: tuple[float, ...]


@dataclass(frozen=True)
class PairwiseGain:
    """Relative gains of ``first`` over ``second`` and their ratio.

    The ratio divides the relative throughput delta by the relative
    utilization delta; None when undefined (equal utilizations or a zero
    baseline).
    """

    first: str
    second: str
    throughput_delta: float | None
    utilization_delta: float | None
    gain_ratio: float | None


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    pairs: tuple[PairwiseGain, ...]


def compare(
    plans: list[tuple[str, ExecutionPlan]],
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> ComparisonTable:
    """Evaluate several plans side by side with pairwise gain ratios."""
    if len(plans) < 2:
        raise ValueError("compare needs at least two plans")
    rows = []
    for label, plan in plans:
        report = simulate(plan, topology, cluster, profiles)
        rows.append(
            ComparisonRow(
                label=label,
                input_rate=plan.input_rate,
                throughput=report.overall_throughput,
                weighted_utilization=report.weighted_utilization,
                feasible=report.feasible,
                machine_used=tuple(m.used for m in report.per_machine),
            )
        )
    pairs = []
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            a, b = rows[i], rows[j]
            dthr = (
                (a.throughput - b.throughput) / b.throughput
                if b.throughput > 0
                else None
            )
            dutil = (
                (a.weighted_utilization - b.weighted_utilization)
                / b.weighted_utilization
                if b.weighted_utilization > 0
                else None
            )
            ratio = (
                dthr / dutil
                if dthr is not None and dutil is not None and dutil != 0.0
                else None
            )
            pairs.append(PairwiseGain(a.label, b.label, dthr, dutil, ratio))
    return ComparisonTable(tuple(rows), tuple(pairs))
