"""Plan construction: the growth heuristic, Round-Robin, exhaustive search.

The growth heuristic starts from one instance of every component placed
where it is cheapest, then alternates two moves: raise the input rate
while no machine is over-filled, and replicate the component behind the
hottest task when one is. When neither move fits, it backs off to the
last stable plan and retries with half the rate step. The exhaustive
scheduler walks the whole design space of instance counts and placements
and serves as the optimality baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .errors import (
    BudgetTooSmall,
    InfeasibleInitialPlan,
    IterationLimitExceeded,
    SearchSpaceTooLarge,
)
from .model import Cluster, ExecutionPlan, ProfileTable, UserTopology
from .rates import (
    component_input_totals,
    max_feasible_rate,
    propagate_rates,
    utilization,
)
from .simulate import SimulationReport, simulate

DEFAULT_COST_CAP = 3_000_000

#: A fallback repair must be able to shave at least this share of the
#: overload; otherwise replicating it cannot make progress.
RELIEF_FRACTION = 0.2


@dataclass(frozen=True)
class SchedulerConfig:
    """Tuning knobs shared by the scheduling entry points.

    ``initial_rate`` seeds the growth loop; ``initial_scale`` divides the
    rate increment (doubling it halves the step). Refinement stops once
    the relative step 1/scale drops below ``rate_tolerance``.
    ``max_iterations`` is a safety bound, and ``capacity_epsilon`` is the
    slack used when testing a machine against its capacity.
    """

    initial_rate: float = 1.0
    initial_scale: float = 1.0
    max_iterations: int = 1_000_000
    capacity_epsilon: float = 1e-9
    rate_tolerance: float = 1e-3

    def __post_init__(self) -> None:
        if self.initial_rate <= 0:
            raise ValueError("initial_rate must be > 0")
        if self.initial_scale < 1:
            raise ValueError("initial_scale must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.rate_tolerance <= 1:
            raise ValueError("rate_tolerance must be in (0, 1]")


@dataclass(frozen=True)
class TraceEvent:
    """One growth-loop decision, for debugging and property checks."""

    iteration: int
    rate: float
    action: str  # snapshot | grow | backoff | stop
    machine: int | None = None
    component: int | None = None


@dataclass(frozen=True)
class ScheduleResult:
    plan: ExecutionPlan
    report: SimulationReport
    iterations: int
    trace: tuple[TraceEvent, ...] | None = None


def _flatten(placements: Sequence[Sequence[int]]) -> tuple[int, ...]:
    flat: list[int] = []
    for machines in placements:
        flat.extend(machines)
    return tuple(flat)


def first_assignment(
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    config: SchedulerConfig | None = None,
) -> ExecutionPlan:
    """One instance per component, each on its individually cheapest machine.

    Components are visited in topological order and placed on the machine
    where their predicted load at the initial rate is smallest (ties go to
    the lowest machine id). Placement ignores what is already on a
    machine, so the result can be over-filled; that raises
    InfeasibleInitialPlan rather than returning an overloaded plan.
    """
    config = config or SchedulerConfig()
    profiles.check_coverage(topology, cluster)
    totals = component_input_totals(topology, config.initial_rate)
    placements: list[list[int]] = [[] for _ in topology.components]
    for j in topology.topological_order():
        key = topology.components[j].profile_key
        best_w = 0
        best_load = math.inf
        for w in range(len(cluster)):
            entry = profiles.entry(key, cluster.type_of(w))
            load = entry.slope * totals[j] + entry.overhead
            if load < best_load:
                best_load = load
                best_w = w
        placements[j] = [best_w]

    plan = ExecutionPlan(
        tuple(1 for _ in topology.components), _flatten(placements), config.initial_rate
    )
    util = utilization(plan, propagate_rates(plan, topology), topology, cluster, profiles)
    over = util.over_utilized(config.capacity_epsilon)
    if over:
        raise InfeasibleInitialPlan(
            f"machine {over[0]} is over-utilized at the initial rate "
            f"{config.initial_rate:g}; retry with a smaller rate"
        )
    return plan


def maximize_throughput(
    initial: ExecutionPlan,
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    config: SchedulerConfig | None = None,
    collect_trace: bool = False,
) -> ScheduleResult:
    """Grow an initial plan until the cluster is saturated.

    Loop body, per iteration: recompute loads; if nothing is over-filled,
    snapshot the plan as the last stable state and raise the rate by
    rate/scale. Otherwise repair: take the component of the hottest task
    on the first over-filled machine and add the smallest number of new
    instances that all fit, each placed on the fitting machine where its
    predicted load is least. A single instance is tried first; larger
    batches (at most two instances per machine) only when one alone fits
    nowhere, since splitting further shrinks the per-instance load until
    the chunks fit. If no batch of the hottest component fits, the other
    components on that machine are tried in decreasing order of the load
    they put there, skipping any whose complete removal could not shave
    at least a fifth of the overload (that floor keeps near-zero-cost
    components from being replicated pointlessly). When no repair fits,
    back off to the stable snapshot with the step halved (scale doubled),
    until the relative step drops below the configured tolerance.

    The returned plan carries the exact closed-form maximum rate of its
    final structure, which the rate walk approaches from below.
    """
    config = config or SchedulerConfig()
    eps = config.capacity_epsilon
    n = len(topology)
    m = len(cluster)
    capacity = cluster.capacity

    unit_totals = component_input_totals(topology, 1.0)
    prof = [
        [profiles.entry(topology.components[j].profile_key, cluster.type_of(w)) for w in range(m)]
        for j in range(n)
    ]

    placements: list[list[int]] = [
        list(initial.assignment[initial.tasks_of(j).start : initial.tasks_of(j).stop])
        for j in range(n)
    ]
    rate = initial.input_rate
    scale = config.initial_scale

    final_placements = [list(p) for p in placements]
    final_rate = rate
    trace: list[TraceEvent] = []
    iterations = 0

    while True:
        iterations += 1
        if iterations > config.max_iterations:
            raise IterationLimitExceeded(
                f"no convergence within {config.max_iterations} iterations"
            )
        counts = tuple(len(p) for p in placements)
        plan = ExecutionPlan(counts, _flatten(placements), rate)
        rates = propagate_rates(plan, topology)
        util = utilization(plan, rates, topology, cluster, profiles)
        over = util.over_utilized(eps)

        if not over:
            final_placements = [list(p) for p in placements]
            final_rate = rate
            if collect_trace:
                trace.append(TraceEvent(iterations, rate, "snapshot"))
            rate += rate / scale
            continue

        hot_machine = over[0]
        hot_task = -1
        hot_load = -math.inf
        component_load: dict[int, float] = {}
        for t in plan.tasks_on(hot_machine):
            if util.task_load[t] > hot_load:
                hot_load = util.task_load[t]
                hot_task = t
            c = plan.component_of(t)
            component_load[c] = component_load.get(c, 0.0) + util.task_load[t]
        hottest = plan.component_of(hot_task)
        excess = util.used[hot_machine] - capacity
        fallbacks = sorted(
            (c for c in component_load if c != hottest),
            key=lambda c: (-component_load[c], c),
        )

        grown = None
        for rank, j in enumerate([hottest] + fallbacks):
            if unit_totals[j] <= 0.0:
                continue  # replicating a zero-rate component sheds nothing
            if rank > 0 and component_load[j] < RELIEF_FRACTION * excess:
                break  # ordered by load; the rest can only relieve less
            batch = _fit_batch(
                j, counts, placements, rate, unit_totals, prof, capacity, eps, m, n
            )
            if batch is not None:
                grown = (j, batch)
                break
        if grown is not None:
            j, batch = grown
            placements[j].extend(batch)
            if collect_trace:
                for w in batch:
                    trace.append(TraceEvent(iterations, rate, "grow", w, j))
            continue

        if 1.0 / scale > config.rate_tolerance:
            scale *= 2
            placements = [list(p) for p in final_placements]
            rate = final_rate
            if collect_trace:
                trace.append(TraceEvent(iterations, rate, "backoff"))
            continue

        break

    counts = tuple(len(p) for p in final_placements)
    assignment = _flatten(final_placements)
    exact = max_feasible_rate(counts, assignment, topology, cluster, profiles)
    if math.isfinite(exact) and exact > final_rate:
        final_rate = exact
    if collect_trace:
        trace.append(TraceEvent(iterations, final_rate, "stop"))
    plan = ExecutionPlan(counts, assignment, final_rate)
    report = simulate(plan, topology, cluster, profiles)
    return ScheduleResult(plan, report, iterations, tuple(trace) if collect_trace else None)


def _fit_batch(
    j: int,
    counts: tuple[int, ...],
    placements: list[list[int]],
    rate: float,
    unit_totals: tuple[float, ...],
    prof: list[list],
    capacity: float,
    eps: float,
    m: int,
    n: int,
) -> list[int] | None:
    """Smallest batch of new component-j instances that fits, or None.

    For batch size k, loads are predicted with component j split k
    further ways; each new instance goes to the fitting machine where its
    own load is least. All k must fit for the batch to count. Batches are
    capped at two new instances per machine, which keeps a single repair
    from tiling the cluster with slivers at an overshot rate.
    """
    for k in range(1, 2 * m + 1):
        split = counts[j] + k
        per_instance = [
            unit_totals[c] * rate / (split if c == j else counts[c]) for c in range(n)
        ]
        used = [0.0] * m
        for c in range(n):
            ir = per_instance[c]
            row = prof[c]
            for w in placements[c]:
                entry = row[w]
                used[w] += entry.slope * ir + entry.overhead
        row = prof[j]
        new_ir = per_instance[j]
        batch: list[int] = []
        for _ in range(k):
            target = -1
            target_load = math.inf
            for w in range(m):
                load = row[w].slope * new_ir + row[w].overhead
                if used[w] + load <= capacity + eps and load < target_load:
                    target_load = load
                    target = w
            if target < 0:
                batch = []
                break
            used[target] += target_load
            batch.append(target)
        if batch:
            return batch
        # Pure overhead grows with k; once it alone exceeds all remaining
        # headroom no larger batch can help.
        min_overhead = min(entry.overhead for entry in row)
        if min_overhead > 0 and (counts[j] + k) * min_overhead > capacity * m:
            return None
    return None


MAX_RATE_RETRIES = 20


def heuristic_schedule(
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    config: SchedulerConfig | None = None,
    collect_trace: bool = False,
) -> ScheduleResult:
    """First placement plus growth, with an initial-rate fallback.

    If the one-instance plan is over-filled at the configured initial
    rate, the rate is halved and placement retried, up to 20 times.
    """
    config = config or SchedulerConfig()
    last_error: InfeasibleInitialPlan | None = None
    for _ in range(MAX_RATE_RETRIES + 1):
        try:
            initial = first_assignment(topology, cluster, profiles, config)
        except InfeasibleInitialPlan as exc:
            last_error = exc
            config = replace(config, initial_rate=config.initial_rate / 2)
            continue
        return maximize_throughput(
            initial, topology, cluster, profiles, config, collect_trace
        )
    raise InfeasibleInitialPlan(
        f"initial plan stayed infeasible after {MAX_RATE_RETRIES} rate halvings"
    ) from last_error


def round_robin_schedule(
    instance_counts: Sequence[int],
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
) -> ExecutionPlan:
    """Deal tasks to machines cyclically, then run at the plan's own limit.

    Instance counts come from the caller; the rate is set to the largest
    the dealt assignment can sustain, so the baseline is compared at its
    best.
    """
    counts = tuple(int(c) for c in instance_counts)
    total = sum(counts)
    m = len(cluster)
    assignment = tuple(t % m for t in range(total))
    rate = max_feasible_rate(counts, assignment, topology, cluster, profiles)
    return ExecutionPlan(counts, assignment, rate)


def enumerate_instance_vectors(n: int, budget: int) -> Iterator[tuple[int, ...]]:
    """All count vectors with every entry >= 1 and sum <= budget.

    Vectors come out in lexicographic order; there are C(budget, n) of
    them in total.
    """
    if n < 1:
        raise ValueError("need at least one component")
    if budget < n:
        raise BudgetTooSmall(
            f"budget {budget} cannot give each of {n} components one instance"
        )

    def walk(prefix: tuple[int, ...], remaining: int, left: int) -> Iterator[tuple[int, ...]]:
        if left == 0:
            yield prefix
            return
        for x in range(1, remaining - (left - 1) + 1):
            yield from walk(prefix + (x,), remaining - x, left - 1)

    return walk((), budget, n)


def search_space_size(n: int, budget: int, machines: int) -> int:
    """Number of (counts, placement-multiset) candidates before cap pruning."""
    total = 0
    for counts in enumerate_instance_vectors(n, budget):
        product = 1
        for x in counts:
            product *= math.comb(x + machines - 1, machines - 1)
        total += product
    return total


def optimal_schedule(
    topology: UserTopology,
    cluster: Cluster,
    profiles: ProfileTable,
    budget_per_machine: Sequence[int],
    cost_cap: int = DEFAULT_COST_CAP,
) -> ScheduleResult:
    """Exhaustive search over instance counts and placements.

    Instances of one component are interchangeable, so placements are
    enumerated as per-component multisets of machines. Each candidate is
    scored at its own maximum sustainable rate; the best plan wins, with
    ties going to the lexicographically smallest (counts, assignment).
    Cost grows combinatorially; instances beyond the cap are refused.
    Intended for desk-scale baselines (a handful of components and
    machines).
    """
    profiles.check_coverage(topology, cluster)
    n = len(topology)
    m = len(cluster)
    caps = [int(k) for k in budget_per_machine]
    if len(caps) != m:
        raise ValueError(f"expected {m} per-machine budgets, got {len(caps)}")
    if any(k < 0 for k in caps):
        raise ValueError("per-machine budgets must be >= 0")
    budget = sum(caps)
    if budget < n:
        raise BudgetTooSmall(
            f"total budget {budget} cannot give each of {n} components one instance"
        )
    estimated = search_space_size(n, budget, m)
    if estimated > cost_cap:
        raise SearchSpaceTooLarge(estimated, cost_cap)

    unit_totals = component_input_totals(topology, 1.0)
    slope = [
        [profiles.entry(topology.components[j].profile_key, cluster.type_of(w)).slope for w in range(m)]
        for j in range(n)
    ]
    overhead = [
        [profiles.entry(topology.components[j].profile_key, cluster.type_of(w)).overhead for w in range(m)]
        for j in range(n)
    ]
    capacity = cluster.capacity

    best_rate = -1.0
    best_counts: tuple[int, ...] | None = None
    best_assignment: tuple[int, ...] | None = None
    evaluated = 0

    machine_count = [0] * m
    slope_sum = [0.0] * m
    overhead_sum = [0.0] * m
    combo: list[tuple[int, ...]] = [()] * n

    for counts in enumerate_instance_vectors(n, budget):
        # Per-instance slope of each component under this count vector.
        inst_slope = [
            [slope[j][w] * unit_totals[j] / counts[j] for w in range(m)]
            for j in range(n)
        ]

        def place(j: int) -> None:
            nonlocal best_rate, best_counts, best_assignment, evaluated
            if j == n:
                evaluated += 1
                rate = math.inf
                for w in range(m):
                    room = capacity - overhead_sum[w]
                    # slack absorbs add/undo float drift in the running sums
                    if room < -1e-9:
                        return  # overhead alone over-fills this machine
                    if slope_sum[w] > 0.0:
                        bound = room / slope_sum[w]
                        if bound < rate:
                            rate = bound
                if math.isinf(rate):
                    return
                if rate > best_rate:
                    best_rate = rate
                    best_counts = counts
                    best_assignment = _flatten(combo)
                return
            row_slope = inst_slope[j]
            row_overhead = overhead[j]
            for machines in _machine_multisets(counts[j], m, machine_count, caps):
                for w in machines:
                    machine_count[w] += 1
                    slope_sum[w] += row_slope[w]
                    overhead_sum[w] += row_overhead[w]
                combo[j] = machines
                place(j + 1)
                for w in machines:
                    machine_count[w] -= 1
                    slope_sum[w] -= row_slope[w]
                    overhead_sum[w] -= row_overhead[w]

        place(0)

    if best_counts is None or best_assignment is None:
        raise InfeasibleInitialPlan(
            "no placement keeps every machine within capacity at zero rate"
        )
    plan = ExecutionPlan(best_counts, best_assignment, best_rate)
    report = simulate(plan, topology, cluster, profiles)
    return ScheduleResult(plan, report, evaluated, None)


def _machine_multisets(
    size: int, m: int, current: list[int], caps: list[int]
) -> Iterator[tuple[int, ...]]:
    """Nondecreasing machine tuples of a given size honoring residual caps.

    Enumerated in lexicographic order so the caller's first-best tie-break
    yields the lexicographically smallest assignment.
    """
    room = [caps[w] - current[w] for w in range(m)]

    def walk(prefix: tuple[int, ...], start: int, left: int, used: list[int]) -> Iterator[tuple[int, ...]]:
        if left == 0:
            yield prefix
            return
        for w in range(start, m):
            if used[w] < room[w]:
                used[w] += 1
                yield from walk(prefix + (w,), w, left - 1, used)
                used[w] -= 1

    yield from walk((), 0, size, [0] * m)
