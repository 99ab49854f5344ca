"""Core domain types: topology, cluster, profiling data, execution plans.

All types are immutable after construction and safe to share across
threads. Validation happens eagerly: constructing an inconsistent value
raises instead of producing a half-usable object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import (
    CycleDetected,
    DanglingEdge,
    MissingProfileEntry,
    NoBolt,
    NoSpout,
    OrdinalOutOfRange,
    SpoutUpstreamEdge,
    UnreachableBolt,
)

SPOUT = "spout"
BOLT = "bolt"

DEFAULT_CAPACITY = 100.0


@dataclass(frozen=True)
class ComponentSpec:
    """One logical operator of a topology.

    ``component_id`` is its dense index (0..n-1). ``profile_key`` selects
    the profiling rows to use; several components may share one key.
    ``output_ratio`` is the average number of output tuples produced per
    input tuple. ``downstream`` lists the component ids this one feeds.
    """

    component_id: int
    name: str
    kind: str
    profile_key: str
    output_ratio: float
    downstream: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (SPOUT, BOLT):
            raise ValueError(f"component {self.name!r}: kind must be 'spout' or 'bolt'")
        if self.output_ratio < 0:
            raise ValueError(f"component {self.name!r}: output_ratio must be >= 0")
        if not self.name:
            raise ValueError("component name must be non-empty")

    @property
    def is_spout(self) -> bool:
        return self.kind == SPOUT


@dataclass(frozen=True)
class UserTopology:
    """The logical operator DAG: one node per component.

    Construction verifies the full invariant set: dense ids, valid edges,
    at least one spout and one bolt, no edges into spouts, acyclicity,
    and reachability of every bolt from some spout.
    """

    components: tuple[ComponentSpec, ...]
    name: str = "topology"

    def __post_init__(self) -> None:
        validate_topology(self)

    @property
    def spout_ids(self) -> tuple[int, ...]:
        return tuple(c.component_id for c in self.components if c.is_spout)

    @property
    def bolt_ids(self) -> tuple[int, ...]:
        return tuple(c.component_id for c in self.components if not c.is_spout)

    def __len__(self) -> int:
        return len(self.components)

    def component_by_name(self, name: str) -> ComponentSpec:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(f"no component named {name!r}")

    def upstream(self, component_id: int) -> tuple[int, ...]:
        return tuple(
            c.component_id for c in self.components if component_id in c.downstream
        )

    def topological_order(self) -> tuple[int, ...]:
        """Component ids ordered so every edge goes forward."""
        indeg = [0] * len(self.components)
        for c in self.components:
            for d in c.downstream:
                indeg[d] += 1
        ready = sorted(i for i, d in enumerate(indeg) if d == 0)
        order: list[int] = []
        while ready:
            i = ready.pop(0)
            order.append(i)
            for d in self.components[i].downstream:
                indeg[d] -= 1
                if indeg[d] == 0:
                    # insertion keeps the ready list sorted for determinism
                    lo = 0
                    while lo < len(ready) and ready[lo] < d:
                        lo += 1
                    ready.insert(lo, d)
        return tuple(order)

    def distinct_profile_keys(self) -> tuple[str, ...]:
        """Profile keys in order of first appearance by component id."""
        seen: list[str] = []
        for c in self.components:
            if c.profile_key not in seen:
                seen.append(c.profile_key)
        return tuple(seen)


def validate_topology(topology: UserTopology) -> None:
    """Check every structural invariant, raising the first violation found.

    Raises NoSpout, NoBolt, DanglingEdge, SpoutUpstreamEdge, CycleDetected
    or UnreachableBolt; the message names the offending component.
    """
    comps = topology.components
    n = len(comps)
    for i, c in enumerate(comps):
        if c.component_id != i:
            raise ValueError(
                f"component ids must be dense 0..{n - 1}; "
                f"position {i} holds id {c.component_id}"
            )
    spouts = [c for c in comps if c.is_spout]
    bolts = [c for c in comps if not c.is_spout]
    if not spouts:
        raise NoSpout("topology has no spout")
    if not bolts:
        raise NoBolt("topology has no bolt")

    for c in comps:
        for d in c.downstream:
            if not 0 <= d < n:
                raise DanglingEdge(
                    f"component {c.name!r} lists downstream id {d}, "
                    f"but ids range over 0..{n - 1}"
                )
            if d == c.component_id:
                raise CycleDetected(f"component {c.name!r} feeds itself")
            if comps[d].is_spout:
                raise SpoutUpstreamEdge(
                    f"component {c.name!r} feeds spout {comps[d].name!r}; "
                    f"spouts cannot have upstream edges"
                )

    # Kahn's algorithm: leftovers after peeling indicate a cycle.
    indeg = [0] * n
    for c in comps:
        for d in c.downstream:
            indeg[d] += 1
    ready = [i for i, d in enumerate(indeg) if d == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for d in comps[i].downstream:
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
    if seen != n:
        stuck = [comps[i].name for i, d in enumerate(indeg) if d > 0]
        raise CycleDetected(f"cycle through components {stuck}")

    reachable = set(c.component_id for c in spouts)
    frontier = list(reachable)
    while frontier:
        i = frontier.pop()
        for d in comps[i].downstream:
            if d not in reachable:
                reachable.add(d)
                frontier.append(d)
    for c in bolts:
        if c.component_id not in reachable:
            raise UnreachableBolt(f"bolt {c.name!r} is not reachable from any spout")


@dataclass(frozen=True)
class MachineType:
    """One hardware class present in the cluster."""

    type_id: str
    label: str = ""
    cores: int = 1

    def __post_init__(self) -> None:
        if not self.type_id:
            raise ValueError("type_id must be non-empty")
        if self.cores < 1:
            raise ValueError(f"type {self.type_id!r}: cores must be >= 1")


@dataclass(frozen=True)
class Cluster:
    """Machine inventory. ``machines[i]`` is the type id of machine i.

    Every machine shares one capacity budget; heterogeneity lives in the
    per-type profiling slopes, not in the budget.
    """

    types: tuple[MachineType, ...]
    machines: tuple[str, ...]
    capacity: float = DEFAULT_CAPACITY
    name: str = "cluster"

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ValueError("capacity must be > 0")
        ids = [t.type_id for t in self.types]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate machine type ids in {ids}")
        known = set(ids)
        for m, t in enumerate(self.machines):
            if t not in known:
                raise ValueError(f"machine {m} has unknown type {t!r}")
        if not self.machines:
            raise ValueError("cluster has no machines")

    def __len__(self) -> int:
        return len(self.machines)

    def type_of(self, machine_id: int) -> str:
        return self.machines[machine_id]

    def machine_type(self, type_id: str) -> MachineType:
        for t in self.types:
            if t.type_id == type_id:
                return t
        raise KeyError(f"no machine type {type_id!r}")

    def machines_of_type(self, type_id: str) -> tuple[int, ...]:
        return tuple(m for m, t in enumerate(self.machines) if t == type_id)

    def present_types(self) -> tuple[str, ...]:
        """Type ids with at least one machine, in registry order."""
        present = set(self.machines)
        return tuple(t.type_id for t in self.types if t.type_id in present)


@dataclass(frozen=True)
class ProfileEntry:
    """Measured cost of one task of a profile key on one machine type.

    ``slope`` is capacity units consumed per (tuple/second) of input;
    ``overhead`` is the rate-independent framework cost in capacity units.
    """

    slope: float
    overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.slope <= 0:
            raise ValueError("slope must be > 0")
        if self.overhead < 0:
            raise ValueError("overhead must be >= 0")


@dataclass(frozen=True)
class ProfileTable:
    """Profiling entries keyed by (profile_key, type_id)."""

    entries: Mapping[tuple[str, str], ProfileEntry]

    def entry(self, profile_key: str, type_id: str) -> ProfileEntry:
        try:
            return self.entries[(profile_key, type_id)]
        except KeyError:
            raise MissingProfileEntry(profile_key, type_id) from None

    def check_coverage(self, topology: UserTopology, cluster: Cluster) -> None:
        """Require an entry for every profile key x present machine type."""
        for key in topology.distinct_profile_keys():
            for type_id in cluster.present_types():
                self.entry(key, type_id)

    def profile_keys(self) -> tuple[str, ...]:
        return tuple(sorted({k for k, _ in self.entries}))

    def type_ids(self) -> tuple[str, ...]:
        return tuple(sorted({t for _, t in self.entries}))


def task_index(instance_counts: Sequence[int], component: int, k: int) -> int:
    """Dense zero-based task id of instance ``k`` (1-based) of a component.

    Ids pack instances of component 0 first, then component 1, and so on,
    giving a bijection onto 0..total_tasks-1.
    """
    if not 1 <= k <= instance_counts[component]:
        raise OrdinalOutOfRange(
            f"component {component} has {instance_counts[component]} instances; "
            f"ordinal {k} out of range"
        )
    return sum(instance_counts[:component]) + (k - 1)


@dataclass(frozen=True)
class ExecutionPlan:
    """An execution graph plus its mapping onto machines.

    ``instance_counts[j]`` is the parallelism degree of component j.
    ``assignment[t]`` is the machine running task t, with task ids laid
    out by :func:`task_index`. ``input_rate`` is the topology input rate
    in tuples/second.
    """

    instance_counts: tuple[int, ...]
    assignment: tuple[int, ...]
    input_rate: float

    def __post_init__(self) -> None:
        if any(c < 1 for c in self.instance_counts):
            raise ValueError("every component needs at least one instance")
        if len(self.assignment) != sum(self.instance_counts):
            raise ValueError(
                f"assignment covers {len(self.assignment)} tasks, "
                f"plan defines {sum(self.instance_counts)}"
            )
        if self.input_rate < 0:
            raise ValueError("input_rate must be >= 0")

    @property
    def total_tasks(self) -> int:
        return len(self.assignment)

    def component_of(self, task_id: int) -> int:
        """Inverse of task_index: which component owns a task id."""
        if not 0 <= task_id < self.total_tasks:
            raise OrdinalOutOfRange(f"task {task_id} out of range")
        acc = 0
        for j, c in enumerate(self.instance_counts):
            acc += c
            if task_id < acc:
                return j
        raise AssertionError("unreachable")

    def tasks_of(self, component: int) -> range:
        start = sum(self.instance_counts[:component])
        return range(start, start + self.instance_counts[component])

    def tasks_on(self, machine_id: int) -> tuple[int, ...]:
        return tuple(t for t, m in enumerate(self.assignment) if m == machine_id)

    def with_input_rate(self, rate: float) -> "ExecutionPlan":
        return ExecutionPlan(self.instance_counts, self.assignment, rate)

    def iter_tasks(self) -> Iterator[tuple[int, int, int]]:
        """Yield (task_id, component_id, machine_id) in task order."""
        t = 0
        for j, count in enumerate(self.instance_counts):
            for _ in range(count):
                yield t, j, self.assignment[t]
                t += 1
