"""Exception types raised by the scheduling toolkit.

Every error that can surface through the CLI derives from ``HetschedError``
so the command layer can map each variant to a stable exit code.
"""

from __future__ import annotations


class HetschedError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# Topology validation
# ---------------------------------------------------------------------------

class TopologyError(HetschedError):
    """A topology violates a structural invariant."""


class NoSpout(TopologyError):
    pass


class NoBolt(TopologyError):
    pass


class CycleDetected(TopologyError):
    pass


class UnreachableBolt(TopologyError):
    pass


class DanglingEdge(TopologyError):
    pass


class SpoutUpstreamEdge(TopologyError):
    pass


# ---------------------------------------------------------------------------
# Core model lookups
# ---------------------------------------------------------------------------

class OrdinalOutOfRange(HetschedError):
    """Instance ordinal outside 1..N for its component."""


class MissingProfileEntry(HetschedError):
    """No profiling entry for a (profile key, machine type) pair."""

    def __init__(self, profile_key: str, type_id: str):
        super().__init__(f"no profile entry for ({profile_key!r}, {type_id!r})")
        self.profile_key = profile_key
        self.type_id = type_id


# ---------------------------------------------------------------------------
# Rate model
# ---------------------------------------------------------------------------

class InfeasibleAtZeroRate(HetschedError):
    """Fixed per-task overhead alone exceeds a machine's capacity."""

    def __init__(self, machine_id: int, overhead_sum: float, capacity: float):
        super().__init__(
            f"machine {machine_id} needs {overhead_sum:g} capacity units for "
            f"fixed overhead alone (capacity {capacity:g})"
        )
        self.machine_id = machine_id
        self.overhead_sum = overhead_sum
        self.capacity = capacity


# ---------------------------------------------------------------------------
# Schedulers
# ---------------------------------------------------------------------------

class InfeasibleInitialPlan(HetschedError):
    """The one-instance-per-component plan over-utilizes a machine.

    Usually means the initial input rate is too high for the cluster;
    retry with a smaller rate.
    """


class IterationLimitExceeded(HetschedError):
    """Safety bound hit; signals a configuration or units problem."""


class BudgetTooSmall(HetschedError):
    """Task budget cannot give every component one instance."""


class SearchSpaceTooLarge(HetschedError):
    """Exhaustive search would exceed the configured cost cap."""

    def __init__(self, estimated: int, cap: int):
        super().__init__(
            f"exhaustive search would evaluate about {estimated} placements "
            f"(cap {cap}); raise the cap or shrink the instance"
        )
        self.estimated = estimated
        self.cap = cap


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

class TickTooCoarse(HetschedError):
    """Simulation tick too large relative to per-tuple cost or horizon."""


# ---------------------------------------------------------------------------
# File ingestion / CLI
# ---------------------------------------------------------------------------

class SchemaError(HetschedError):
    """An input document is malformed; the message names the field."""


class IncompleteTable(HetschedError):
    """A raw profiling table is missing (profile key, type) cells."""


class RangeEmpty(HetschedError):
    """A sweep range contains no values."""
