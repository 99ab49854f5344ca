"""Reading and writing the toolkit's JSON documents and CSV reports.

Field names are fixed by FORMATS.md at the repository root. Loaders
raise SchemaError naming the offending field; structural problems in the
loaded objects surface as the model's own validation errors.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Mapping

from .errors import DanglingEdge, IncompleteTable, SchemaError
from .model import (
    Cluster,
    ComponentSpec,
    ExecutionPlan,
    MachineType,
    ProfileEntry,
    ProfileTable,
    UserTopology,
)
from .simulate import ComparisonTable, SimulationReport

SECONDS_PER_TUPLE = "seconds_per_tuple"
CAPACITY_UNITS = "capacity_units"

#: Conversion anchor: slopes in capacity units assume this budget.
CONVERSION_CAPACITY = 100.0


def _read_json(path: str | Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def _write_json(doc: Any, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def _require(doc: Mapping[str, Any], field: str, context: str) -> Any:
    if field not in doc:
        raise SchemaError(f"{context}: missing field {field!r}")
    return doc[field]


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

def topology_from_dict(doc: Mapping[str, Any]) -> UserTopology:
    raw = _require(doc, "components", "topology")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("topology: 'components' must be a non-empty list")
    names = []
    for i, c in enumerate(raw):
        names.append(str(_require(c, "name", f"component #{i}")))
    if len(set(names)) != len(names):
        raise SchemaError("topology: component names must be unique")
    index = {name: i for i, name in enumerate(names)}

    components = []
    for i, c in enumerate(raw):
        context = f"component {names[i]!r}"
        kind = str(_require(c, "kind", context))
        key = str(_require(c, "profile", context))
        try:
            ratio = float(_require(c, "output_ratio", context))
        except (TypeError, ValueError):
            raise SchemaError(f"{context}: 'output_ratio' must be a number") from None
        downstream = []
        for d in c.get("downstream", []):
            if d not in index:
                raise DanglingEdge(f"{context} feeds unknown component {d!r}")
            downstream.append(index[d])
        try:
            components.append(
                ComponentSpec(
                    component_id=i,
                    name=names[i],
                    kind=kind,
                    profile_key=key,
                    output_ratio=ratio,
                    downstream=tuple(downstream),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{context}: {exc}") from None
    return UserTopology(tuple(components), name=str(doc.get("name", "topology")))


def topology_to_dict(topology: UserTopology) -> dict[str, Any]:
    return {
        "name": topology.name,
        "components": [
            {
                "name": c.name,
                "kind": c.kind,
                "profile": c.profile_key,
                "output_ratio": c.output_ratio,
                "downstream": [topology.components[d].name for d in c.downstream],
            }
            for c in topology.components
        ],
    }


def load_topology(path: str | Path) -> UserTopology:
    return topology_from_dict(_read_json(path))


def save_topology(topology: UserTopology, path: str | Path) -> None:
    _write_json(topology_to_dict(topology), path)


# ---------------------------------------------------------------------------
# Cluster
# ---------------------------------------------------------------------------

def cluster_from_dict(doc: Mapping[str, Any]) -> Cluster:
    raw_types = _require(doc, "types", "cluster")
    types = []
    for i, t in enumerate(raw_types):
        context = f"machine type #{i}"
        try:
            types.append(
                MachineType(
                    type_id=str(_require(t, "id", context)),
                    label=str(t.get("label", "")),
                    cores=int(t.get("cores", 1)),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{context}: {exc}") from None
    machines = _require(doc, "machines", "cluster")
    if not isinstance(machines, list):
        raise SchemaError("cluster: 'machines' must be a list of type ids")
    try:
        return Cluster(
            types=tuple(types),
            machines=tuple(str(m) for m in machines),
            capacity=float(doc.get("capacity", 100.0)),
            name=str(doc.get("name", "cluster")),
        )
    except ValueError as exc:
        raise SchemaError(f"cluster: {exc}") from None


def cluster_to_dict(cluster: Cluster) -> dict[str, Any]:
    return {
        "name": cluster.name,
        "capacity": cluster.capacity,
        "types": [
            {"id": t.type_id, "label": t.label, "cores": t.cores}
            for t in cluster.types
        ],
        "machines": list(cluster.machines),
    }


def load_cluster(path: str | Path) -> Cluster:
    return cluster_from_dict(_read_json(path))


def save_cluster(cluster: Cluster, path: str | Path) -> None:
    _write_json(cluster_to_dict(cluster), path)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def profiles_from_dict(
    doc: Mapping[str, Any], cores: Mapping[str, int] | None = None
) -> ProfileTable:
    units = str(doc.get("units", CAPACITY_UNITS))
    if units not in (CAPACITY_UNITS, SECONDS_PER_TUPLE):
        raise SchemaError(
            f"profiles: 'units' must be {CAPACITY_UNITS!r} or {SECONDS_PER_TUPLE!r}, "
            f"got {units!r}"
        )
    file_cores = {str(k): int(v) for k, v in doc.get("cores", {}).items()}
    effective_cores = dict(file_cores)
    if cores:
        effective_cores.update({str(k): int(v) for k, v in cores.items()})
    for type_id, c in effective_cores.items():
        if c < 1:
            raise SchemaError(f"profiles: cores for type {type_id!r} must be >= 1")

    entries: dict[tuple[str, str], ProfileEntry] = {}
    for i, e in enumerate(_require(doc, "entries", "profiles")):
        context = f"profile entry #{i}"
        key = str(_require(e, "profile", context))
        type_id = str(_require(e, "type", context))
        try:
            slope = float(_require(e, "slope", context))
            overhead = float(e.get("overhead", 0.0))
        except (TypeError, ValueError):
            raise SchemaError(f"{context}: 'slope'/'overhead' must be numbers") from None
        if units == SECONDS_PER_TUPLE:
            slope = slope * CONVERSION_CAPACITY / effective_cores.get(type_id, 1)
        if (key, type_id) in entries:
            raise SchemaError(f"{context}: duplicate entry for ({key!r}, {type_id!r})")
        try:
            entries[(key, type_id)] = ProfileEntry(slope=slope, overhead=overhead)
        except ValueError as exc:
            raise SchemaError(f"{context}: {exc}") from None
    if not entries:
        raise SchemaError("profiles: 'entries' is empty")
    return ProfileTable(entries)


def profiles_to_dict(
    table: ProfileTable, header: Mapping[str, Any] | None = None
) -> dict[str, Any]:
    doc: dict[str, Any] = {"units": CAPACITY_UNITS}
    if header:
        doc.update(header)
    doc["units"] = CAPACITY_UNITS  # slopes are stored converted
    doc["entries"] = [
        {
            "profile": key,
            "type": type_id,
            "slope": entry.slope,
            "overhead": entry.overhead,
        }
        for (key, type_id), entry in sorted(table.entries.items())
    ]
    return doc


def load_profiles(
    path: str | Path, cores: Mapping[str, int] | None = None
) -> ProfileTable:
    return profiles_from_dict(_read_json(path), cores)


def save_profiles(
    table: ProfileTable, path: str | Path, header: Mapping[str, Any] | None = None
) -> None:
    _write_json(profiles_to_dict(table, header), path)


def convert_raw_profiles(
    doc: Mapping[str, Any], cores: Mapping[str, int] | None = None
) -> dict[str, Any]:
    """Turn a seconds-per-tuple table into a capacity-unit profile document.

    The raw table must be complete: every profile key must have an entry
    for every machine type that appears anywhere in the table. The output
    records the conversion (cores per type and the capacity anchor) in
    its header.
    """
    units = str(doc.get("units", SECONDS_PER_TUPLE))
    if units != SECONDS_PER_TUPLE:
        raise SchemaError(
            f"raw profile table must declare units {SECONDS_PER_TUPLE!r}, got {units!r}"
        )
    raw_entries = _require(doc, "entries", "raw profiles")
    keys = sorted({str(_require(e, "profile", "raw entry")) for e in raw_entries})
    types = sorted({str(_require(e, "type", "raw entry")) for e in raw_entries})
    seen = {(str(e["profile"]), str(e["type"])) for e in raw_entries}
    for key in keys:
        for type_id in types:
            if (key, type_id) not in seen:
                raise IncompleteTable(
                    f"raw table lacks an entry for ({key!r}, {type_id!r})"
                )
    table = profiles_from_dict(doc, cores)
    effective = {t: 1 for t in types}
    effective.update({str(k): int(v) for k, v in doc.get("cores", {}).items()})
    if cores:
        effective.update({str(k): int(v) for k, v in cores.items()})
    header = {
        "converted_from": SECONDS_PER_TUPLE,
        "conversion": f"slope = seconds_per_tuple * {CONVERSION_CAPACITY:g} / cores",
        "cores": {t: effective[t] for t in types},
    }
    if "note" in doc:
        header["note"] = doc["note"]
    return profiles_to_dict(table, header)


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

def plan_from_dict(doc: Mapping[str, Any], topology: UserTopology) -> ExecutionPlan:
    raw_counts = _require(doc, "instance_counts", "plan")
    counts = []
    for c in topology.components:
        if c.name not in raw_counts:
            raise SchemaError(f"plan: missing instance count for component {c.name!r}")
        counts.append(int(raw_counts[c.name]))
    extra = set(raw_counts) - {c.name for c in topology.components}
    if extra:
        raise SchemaError(f"plan: instance counts for unknown components {sorted(extra)}")
    assignment = _require(doc, "assignment", "plan")
    try:
        return ExecutionPlan(
            instance_counts=tuple(counts),
            assignment=tuple(int(w) for w in assignment),
            input_rate=float(_require(doc, "input_rate", "plan")),
        )
    except ValueError as exc:
        raise SchemaError(f"plan: {exc}") from None


def plan_to_dict(plan: ExecutionPlan, topology: UserTopology) -> dict[str, Any]:
    return {
        "input_rate": plan.input_rate,
        "instance_counts": {
            topology.components[j].name: plan.instance_counts[j]
            for j in range(len(topology))
        },
        "assignment": list(plan.assignment),
    }


def load_plan(path: str | Path, topology: UserTopology) -> ExecutionPlan:
    return plan_from_dict(_read_json(path), topology)


def save_plan(plan: ExecutionPlan, topology: UserTopology, path: str | Path) -> None:
    _write_json(plan_to_dict(plan, topology), path)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def report_to_dict(report: SimulationReport) -> dict[str, Any]:
    return {
        "input_rate": report.input_rate,
        "overall_throughput": report.overall_throughput,
        "feasible": report.feasible,
        "weighted_utilization": report.weighted_utilization,
        "weighted_utilization_normalized": report.weighted_utilization_normalized,
        "machines": [
            {
                "machine": m.machine_id,
                "type": m.type_id,
                "used": m.used,
                "headroom": m.headroom,
                "tasks": list(m.tasks),
            }
            for m in report.per_machine
        ],
        "tasks": [
            {
                "task": t.task_id,
                "component": t.component,
                "machine": t.machine_id,
                "input_rate": t.input_rate,
                "output_rate": t.output_rate,
                "processing_rate": t.processing_rate,
                "load": t.load,
            }
            for t in report.per_task
        ],
    }


REPORT_CSV_HEADER = [
    "record",
    "id",
    "component",
    "type",
    "machine",
    "input_rate",
    "output_rate",
    "processing_rate",
    "load",
    "used",
    "headroom",
    "overall_throughput",
    "weighted_utilization",
    "feasible",
]


def report_to_csv(report: SimulationReport) -> str:
    """Flat CSV: one summary row, one row per machine, one per task."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    writer.writerow(
        [
            "summary", "", "", "", "",
            _num(report.input_rate), "", "", "", "", "",
            _num(report.overall_throughput),
            _num(report.weighted_utilization),
            str(report.feasible).lower(),
        ]
    )
    for m in report.per_machine:
        writer.writerow(
            [
                "machine", m.machine_id, "", m.type_id, "", "", "", "", "",
                _num(m.used), _num(m.headroom), "", "", "",
            ]
        )
    for t in report.per_task:
        writer.writerow(
            [
                "task", t.task_id, t.component, "", t.machine_id,
                _num(t.input_rate), _num(t.output_rate),
                _num(t.processing_rate), _num(t.load), "", "", "", "", "",
            ]
        )
    return buf.getvalue()


def comparison_to_dict(table: ComparisonTable) -> dict[str, Any]:
    return {
        "rows": [
            {
                "label": r.label,
                "input_rate": r.input_rate,
                "throughput": r.throughput,
                "weighted_utilization": r.weighted_utilization,
                "feasible": r.feasible,
                "machine_used": list(r.machine_used),
            }
            for r in table.rows
        ],
        "pairs": [
            {
                "first": p.first,
                "second": p.second,
                "throughput_delta": p.throughput_delta,
                "utilization_delta": p.utilization_delta,
                "gain_ratio": p.gain_ratio if p.gain_ratio is not None else "n/a",
            }
            for p in table.pairs
        ],
    }


def comparison_to_csv(table: ComparisonTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["record", "label", "versus", "input_rate", "throughput",
         "weighted_utilization", "feasible", "throughput_delta",
         "utilization_delta", "gain_ratio"]
    )
    for r in table.rows:
        writer.writerow(
            ["plan", r.label, "", _num(r.input_rate), _num(r.throughput),
             _num(r.weighted_utilization), str(r.feasible).lower(), "", "", ""]
        )
    for p in table.pairs:
        writer.writerow(
            ["pair", p.first, p.second, "", "", "", "",
             _num(p.throughput_delta) if p.throughput_delta is not None else "n/a",
             _num(p.utilization_delta) if p.utilization_delta is not None else "n/a",
             _num(p.gain_ratio) if p.gain_ratio is not None else "n/a"]
        )
    return buf.getvalue()


def _num(x: float) -> str:
    return format(x, ".10g")
