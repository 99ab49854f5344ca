"""Input documents: loading, saving, conversion, and schema errors."""

from __future__ import annotations

import json

import pytest

from hetsched import datasets, files
from hetsched.errors import DanglingEdge, IncompleteTable, SchemaError
from hetsched.model import ExecutionPlan


def test_bundled_topologies_load_and_validate():
    for name in datasets.TOPOLOGIES:
        topo = datasets.topology(name)
        assert len(topo.spout_ids) >= 1
        assert len(topo.bolt_ids) >= 1


def test_topology_round_trip(tmp_path):
    for name in ("linear", "diamond", "star"):
        topo = datasets.topology(name)
        out = tmp_path / f"{name}.json"
        files.save_topology(topo, out)
        again = files.load_topology(out)
        assert again == topo


def test_cluster_round_trip(tmp_path):
    for name in datasets.CLUSTERS:
        cluster = datasets.cluster(name)
        out = tmp_path / f"{name}.json"
        files.save_cluster(cluster, out)
        assert files.load_cluster(out) == cluster


def test_profiles_round_trip(tmp_path):
    table = datasets.profiles("micro")
    out = tmp_path / "profiles.json"
    files.save_profiles(table, out)
    again = files.load_profiles(out)
    assert set(again.entries) == set(table.entries)
    for key, entry in table.entries.items():
        assert again.entries[key].slope == pytest.approx(entry.slope, abs=1e-12)
        assert again.entries[key].overhead == pytest.approx(entry.overhead, abs=1e-12)


def test_plan_round_trip(tmp_path):
    topo = datasets.topology("linear")
    plan = ExecutionPlan((1, 2, 1, 3), (0, 1, 2, 0, 1, 2, 0), 12.5)
    out = tmp_path / "plan.json"
    files.save_plan(plan, topo, out)
    assert files.load_plan(out, topo) == plan


# ---------------------------------------------------------------------------
# schema errors name the offending field
# ---------------------------------------------------------------------------

def test_topology_missing_field():
    with pytest.raises(SchemaError, match="kind"):
        files.topology_from_dict(
            {"components": [{"name": "s", "profile": "p", "output_ratio": 1}]}
        )


def test_topology_unknown_downstream_is_dangling():
    doc = {
        "components": [
            {"name": "s", "kind": "spout", "profile": "p", "output_ratio": 1,
             "downstream": ["ghost"]},
            {"name": "b", "kind": "bolt", "profile": "p", "output_ratio": 1},
        ]
    }
    with pytest.raises(DanglingEdge, match="ghost"):
        files.topology_from_dict(doc)


def test_topology_duplicate_names():
    doc = {
        "components": [
            {"name": "x", "kind": "spout", "profile": "p", "output_ratio": 1},
            {"name": "x", "kind": "bolt", "profile": "p", "output_ratio": 1},
        ]
    }
    with pytest.raises(SchemaError, match="unique"):
        files.topology_from_dict(doc)


def test_profiles_bad_units():
    with pytest.raises(SchemaError, match="units"):
        files.profiles_from_dict({"units": "parsecs", "entries": []})


def test_profiles_duplicate_entry():
    doc = {
        "units": "capacity_units",
        "entries": [
            {"profile": "k", "type": "t", "slope": 1.0},
            {"profile": "k", "type": "t", "slope": 2.0},
        ],
    }
    with pytest.raises(SchemaError, match="duplicate"):
        files.profiles_from_dict(doc)


def test_profiles_zero_cores_rejected():
    doc = {
        "units": "seconds_per_tuple",
        "cores": {"t": 0},
        "entries": [{"profile": "k", "type": "t", "slope": 0.1}],
    }
    with pytest.raises(SchemaError, match="cores"):
        files.profiles_from_dict(doc)


def test_cluster_unknown_machine_type():
    doc = {"types": [{"id": "a"}], "machines": ["a", "b"]}
    with pytest.raises(SchemaError, match="unknown type"):
        files.cluster_from_dict(doc)


def test_plan_missing_component_count():
    topo = datasets.topology("linear")
    with pytest.raises(SchemaError, match="missing instance count"):
        files.plan_from_dict(
            {"input_rate": 1.0, "instance_counts": {"source": 1}, "assignment": [0]},
            topo,
        )


# ---------------------------------------------------------------------------
# seconds-per-tuple conversion
# ---------------------------------------------------------------------------

def test_seconds_conversion_at_one_core():
    doc = {
        "units": "seconds_per_tuple",
        "entries": [{"profile": "lowCompute", "type": "m1", "slope": 0.0581}],
    }
    table = files.profiles_from_dict(doc)
    assert table.entry("lowCompute", "m1").slope == pytest.approx(5.81)


def test_seconds_conversion_scales_with_cores():
    doc = {
        "units": "seconds_per_tuple",
        "cores": {"m1": 2},
        "entries": [{"profile": "lowCompute", "type": "m1", "slope": 0.0581}],
    }
    table = files.profiles_from_dict(doc)
    assert table.entry("lowCompute", "m1").slope == pytest.approx(2.905)


def test_explicit_cores_override_file_cores():
    doc = {
        "units": "seconds_per_tuple",
        "cores": {"m1": 1},
        "entries": [{"profile": "k", "type": "m1", "slope": 0.1}],
    }
    table = files.profiles_from_dict(doc, cores={"m1": 4})
    assert table.entry("k", "m1").slope == pytest.approx(2.5)


def test_convert_raw_records_provenance():
    raw = json.loads(datasets.data_path("profiles_raw_seconds.json").read_text())
    converted = files.convert_raw_profiles(raw)
    assert converted["units"] == "capacity_units"
    assert converted["converted_from"] == "seconds_per_tuple"
    assert "conversion" in converted and "cores" in converted
    slopes = {
        (e["profile"], e["type"]): e["slope"] for e in converted["entries"]
    }
    assert slopes[("lowCompute", "pentium")] == pytest.approx(5.81)
    assert slopes[("highCompute", "i3")] == pytest.approx(34.49)


def test_convert_raw_matches_bundled_converted_table():
    raw = json.loads(datasets.data_path("profiles_raw_seconds.json").read_text())
    converted = files.profiles_from_dict(files.convert_raw_profiles(raw))
    bundled = datasets.profiles("micro")
    assert set(converted.entries) == set(bundled.entries)
    for key in bundled.entries:
        assert converted.entries[key].slope == pytest.approx(
            bundled.entries[key].slope, abs=1e-12
        )


def test_convert_raw_incomplete_table():
    doc = {
        "units": "seconds_per_tuple",
        "entries": [
            {"profile": "a", "type": "t1", "slope": 0.1},
            {"profile": "a", "type": "t2", "slope": 0.1},
            {"profile": "b", "type": "t1", "slope": 0.1},
        ],
    }
    with pytest.raises(IncompleteTable, match="'b'.*'t2'"):
        files.convert_raw_profiles(doc)


def test_convert_raw_requires_seconds_units():
    with pytest.raises(SchemaError, match="units"):
        files.convert_raw_profiles({"units": "capacity_units", "entries": []})


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------

def test_report_csv_layout():
    import hetsched

    topo = datasets.topology("linear")
    cluster = datasets.cluster("bench")
    profiles = datasets.profiles("micro")
    plan = hetsched.round_robin_schedule([1, 1, 1, 1], topo, cluster, profiles)
    report = hetsched.simulate(plan, topo, cluster, profiles)
    text = files.report_to_csv(report)
    lines = text.strip().split("\n")
    assert lines[0].startswith("record,")
    kinds = [line.split(",")[0] for line in lines[1:]]
    assert kinds.count("summary") == 1
    assert kinds.count("machine") == len(cluster)
    assert kinds.count("task") == plan.total_tasks
