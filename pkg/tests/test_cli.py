"""Command-line surface: subcommands, exit codes, reproducibility."""

from __future__ import annotations

import inspect
import json

import pytest

import hetsched.errors as errors_module
from hetsched import datasets
from hetsched.cli import EXIT_CODES, exit_code_for, main
from hetsched.errors import HetschedError


@pytest.fixture
def bundled(tmp_path):
    paths = {
        "topology": datasets.data_path("topology_linear.json"),
        "cluster": datasets.data_path("cluster_bench.json"),
        "profiles": datasets.data_path("profiles_micro.json"),
    }
    return paths, tmp_path


def run(argv):
    return main([str(a) for a in argv])


def test_schedule_proposed_writes_feasible_plan(bundled):
    paths, tmp = bundled
    out = tmp / "plan.json"
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "proposed", "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["algorithm"] == "proposed"
    assert doc["report"]["feasible"] is True
    assert all(m["headroom"] >= -1e-9 for m in doc["report"]["machines"])
    assert all(c >= 1 for c in doc["plan"]["instance_counts"].values())


def test_schedule_csv_format(bundled):
    paths, tmp = bundled
    out = tmp / "plan.csv"
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--format", "csv", "--out", out]
    )
    assert code == 0
    assert out.read_text().startswith("record,")


def test_schedule_optimal_small_budget(bundled):
    paths, tmp = bundled
    out = tmp / "opt.json"
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "optimal", "--budget", "2",
         "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["feasible"] is True


def test_schedule_optimal_cost_cap_exit_code(bundled):
    paths, tmp = bundled
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "optimal", "--budget", "4",
         "--cost-cap", "10", "--out", tmp / "x.json"]
    )
    assert code == EXIT_CODES[errors_module.SearchSpaceTooLarge]


def test_schedule_optimal_requires_budget(bundled):
    paths, tmp = bundled
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "optimal", "--out", tmp / "x.json"]
    )
    assert code == 3


def test_malformed_profile_file_names_field(bundled, tmp_path, capsys):
    paths, tmp = bundled
    bad = tmp_path / "bad_profiles.json"
    bad.write_text('{"units": "capacity_units", "entries": [{"profile": "x"}]}')
    code = run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", bad, "--out", tmp / "x.json"]
    )
    assert code == EXIT_CODES[errors_module.SchemaError]
    assert "type" in capsys.readouterr().err


def test_simulate_plan_file(bundled):
    paths, tmp = bundled
    plan_out = tmp / "sched.json"
    run(
        ["schedule", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--out", plan_out]
    )
    plan_file = tmp / "plan_only.json"
    plan_file.write_text(json.dumps(json.loads(plan_out.read_text())["plan"]))
    report_out = tmp / "report.json"
    code = run(
        ["simulate", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--plan", plan_file, "--out", report_out]
    )
    assert code == 0
    doc = json.loads(report_out.read_text())
    assert doc["engine"] == "analytic"
    assert doc["report"]["feasible"] is True


def test_simulate_oracle_engine(tmp_path):
    topo = datasets.data_path("topology_chain_a.json")
    cluster = datasets.data_path("cluster_chain.json")
    profiles = datasets.data_path("profiles_chain.json")
    plan_file = tmp_path / "plan.json"
    plan_file.write_text(
        json.dumps(
            {"input_rate": 10.0,
             "instance_counts": {"source": 1, "split": 1, "count": 1},
             "assignment": [0, 1, 2]}
        )
    )
    out = tmp_path / "oracle.json"
    code = run(
        ["simulate", "--topology", topo, "--cluster", cluster, "--profiles", profiles,
         "--plan", plan_file, "--oracle", "--horizon", "20", "--tick", "0.00001",
         "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["engine"] == "oracle"
    assert doc["report"]["overall_throughput"] == pytest.approx(30.0, rel=0.05)


def test_sweep_grid_and_argmax(tmp_path):
    out = tmp_path / "sweep.csv"
    code = run(
        ["sweep", "--topology", datasets.data_path("topology_chain_a.json"),
         "--cluster", datasets.data_path("cluster_chain.json"),
         "--profiles", datasets.data_path("profiles_chain.json"),
         "--range", "split=1..6", "--range", "count=1..6", "--out", out]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "split,count,input_rate,throughput,best"
    assert len(lines) == 37
    assert sum(1 for line in lines[1:] if line.endswith("*")) == 1


def test_sweep_single_cell(tmp_path):
    out = tmp_path / "sweep.csv"
    code = run(
        ["sweep", "--topology", datasets.data_path("topology_chain_a.json"),
         "--cluster", datasets.data_path("cluster_chain.json"),
         "--profiles", datasets.data_path("profiles_chain.json"),
         "--range", "split=2..2", "--out", out]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 2
    assert lines[1].endswith("*")


def test_sweep_unknown_component(tmp_path):
    code = run(
        ["sweep", "--topology", datasets.data_path("topology_chain_a.json"),
         "--cluster", datasets.data_path("cluster_chain.json"),
         "--profiles", datasets.data_path("profiles_chain.json"),
         "--range", "ghost=1..3", "--out", tmp_path / "x.csv"]
    )
    assert code == EXIT_CODES[errors_module.SchemaError]


def test_sweep_empty_range(tmp_path):
    code = run(
        ["sweep", "--topology", datasets.data_path("topology_chain_a.json"),
         "--cluster", datasets.data_path("cluster_chain.json"),
         "--profiles", datasets.data_path("profiles_chain.json"),
         "--range", "split=5..4", "--out", tmp_path / "x.csv"]
    )
    assert code == EXIT_CODES[errors_module.RangeEmpty]


def test_compare_two_algorithms(bundled):
    paths, tmp = bundled
    out = tmp / "cmp.json"
    code = run(
        ["compare", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "proposed", "--algo", "roundrobin",
         "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert [r["label"] for r in doc["rows"]] == ["proposed", "roundrobin"]
    assert len(doc["pairs"]) == 1
    assert doc["pairs"][0]["gain_ratio"] != 0


def test_compare_on_small_scenario_cluster(tmp_path):
    out = tmp_path / "cmp.json"
    code = run(
        ["compare", "--topology", datasets.data_path("topology_linear.json"),
         "--cluster", datasets.data_path("cluster_scenario1.json"),
         "--profiles", datasets.data_path("profiles_micro.json"),
         "--algo", "proposed", "--algo", "roundrobin", "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert "gain_ratio" in doc["pairs"][0]


def test_compare_single_algorithm_is_usage_error(bundled):
    paths, tmp = bundled
    code = run(
        ["compare", "--topology", paths["topology"], "--cluster", paths["cluster"],
         "--profiles", paths["profiles"], "--algo", "proposed", "--out", tmp / "x.json"]
    )
    assert code == 3


def test_compare_three_way_includes_optimal(tmp_path):
    out = tmp_path / "cmp.json"
    code = run(
        ["compare", "--topology", datasets.data_path("topology_chain_a.json"),
         "--cluster", datasets.data_path("cluster_chain.json"),
         "--profiles", datasets.data_path("profiles_chain.json"),
         "--algo", "proposed", "--algo", "roundrobin", "--algo", "optimal",
         "--budget", "3", "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 3
    assert len(doc["pairs"]) == 3
    thr = {r["label"]: r["throughput"] for r in doc["rows"]}
    assert thr["optimal"] >= thr["roundrobin"] - 1e-9


def test_import_profiles_round_trip(tmp_path):
    out = tmp_path / "imported.json"
    code = run(
        ["import-profiles", "--raw", datasets.data_path("profiles_raw_seconds.json"),
         "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["units"] == "capacity_units"
    assert doc["converted_from"] == "seconds_per_tuple"
    from hetsched import files

    imported = files.load_profiles(out)
    bundled_table = datasets.profiles("micro")
    assert set(imported.entries) == set(bundled_table.entries)
    for key in imported.entries:
        assert imported.entries[key].slope == pytest.approx(
            bundled_table.entries[key].slope, abs=1e-12
        )


def test_import_profiles_cores_flag(tmp_path):
    out = tmp_path / "imported.json"
    code = run(
        ["import-profiles", "--raw", datasets.data_path("profiles_raw_seconds.json"),
         "--cores", "pentium=2", "--out", out]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    slopes = {(e["profile"], e["type"]): e["slope"] for e in doc["entries"]}
    assert slopes[("lowCompute", "pentium")] == pytest.approx(2.905)
    assert slopes[("lowCompute", "i3")] == pytest.approx(10.7)


def test_import_profiles_bad_cores_value(tmp_path):
    code = run(
        ["import-profiles", "--raw", datasets.data_path("profiles_raw_seconds.json"),
         "--cores", "pentium=0", "--out", tmp_path / "x.json"]
    )
    assert code == EXIT_CODES[errors_module.SchemaError]


# ---------------------------------------------------------------------------
# reproducibility and exit-code coverage
# ---------------------------------------------------------------------------

def test_outputs_are_byte_identical_across_runs(bundled):
    paths, tmp = bundled
    commands = {
        "schedule.json": ["schedule", "--topology", paths["topology"],
                          "--cluster", paths["cluster"], "--profiles", paths["profiles"]],
        "compare.json": ["compare", "--topology", paths["topology"],
                         "--cluster", paths["cluster"], "--profiles", paths["profiles"],
                         "--algo", "proposed", "--algo", "roundrobin"],
    }
    for name, argv in commands.items():
        first = tmp / f"a_{name}"
        second = tmp / f"b_{name}"
        assert run(argv + ["--out", first]) == 0
        assert run(argv + ["--out", second]) == 0
        assert first.read_bytes() == second.read_bytes()


def test_exit_code_table_covers_every_error_variant():
    concrete = []
    for _, obj in inspect.getmembers(errors_module, inspect.isclass):
        if not issubclass(obj, HetschedError):
            continue
        if obj.__module__ != errors_module.__name__:
            continue
        subclasses = [
            s for _, s in inspect.getmembers(errors_module, inspect.isclass)
            if s is not obj and issubclass(s, obj)
        ]
        if not subclasses:  # leaf variants only; bases are categories
            concrete.append(obj)
    assert concrete
    for klass in concrete:
        assert klass in EXIT_CODES, f"no exit code for {klass.__name__}"
    codes = [EXIT_CODES[k] for k in concrete]
    assert len(set(codes)) == len(codes), "exit codes must be distinct"
    for klass in concrete:
        err = klass.__new__(klass)
        assert exit_code_for(err) == EXIT_CODES[klass]
