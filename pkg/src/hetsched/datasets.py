"""Access to the bundled benchmark scenarios.

The package ships the three classic topology shapes (linear, diamond,
star), the three-box heterogeneous worker cluster they were measured on,
the matching profiling table, three scaled cluster scenarios, and two
synthetic two-stage chains used for parallelism sweeps.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .files import load_cluster, load_profiles, load_topology
from .model import Cluster, ProfileTable, UserTopology

TOPOLOGIES = {
    "linear": "topology_linear.json",
    "diamond": "topology_diamond.json",
    "star": "topology_star.json",
    "chain-a": "topology_chain_a.json",
    "chain-b": "topology_chain_b.json",
}

CLUSTERS = {
    "bench": "cluster_bench.json",
    "scenario1": "cluster_scenario1.json",
    "scenario2": "cluster_scenario2.json",
    "scenario3": "cluster_scenario3.json",
    "chain": "cluster_chain.json",
}

PROFILES = {
    "micro": "profiles_micro.json",
    "micro-raw": "profiles_raw_seconds.json",
    "chain": "profiles_chain.json",
}


def data_path(filename: str) -> Path:
    path = resources.files("hetsched.data").joinpath(filename)
    return Path(str(path))


def topology(name: str) -> UserTopology:
    return load_topology(data_path(TOPOLOGIES[name]))


def cluster(name: str) -> Cluster:
    return load_cluster(data_path(CLUSTERS[name]))


def profiles(name: str) -> ProfileTable:
    return load_profiles(data_path(PROFILES[name]))
