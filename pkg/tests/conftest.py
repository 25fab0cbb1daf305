import json
import os

import pytest

from gridheal.cdf import load_network
from gridheal.model import PQ, PV, SLACK, Branch, Bus, build_network

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "gridheal", "data")
FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def data_path(name: str) -> str:
    return os.path.abspath(os.path.join(DATA_DIR, f"{name}.cdf"))


@pytest.fixture(scope="session")
def ieee14():
    return load_network(data_path("ieee14"))


@pytest.fixture(scope="session")
def ieee30():
    return load_network(data_path("ieee30"))


@pytest.fixture(scope="session")
def ieee57():
    return load_network(data_path("ieee57"))


@pytest.fixture(scope="session")
def ieee118():
    return load_network(data_path("ieee118"))


@pytest.fixture(scope="session")
def tree_oracle():
    with open(os.path.join(FIXTURES, "ieee14_tree_oracle.json")) as fh:
        return json.load(fh)


def triangle(r=(0.01, 0.02, 0.03), load=(10.0, 5.0)) -> "Network":
    """Three buses in a cycle; branch ids 1..3 with increasing resistance."""
    buses = [
        Bus(id=1, kind=SLACK, v_setpoint=1.0),
        Bus(id=2, kind=PQ, load_p=load[0], load_q=load[0] / 3),
        Bus(id=3, kind=PQ, load_p=load[1], load_q=load[1] / 3),
    ]
    branches = [
        Branch(id=1, from_bus=1, to_bus=2, resistance=r[0], reactance=2 * r[0]),
        Branch(id=2, from_bus=2, to_bus=3, resistance=r[1], reactance=2 * r[1]),
        Branch(id=3, from_bus=1, to_bus=3, resistance=r[2], reactance=2 * r[2]),
    ]
    return build_network(buses, branches, 100.0)


def ring4(load=3.0):
    """Four buses in a ring, uniform branches, symmetric loads."""
    buses = [Bus(id=1, kind=SLACK)] + [
        Bus(id=i, kind=PQ, load_p=load, load_q=load / 4) for i in (2, 3, 4)
    ]
    branches = [
        Branch(id=i, from_bus=a, to_bus=b, resistance=0.01, reactance=0.03)
        for i, (a, b) in enumerate([(1, 2), (2, 3), (3, 4), (4, 1)], start=1)
    ]
    return build_network(buses, branches, 100.0)


def path4():
    """Four buses in a line (a tree: exactly one radial topology)."""
    buses = [Bus(id=1, kind=SLACK)] + [Bus(id=i, kind=PQ, load_p=1.0) for i in (2, 3, 4)]
    branches = [
        Branch(id=i, from_bus=i, to_bus=i + 1, resistance=0.01, reactance=0.02)
        for i in (1, 2, 3)
    ]
    return build_network(buses, branches, 100.0)


@pytest.fixture
def tri():
    return triangle()


@pytest.fixture
def ring():
    return ring4()
