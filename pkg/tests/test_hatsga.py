"""Reconfiguration-search tests.

The 14-bus optimality checks compare against a frozen fixture produced by
exhaustively enumerating all 3909 spanning trees and power-flowing each one
(tests/fixtures/ieee14_tree_oracle.json); small constructed networks are
enumerated live with networkx as an in-test oracle.
"""

import math

import networkx as nx
import pytest

from gridheal.errors import (
    DisconnectedGraph,
    LedgerConsistencyError,
    NotConverged,
    SlackFailed,
)
from gridheal.hatsga import (
    HatsgaParams,
    TabuLedger,
    apply_fault,
    elite_subset,
    initial_topology,
    rank_candidates,
    reconfigure,
)
from gridheal.model import (
    PQ,
    SLACK,
    Branch,
    Bus,
    Topology,
    build_network,
    is_radial,
)
from gridheal.powerflow import quality, solve

from conftest import ring4, triangle


def enumerate_best(net, quality_limit=0.05):
    """In-test oracle: brute force every spanning tree via power flow."""
    g = nx.MultiGraph()
    for br in net.branches:
        g.add_edge(br.from_bus, br.to_bus, key=br.id)
    all_ids = {br.id for br in net.branches}
    best = (math.inf, None)
    trees = 0
    for tree in nx.SpanningTreeIterator(g):
        trees += 1
        keep = {k for _, _, k in tree.edges(keys=True)}
        topo = Topology(all_ids - keep)
        sol = solve(net, topo)
        if not sol.converged:
            continue
        if quality(net, sol, quality_limit).violation_count:
            continue
        if sol.loss_total < best[0]:
            best = (sol.loss_total, topo)
    return best, trees


# --- TabuLedger ---

def test_ledger_records_once():
    ledger = TabuLedger()
    ledger.record((1, 2), 5.0)
    ledger.record((1, 2), 5.0)
    assert len(ledger) == 1
    assert (1, 2) in ledger


def test_ledger_rejects_contradiction():
    ledger = TabuLedger(tol=1e-6)
    ledger.record((1, 2), 5.0)
    with pytest.raises(LedgerConsistencyError):
        ledger.record((1, 2), 6.0)


def test_ledger_accepts_infinite_reconfirmation():
    ledger = TabuLedger()
    ledger.record((3,), math.inf)
    ledger.record((3,), math.inf)
    assert len(ledger) == 1


# --- params ---

def test_params_validation():
    with pytest.raises(ValueError):
        HatsgaParams(elite_fraction=0.0)
    with pytest.raises(ValueError):
        HatsgaParams(elite_fraction=1.5)
    with pytest.raises(ValueError):
        HatsgaParams(max_passes=0)


# --- initial topology ---

def test_initial_topology_triangle(tri):
    topo, loss = initial_topology(tri)
    assert topo.open_switches == (3,)
    assert math.isfinite(loss) and loss > 0


def test_initial_topology_ieee14(ieee14):
    topo, loss = initial_topology(ieee14)
    assert is_radial(ieee14, topo)
    assert len(topo.open_switches) == 7
    assert math.isfinite(loss)


def test_initial_topology_disconnected():
    net = build_network(
        [Bus(id=1, kind=SLACK), Bus(id=2, kind=PQ), Bus(id=3, kind=PQ, load_p=1.0)],
        [Branch(id=1, from_bus=1, to_bus=2, resistance=0.01, reactance=0.02)],
        require_connected=False,
    )
    with pytest.raises(DisconnectedGraph):
        initial_topology(net)


def test_initial_topology_infeasible_load():
    net = build_network(
        [Bus(id=1, kind=SLACK), Bus(id=2, kind=PQ, load_p=5000.0, load_q=2500.0)],
        [Branch(id=1, from_bus=1, to_bus=2, resistance=0.05, reactance=0.2)],
    )
    with pytest.raises(NotConverged):
        initial_topology(net)


# --- candidate ranking and elitism ---

def test_rank_single_open_switch(tri):
    sol = solve(tri, Topology([3]))
    assert rank_candidates(tri, Topology([3]), sol) == [3]


def test_rank_orders_by_voltage_gap():
    net = ring4()
    # synthetic solution with controlled voltage gaps
    sol = solve(net, Topology([3]))
    sol.v_mag.update({1: 1.0, 2: 0.99, 3: 0.98, 4: 0.97})
    # only open switch is 3 = (3,4): trivial; craft a two-open case instead
    net2 = build_network(
        [Bus(id=1, kind=SLACK), Bus(id=2, kind=PQ, load_p=1),
         Bus(id=3, kind=PQ, load_p=1), Bus(id=4, kind=PQ, load_p=1)],
        [Branch(id=i, from_bus=a, to_bus=b, resistance=0.01, reactance=0.02)
         for i, (a, b) in enumerate([(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)], start=1)],
    )
    topo = Topology([2, 4])  # open (2,3) and (4,1)
    sol2 = solve(net2, topo)
    sol2.v_mag.update({2: 1.0, 3: 0.99, 4: 0.96, 1: 1.0})
    # gap across branch 2 = |1.0 - 0.99| = 0.01; across branch 4 = |0.96 - 1.0| = 0.04
    assert rank_candidates(net2, topo, sol2) == [4, 2]


def test_rank_ties_broken_by_id():
    net = ring4()
    topo = Topology([2])
    sol = solve(net, topo)
    for k in sol.v_mag:
        sol.v_mag[k] = 1.0
    assert rank_candidates(net, topo, sol) == [2]


def test_rank_is_permutation_of_open_switches(ieee14):
    topo, _ = initial_topology(ieee14)
    sol = solve(ieee14, topo)
    ranked = rank_candidates(ieee14, topo, sol)
    assert sorted(ranked) == list(topo.open_switches)


def test_elite_subset_ceil():
    assert elite_subset([1, 2, 3, 4, 5, 6, 7], 0.3) == [1, 2, 3]
    assert elite_subset([1, 2, 3], 1.0) == [1, 2, 3]
    assert elite_subset([], 0.5) == []
    assert elite_subset([9], 0.01) == [9]
    with pytest.raises(ValueError):
        elite_subset([1], 0.0)


# --- apply_fault ---

def test_apply_fault_removes_buses_and_incident_branches(ieee14):
    degraded = apply_fault(ieee14, failed_buses={9, 11})
    assert len(degraded.buses) == 12
    for br in degraded.branches:
        assert 9 not in (br.from_bus, br.to_bus)
        assert 11 not in (br.from_bus, br.to_bus)
    # bus 10 survives the removal itself (stranded until pruning)
    assert any(b.id == 10 for b in degraded.buses)


def test_apply_fault_empty_is_identity(ieee14):
    assert apply_fault(ieee14) == ieee14


def test_apply_fault_slack_protected(ieee14):
    with pytest.raises(SlackFailed):
        apply_fault(ieee14, failed_buses={1})


def test_apply_fault_drops_failed_branch(ieee14):
    degraded = apply_fault(ieee14, failed_branches={5})
    assert len(degraded.branches) == 19
    assert all(br.id != 5 for br in degraded.branches)


# --- reconfigure ---

def test_ring_best_splits_load_evenly(ring):
    """Uniform ring with symmetric load: enumeration oracle agrees."""
    (best_loss, best_topo), trees = enumerate_best(ring)
    assert trees == 4
    result = reconfigure(ring, HatsgaParams(elite_fraction=1.0, max_passes=50))
    assert result.best_loss == pytest.approx(best_loss, abs=1e-5)
    assert result.best_topology == best_topo
    # symmetry: opening branch 2 or 3 splits 2 loads per half; ids break ties
    assert result.best_topology.open_switches in ((2,), (3,))


def test_triangle_matches_enumeration(tri):
    (best_loss, best_topo), trees = enumerate_best(tri)
    assert trees == 3
    result = reconfigure(tri, HatsgaParams(elite_fraction=1.0, max_passes=50))
    assert result.best_loss == pytest.approx(best_loss, abs=1e-6)
    assert result.best_topology == best_topo


def test_ieee14_matches_exhaustive_oracle(ieee14, tree_oracle):
    result = reconfigure(ieee14, HatsgaParams(elite_fraction=1.0, max_passes=200))
    assert result.best_loss == pytest.approx(tree_oracle["best_loss_mw"], abs=10 * 1e-6)
    assert list(result.best_topology.open_switches) == tree_oracle["best_open_switches"]
    assert result.quality_met


def test_evaluations_equal_ledger_entries(ieee14):
    result = reconfigure(ieee14, HatsgaParams(elite_fraction=1.0, max_passes=200))
    assert result.evaluations == len(result.ledger)
    for key in result.ledger.entries:
        assert is_radial(ieee14, Topology(key))


def test_search_space_reduction(ieee14):
    result = reconfigure(ieee14, HatsgaParams(elite_fraction=1.0, max_passes=200))
    assert result.evaluations < 3909


def test_best_loss_never_worse_than_seed(ieee14):
    _, seed_loss = initial_topology(ieee14)
    result = reconfigure(ieee14)
    assert result.best_loss <= seed_loss + 1e-9


def test_deterministic(ieee14):
    a = reconfigure(ieee14)
    b = reconfigure(ieee14)
    assert a.best_topology == b.best_topology
    assert a.best_loss == b.best_loss
    assert a.evaluations == b.evaluations
    assert a.passes == b.passes


def test_already_optimal_fixed_point():
    """A network whose seed tree is oracle-optimal stops without moving."""
    net = triangle(r=(0.01, 0.02, 0.5))  # branch 3 so lossy no tree uses it
    (best_loss, best_topo), _ = enumerate_best(net)
    seed, _ = initial_topology(net)
    assert seed == best_topo  # MST == optimum here
    result = reconfigure(net, HatsgaParams(elite_fraction=1.0, stall_passes=1))
    assert result.best_topology == best_topo
    assert result.best_loss == pytest.approx(best_loss, abs=1e-9)


def test_fault_with_shedding(ieee14):
    result = reconfigure(ieee14, failed_buses={9, 11})
    assert result.shed_buses == [10]
    assert result.quality_met
    with pytest.raises(DisconnectedGraph):
        reconfigure(ieee14, failed_buses={9, 11}, allow_shed=False)


def test_fault_requires_reachability(ieee14):
    result = reconfigure(ieee14, failed_branches={5})
    assert result.shed_buses == []
    assert is_radial(apply_fault(ieee14, failed_branches={5}), result.best_topology)


def test_best_loss_matches_fresh_solve(ieee14):
    result = reconfigure(ieee14)
    post = ieee14
    sol = solve(post, result.best_topology)
    assert abs(sol.loss_total - result.best_loss) <= 10 * 1e-6


def test_nonswitchable_branch_never_opened():
    buses = [Bus(id=1, kind=SLACK)] + [Bus(id=i, kind=PQ, load_p=2.0) for i in (2, 3, 4)]
    branches = [
        Branch(id=1, from_bus=1, to_bus=2, resistance=0.01, reactance=0.03, switchable=False),
        Branch(id=2, from_bus=2, to_bus=3, resistance=0.01, reactance=0.03),
        Branch(id=3, from_bus=3, to_bus=4, resistance=0.01, reactance=0.03),
        Branch(id=4, from_bus=4, to_bus=1, resistance=0.01, reactance=0.03),
    ]
    net = build_network(buses, branches)
    result = reconfigure(net, HatsgaParams(elite_fraction=1.0, max_passes=20))
    assert 1 not in result.best_topology.open_switches
    for key in result.ledger.entries:
        assert 1 not in key
