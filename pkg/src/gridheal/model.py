"""Graph model of the distribution network.

Buses and branches form an undirected multigraph; an operating topology is
the set of branch switches held open, and it is *radial* when the closed
branches form a spanning tree. This module owns the graph machinery the
reconfiguration search is built on: radiality checks, exact spanning-tree
counting, minimum spanning trees, and fundamental-loop extraction.

Networks are immutable after construction and safe to share across threads;
Topology values are small frozen objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DanglingEndpoint,
    DisconnectedGraph,
    DuplicateId,
    MultipleSlack,
    NoSlack,
    NotRadial,
    SwitchNotOpen,
    UnknownSwitchId,
)

SLACK = "slack"
PV = "PV"
PQ = "PQ"

BUS_KINDS = (SLACK, PV, PQ)


@dataclass(frozen=True)
class Bus:
    """A network node with its electrical injections.

    Loads and generation are in MW / MVAr; voltages in per-unit. ``v_nominal``
    is the reference magnitude quality metrics measure deviation from, and
    ``v_setpoint`` is the regulated magnitude held at slack/PV buses.
    """

    id: int
    kind: str = PQ
    load_p: float = 0.0
    load_q: float = 0.0
    gen_p: float = 0.0
    gen_q: float = 0.0
    v_nominal: float = 1.0
    v_setpoint: float = 1.0
    shunt_g: float = 0.0
    shunt_b: float = 0.0

    def __post_init__(self):
        if self.kind not in BUS_KINDS:
            raise ValueError(f"bus {self.id}: unknown kind {self.kind!r}")
        if self.v_nominal <= 0:
            raise ValueError(f"bus {self.id}: v_nominal must be positive")


@dataclass(frozen=True)
class Branch:
    """An edge of the network carrying a series impedance.

    ``tap`` is the off-nominal turns ratio applied on the from side
    (1.0 for lines); ``charging_b`` is the total line-charging susceptance.
    ``switchable`` marks branches the reconfiguration search may toggle.
    """

    id: int
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    charging_b: float = 0.0
    tap: float = 1.0
    switchable: bool = True

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValueError(f"branch {self.id}: from_bus == to_bus")
        if self.resistance < 0:
            raise ValueError(f"branch {self.id}: negative resistance")
        if self.impedance == 0:
            raise ValueError(f"branch {self.id}: zero impedance")
        if self.tap <= 0:
            raise ValueError(f"branch {self.id}: tap must be positive")

    @property
    def impedance(self) -> float:
        return math.hypot(self.resistance, self.reactance)


@dataclass(frozen=True)
class Topology:
    """A switch-status assignment: the set of open branch ids.

    Stored canonically as a sorted tuple without duplicates so topologies
    compare and hash by value.
    """

    open_switches: tuple[int, ...]

    def __init__(self, open_switches: Iterable[int] = ()):
        object.__setattr__(self, "open_switches", tuple(sorted(set(open_switches))))

    def opened(self, branch_id: int) -> "Topology":
        return Topology(self.open_switches + (branch_id,))

    def closed(self, branch_id: int) -> "Topology":
        return Topology(b for b in self.open_switches if b != branch_id)

    def is_open(self, branch_id: int) -> bool:
        return branch_id in self.open_switches

    @property
    def key(self) -> tuple[int, ...]:
        return self.open_switches


@dataclass(frozen=True)
class Network:
    """Immutable validated network: buses, branches and prepared indexes."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float = 100.0
    bus_index: dict = field(default_factory=dict, compare=False, repr=False)
    branch_index: dict = field(default_factory=dict, compare=False, repr=False)
    adjacency: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def slack_id(self) -> int:
        for bus in self.buses:
            if bus.kind == SLACK:
                return bus.id
        raise NoSlack("network has no slack bus")

    def bus(self, bus_id: int) -> Bus:
        return self.bus_index[bus_id]

    def branch(self, branch_id: int) -> Branch:
        try:
            return self.branch_index[branch_id]
        except KeyError:
            raise UnknownSwitchId(f"no branch with id {branch_id}") from None

    @property
    def total_load_p(self) -> float:
        return sum(b.load_p for b in self.buses)

    def branches_at(self, bus_id: int) -> tuple[int, ...]:
        return self.adjacency.get(bus_id, ())


def _index_network(buses: Sequence[Bus], branches: Sequence[Branch], base_mva: float) -> Network:
    bus_index = {b.id: b for b in buses}
    branch_index = {br.id: br for br in branches}
    adjacency: dict[int, list[int]] = {b.id: [] for b in buses}
    for br in sorted(branches, key=lambda b: b.id):
        adjacency[br.from_bus].append(br.id)
        adjacency[br.to_bus].append(br.id)
    return Network(
        buses=tuple(sorted(buses, key=lambda b: b.id)),
        branches=tuple(sorted(branches, key=lambda b: b.id)),
        base_mva=base_mva,
        bus_index=bus_index,
        branch_index={k: v for k, v in sorted(branch_index.items())},
        adjacency={k: tuple(v) for k, v in adjacency.items()},
    )


def build_network(
    buses: Sequence[Bus],
    branches: Sequence[Branch],
    base_mva: float = 100.0,
    require_connected: bool = True,
) -> Network:
    """Validate and assemble a Network.

    Raises DuplicateId, DanglingEndpoint, NoSlack, MultipleSlack, or
    DisconnectedGraph (the last only when ``require_connected``; fault-derived
    networks may legitimately contain stranded buses).
    """
    if not buses:
        raise NoSlack("empty bus list")
    seen_bus: set[int] = set()
    for b in buses:
        if b.id in seen_bus:
            raise DuplicateId(f"duplicate bus id {b.id}")
        seen_bus.add(b.id)
    seen_br: set[int] = set()
    for br in branches:
        if br.id in seen_br:
            raise DuplicateId(f"duplicate branch id {br.id}")
        seen_br.add(br.id)
        for end in (br.from_bus, br.to_bus):
            if end not in seen_bus:
                raise DanglingEndpoint(f"branch {br.id} references unknown bus {end}")
    slacks = [b.id for b in buses if b.kind == SLACK]
    if not slacks:
        raise NoSlack("network needs exactly one slack bus")
    if len(slacks) > 1:
        raise MultipleSlack(f"multiple slack buses: {slacks}")

    net = _index_network(buses, branches, base_mva)
    if require_connected:
        reachable = _reachable(net, net.branch_index.keys(), start=slacks[0])
        missing = [b.id for b in net.buses if b.id not in reachable]
        if missing:
            raise DisconnectedGraph(f"buses unreachable with all branches closed: {missing}")
    return net


def _reachable(net: Network, closed_branch_ids: Iterable[int], start: int) -> set[int]:
    closed = set(closed_branch_ids)
    seen = {start}
    stack = [start]
    while stack:
        bus = stack.pop()
        for br_id in net.branches_at(bus):
            if br_id not in closed:
                continue
            br = net.branch_index[br_id]
            other = br.to_bus if br.from_bus == bus else br.from_bus
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen


def closed_branches(net: Network, topo: Topology) -> list[Branch]:
    open_set = set(topo.open_switches)
    for sw in open_set:
        if sw not in net.branch_index:
            raise UnknownSwitchId(f"no branch with id {sw}")
    return [br for br in net.branches if br.id not in open_set]


def is_radial(net: Network, topo: Topology) -> bool:
    """True iff the closed branches form a spanning tree of the buses."""
    closed = closed_branches(net, topo)
    if len(closed) != len(net.buses) - 1:
        return False
    if not net.buses:
        return False
    reachable = _reachable(net, (b.id for b in closed), start=net.buses[0].id)
    return len(reachable) == len(net.buses)


def slack_component(net: Network) -> tuple[Network, list[int]]:
    """Restrict the network to buses reachable from the slack.

    Reachability is measured with every branch closed (reconfiguration may
    use any of them). Returns the induced connected subnetwork and the ids
    of shed buses; loads on shed buses are dropped with them.
    """
    reachable = _reachable(net, net.branch_index.keys(), start=net.slack_id)
    shed = sorted(b.id for b in net.buses if b.id not in reachable)
    if not shed:
        return net, []
    keep_buses = [b for b in net.buses if b.id in reachable]
    keep_branches = [
        br for br in net.branches if br.from_bus in reachable and br.to_bus in reachable
    ]
    return build_network(keep_buses, keep_branches, net.base_mva), shed


# --- exact spanning-tree counting -----------------------------------------

_PRIMES: list[int] = []


def _primes_up_to_count(k: int) -> list[int]:
    """First k primes just below 2**30 (int64-safe modular products)."""
    global _PRIMES
    candidate = _PRIMES[-1] - 2 if _PRIMES else (1 << 30) - 1
    while len(_PRIMES) < k:
        while True:
            is_p = candidate > 1 and all(
                candidate % d for d in range(3, int(candidate**0.5) + 1, 2)
            ) and candidate % 2
            if is_p:
                break
            candidate -= 2
        _PRIMES.append(candidate)
        candidate -= 2
    return _PRIMES[:k]


def _det_mod(matrix: np.ndarray, p: int) -> int:
    """Determinant of an integer matrix modulo prime p (vectorized elimination)."""
    m = (matrix % p).astype(np.int64)
    n = m.shape[0]
    det = 1
    sign = 1
    for col in range(n):
        pivot_rows = np.nonzero(m[col:, col])[0]
        if pivot_rows.size == 0:
            return 0
        pivot = col + int(pivot_rows[0])
        if pivot != col:
            m[[col, pivot]] = m[[pivot, col]]
            sign = -sign
        pv = int(m[col, col])
        det = (det * pv) % p
        inv = pow(pv, p - 2, p)
        below = m[col + 1 :, col]
        if below.size:
            factors = (below * inv) % p
            m[col + 1 :, col:] = (m[col + 1 :, col:] - factors[:, None] * m[col, col:]) % p
    return (det * sign) % p


def count_spanning_trees(net: Network) -> int:
    """Exact number of spanning trees via the matrix-tree theorem.

    The Laplacian cofactor determinant is computed exactly with multi-prime
    modular elimination combined by CRT (prime count chosen from the Hadamard
    bound), so counts beyond 2**63 remain exact. Parallel branches count as
    multi-edges. Returns 0 for a disconnected network.
    """
    n = len(net.buses)
    if n == 0:
        return 0
    if n == 1:
        return 1
    reachable = _reachable(net, net.branch_index.keys(), start=net.buses[0].id)
    if len(reachable) != n:
        return 0

    pos = {b.id: i for i, b in enumerate(net.buses)}
    lap = np.zeros((n, n), dtype=np.int64)
    for br in net.branches:
        i, j = pos[br.from_bus], pos[br.to_bus]
        lap[i, i] += 1
        lap[j, j] += 1
        lap[i, j] -= 1
        lap[j, i] -= 1
    minor = lap[1:, 1:]

    # Hadamard bound on |det| decides how many ~2^30 primes CRT needs.
    norms = np.sqrt((minor.astype(float) ** 2).sum(axis=1))
    log_bound = float(np.log(np.maximum(norms, 1.0)).sum())
    k = max(2, int(log_bound / math.log(1 << 30)) + 2)
    primes = _primes_up_to_count(k)

    residues = [_det_mod(minor, p) for p in primes]
    modulus = 1
    value = 0
    for p, r in zip(primes, residues):
        # incremental CRT
        inc = ((r - value) * pow(modulus % p, p - 2, p)) % p
        value += modulus * inc
        modulus *= p
    return value


# --- spanning-tree construction and loops ---------------------------------

class _UnionFind:
    def __init__(self, items: Iterable[int]):
        self.parent = {x: x for x in items}

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def minimum_spanning_tree(
    net: Network, edge_weight: Callable[[Branch], float] | None = None
) -> Topology:
    """Kruskal MST; ties broken by ascending branch id for reproducibility.

    Default weight is the branch impedance magnitude, favoring a
    low-impedance backbone. Returns the Topology whose open set is the
    complement of the tree; raises DisconnectedGraph when no tree exists.
    """
    if edge_weight is None:
        edge_weight = lambda br: br.impedance
    uf = _UnionFind(b.id for b in net.buses)
    chosen: set[int] = set()
    for br in sorted(net.branches, key=lambda b: (edge_weight(b), b.id)):
        if uf.union(br.from_bus, br.to_bus):
            chosen.add(br.id)
    if len(chosen) != len(net.buses) - 1:
        raise DisconnectedGraph("network has no spanning tree")
    return Topology(br.id for br in net.branches if br.id not in chosen)


def tree_path(net: Network, topo: Topology, start: int, goal: int) -> list[int]:
    """Branch ids along the unique closed-branch path from start to goal."""
    open_set = set(topo.open_switches)
    parent: dict[int, tuple[int, int]] = {}
    seen = {start}
    stack = [start]
    while stack:
        bus = stack.pop()
        if bus == goal:
            break
        for br_id in net.branches_at(bus):
            if br_id in open_set:
                continue
            br = net.branch_index[br_id]
            other = br.to_bus if br.from_bus == bus else br.from_bus
            if other not in seen:
                seen.add(other)
                parent[other] = (bus, br_id)
                stack.append(other)
    if goal not in seen:
        raise NotRadial(f"no closed path between buses {start} and {goal}")
    path = []
    node = goal
    while node != start:
        node, br_id = parent[node]
        path.append(br_id)
    path.reverse()
    return path


def fundamental_loop(net: Network, topo: Topology, close_id: int) -> list[int]:
    """The unique cycle created by closing one open switch of a radial topology.

    Returns the closed branch first, followed by the tree path between its
    endpoints (from-side to-side order).
    """
    br = net.branch(close_id)
    if close_id not in set(topo.open_switches):
        raise SwitchNotOpen(f"branch {close_id} is not open")
    if not is_radial(net, topo):
        raise NotRadial("fundamental loops are defined on radial topologies")
    return [close_id] + tree_path(net, topo, br.from_bus, br.to_bus)
