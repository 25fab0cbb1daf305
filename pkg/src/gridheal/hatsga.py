"""Reconfiguration search: elitism-guided branch exchange over radial
topologies with a persistent memoizing tabu ledger (HATSGA).

The search starts from a radial seed topology, then repeatedly closes a
promising open switch (creating one fundamental loop) and reopens another
branch of that loop. Every evaluated open-switch set and its loss live in a
ledger that is never cleared, so no topology is power-flowed twice and the
walk cannot cycle. Candidate switches are ranked by the voltage gap across
them and only the elite fraction is explored each pass; the walk always moves
to the best newly evaluated topology (tabu step), while the reported best
only ever takes topologies inside the voltage-quality band.

The pipeline is deterministic: identical inputs produce identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    DisconnectedGraph,
    IslandedLoad,
    LedgerConsistencyError,
    NotConverged,
    NotRadial,
    SingularJacobian,
    SlackFailed,
)
from .model import (
    Branch,
    Network,
    Topology,
    build_network,
    fundamental_loop,
    is_radial,
    minimum_spanning_tree,
    slack_component,
)
from .powerflow import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    PowerFlowSolution,
    QualityMetrics,
    branch_loadings,
    quality,
    solve,
)

DEFAULT_QUALITY_LIMIT = 0.05


class TabuLedger:
    """Memo of every evaluated topology: canonical open-switch set -> loss (MW).

    Insertion order is retained for audit. Keys are never overwritten: a
    re-record must agree with the stored loss (within tolerance) or the
    ledger raises, catching non-deterministic evaluation bugs.
    Non-converged evaluations are recorded as infinite loss.
    """

    def __init__(self, tol: float = DEFAULT_TOL):
        self.entries: dict[tuple[int, ...], float] = {}
        self._tol = tol

    def __contains__(self, key: tuple[int, ...]) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, key: tuple[int, ...], loss: float) -> None:
        if key in self.entries:
            stored = self.entries[key]
            agree = (stored == loss) or abs(stored - loss) <= 10 * self._tol
            if not agree:
                raise LedgerConsistencyError(
                    f"key {key}: recorded loss {stored} re-evaluated as {loss}"
                )
            return
        self.entries[key] = loss

    def items(self):
        return self.entries.items()


@dataclass(frozen=True)
class HatsgaParams:
    """Tuning knobs of the search.

    ``stall_passes`` is the stagnation window: the search stops after that
    many consecutive passes without improving the incumbent (1 recovers a
    plain no-improvement stop). ``seed`` is reserved for future stochastic
    strategies; the default pipeline is fully deterministic and ignores it.
    """

    elite_fraction: float = 0.5
    max_passes: int = 20
    stall_passes: int = 10
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    quality_limit: float = DEFAULT_QUALITY_LIMIT
    seed: int | None = None

    def __post_init__(self):
        if not (0 < self.elite_fraction <= 1):
            raise ValueError("elite_fraction must be in (0, 1]")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.stall_passes < 1:
            raise ValueError("stall_passes must be >= 1")


@dataclass
class HatsgaResult:
    best_topology: Topology
    best_loss: float
    quality: QualityMetrics
    evaluations: int
    passes: int
    ledger: TabuLedger
    solution: PowerFlowSolution
    shed_buses: list[int] = field(default_factory=list)
    quality_met: bool = True


def _forced_closed(net: Network) -> list[Branch]:
    return [br for br in net.branches if not br.switchable]


def _spanning_tree_seed(net: Network) -> Topology:
    """MST by impedance with non-switchable branches forced into the tree."""
    forced = {br.id for br in _forced_closed(net)}
    topo = minimum_spanning_tree(
        net, edge_weight=lambda br: (-1.0 if br.id in forced else br.impedance)
    )
    if forced & set(topo.open_switches):
        raise NotRadial("non-switchable branches form a cycle; no radial topology exists")
    return topo


def _sequential_opening(
    net: Network, tol: float, max_iter: int
) -> tuple[Topology, PowerFlowSolution] | None:
    """Constructive fallback: from the meshed state, repeatedly open the
    least-loaded switchable branch whose removal keeps the flow solvable,
    until the topology is radial. Returns None when no step succeeds."""
    topo = Topology()
    try:
        sol = solve(net, topo, tol, max_iter)
    except SingularJacobian:
        return None
    if not sol.converged:
        return None
    forced = {br.id for br in _forced_closed(net)}
    openings_needed = len(net.branches) - (len(net.buses) - 1)
    for _ in range(openings_needed):
        loadings = branch_loadings(net, topo, sol)
        for br_id in sorted(loadings, key=lambda b: (loadings[b], b)):
            if br_id in forced:
                continue
            candidate = topo.opened(br_id)
            try:
                cand_sol = solve(net, candidate, tol, max_iter)
            except (SingularJacobian, IslandedLoad):
                continue
            if cand_sol.converged:
                topo, sol = candidate, cand_sol
                break
        else:
            return None
    if not is_radial(net, topo):
        return None
    return topo, sol


def initial_topology(
    net: Network, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> tuple[Topology, float]:
    """Radial seed topology and its converged loss.

    Tries the impedance-weighted minimum spanning tree first; transmission
    systems radialized at full load often cannot carry their load on that
    tree, so a sequential least-flow switch-opening pass from the meshed
    state is the fallback. Raises NotConverged when neither converges.
    """
    topo = _spanning_tree_seed(net)
    sol = solve(net, topo, tol, max_iter)
    if sol.converged:
        return topo, sol.loss_total
    fallback = _sequential_opening(net, tol, max_iter)
    if fallback is None:
        raise NotConverged(
            "no convergent radial seed topology found (minimum spanning tree "
            "diverged and sequential switch opening failed)"
        )
    return fallback[0], fallback[1].loss_total


def rank_candidates(net: Network, topo: Topology, sol: PowerFlowSolution) -> list[int]:
    """Open switches ordered by loss-reduction promise.

    A large voltage-magnitude gap across an open switch signals that closing
    it would redistribute flow substantially; order descending by gap with
    branch id as the deterministic tie-break.
    """
    def gap(branch_id: int) -> float:
        br = net.branch(branch_id)
        return abs(sol.v_mag[br.from_bus] - sol.v_mag[br.to_bus])

    return sorted(topo.open_switches, key=lambda b: (-gap(b), b))


def elite_subset(ranked: Sequence[int], elite_fraction: float) -> list[int]:
    """First ceil(fraction * len) entries; at least one when input non-empty."""
    if not (0 < elite_fraction <= 1):
        raise ValueError("elite_fraction must be in (0, 1]")
    if not ranked:
        return []
    return list(ranked[: math.ceil(elite_fraction * len(ranked))])


def apply_fault(
    net: Network,
    failed_buses: Iterable[int] = (),
    failed_branches: Iterable[int] = (),
) -> Network:
    """Network with failed buses (plus their incident branches) and failed
    branches removed; loads on failed buses are dropped.

    The derived network may contain buses stranded from the slack (a bus
    fault can orphan an intact neighbor); pass it through
    ``slack_component`` before optimizing. Failing the slack is an error.
    """
    failed_buses = set(failed_buses)
    failed_branches = set(failed_branches)
    if net.slack_id in failed_buses:
        raise SlackFailed(f"bus {net.slack_id} is the slack bus")
    buses = [b for b in net.buses if b.id not in failed_buses]
    branches = [
        br
        for br in net.branches
        if br.id not in failed_branches
        and br.from_bus not in failed_buses
        and br.to_bus not in failed_buses
    ]
    return build_network(buses, branches, net.base_mva, require_connected=False)


def reconfigure(
    net: Network,
    params: HatsgaParams | None = None,
    failed_buses: Iterable[int] = (),
    failed_branches: Iterable[int] = (),
    allow_shed: bool = True,
) -> HatsgaResult:
    """Run the full search on ``net`` minus the faulted elements.

    Buses left unreachable from the slack by the fault are shed (reported in
    the result) unless ``allow_shed`` is false, in which case shedding load is
    a DisconnectedGraph error. Raises NotConverged if no radial seed topology
    converges. When no explored topology satisfies the voltage band, the seed
    topology is returned with ``quality_met=False``.
    """
    params = params or HatsgaParams()
    if failed_buses or failed_branches:
        net = apply_fault(net, failed_buses, failed_branches)
    net, shed = slack_component(net)
    if shed and not allow_shed:
        raise DisconnectedGraph(f"fault strands buses {shed} from the slack")

    topo, _ = initial_topology(net, params.tol, params.max_iter)
    sol = solve(net, topo, params.tol, params.max_iter)
    qm = quality(net, sol, params.quality_limit)

    ledger = TabuLedger(tol=params.tol)
    ledger.record(topo.key, sol.loss_total)

    initial = (topo, sol, qm)
    best: tuple[Topology, PowerFlowSolution, QualityMetrics] | None = None
    if qm.violation_count == 0:
        best = initial
    current_topo, current_sol = topo, sol

    passes = 0
    stall = 0
    switchable = {br.id for br in net.branches if br.switchable}
    while passes < params.max_passes:
        passes += 1
        ranked = rank_candidates(net, current_topo, current_sol)
        fresh: list[tuple[float, Topology, PowerFlowSolution, QualityMetrics]] = []
        for switch in elite_subset(ranked, params.elite_fraction):
            loop = fundamental_loop(net, current_topo, switch)
            for branch_id in loop:
                if branch_id == switch or branch_id not in switchable:
                    continue
                candidate = current_topo.closed(switch).opened(branch_id)
                if candidate.key in ledger:
                    continue
                try:
                    cand_sol = solve(net, candidate, params.tol, params.max_iter)
                except SingularJacobian:
                    ledger.record(candidate.key, math.inf)
                    continue
                if not cand_sol.converged:
                    ledger.record(candidate.key, math.inf)
                    continue
                ledger.record(candidate.key, cand_sol.loss_total)
                cand_q = quality(net, cand_sol, params.quality_limit)
                fresh.append((cand_sol.loss_total, candidate, cand_sol, cand_q))

        if not fresh:
            break
        fresh.sort(key=lambda item: (item[0], item[1].key))
        clean = [item for item in fresh if item[3].violation_count == 0]

        improved = bool(clean) and (best is None or clean[0][0] < best[1].loss_total)
        if improved:
            best = (clean[0][1], clean[0][2], clean[0][3])
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_passes:
                break
        # tabu step: walk to the best unexplored neighbor even when it does
        # not improve; the ledger guarantees the walk never revisits
        current_topo, current_sol = fresh[0][1], fresh[0][2]

    chosen = best if best is not None else initial
    return HatsgaResult(
        best_topology=chosen[0],
        best_loss=chosen[1].loss_total,
        quality=chosen[2],
        evaluations=len(ledger),
        passes=passes,
        ledger=ledger,
        solution=chosen[1],
        shed_buses=shed,
        quality_met=best is not None,
    )
