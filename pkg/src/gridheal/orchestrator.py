"""Analyze/plan/act loop of the knowledge plane.

An alert (fault, quality violation, maintenance, rebalance) triggers the
retrieve-reuse-revise-retain cycle: the current operating state is projected
onto the post-fault network to form the query, stored cases above the
similarity threshold are adapted and validated, and only when that path
fails does a fresh reconfiguration search run. Validated plans are applied
immediately in autonomous mode (and remembered), or parked for manager
approval in manual mode.

One alert is processed at a time per orchestrator; reads are lock-free
snapshots of immutable values.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable

from .cbr import (
    AttributeVector,
    Case,
    NetworkState,
    Problem,
    Query,
    SimilarityWeights,
    adapt,
    project_topology,
    repair_radial,
    retrieve,
    revise,
)
from .casestore import CaseBase
from .errors import (
    DisconnectedGraph,
    IslandedLoad,
    NotConverged,
    NotPending,
    NotRadial,
    SingularJacobian,
    SlackFailed,
    UnknownNetwork,
    UnknownPlan,
    Unrecoverable,
    Unrepairable,
)
from .hatsga import HatsgaParams, apply_fault, initial_topology, reconfigure
from .model import Network, Topology, slack_component
from .powerflow import QualityMetrics, quality, solve

ALERT_KINDS = ("fault", "quality_violation", "maintenance", "rebalance")

AUTONOMOUS = "autonomous"
MANUAL = "manual"

_ALERT_TO_PROBLEM = {
    "quality_violation": "quality_violation",
    "maintenance": "maintenance",
    "rebalance": "imbalance",
}

PENDING = "pending_approval"
APPLIED = "applied"
REJECTED = "rejected"

CBR_REUSE = "cbr_reuse"
HATSGA = "hatsga"


@dataclass(frozen=True)
class Alert:
    """An injected monitoring event."""

    kind: str
    failed_buses: frozenset = frozenset()
    failed_branches: frozenset = frozenset()
    timestamp: float = 0.0

    def __post_init__(self):
        if self.kind not in ALERT_KINDS:
            raise ValueError(f"unknown alert kind {self.kind!r}")
        object.__setattr__(self, "failed_buses", frozenset(self.failed_buses))
        object.__setattr__(self, "failed_branches", frozenset(self.failed_branches))
        if self.kind == "fault" and not (self.failed_buses or self.failed_branches):
            raise ValueError("fault alerts must name at least one failed element")

    def problem(self) -> Problem:
        if self.kind == "fault":
            kind = "bus_fault" if self.failed_buses else "branch_fault"
        else:
            kind = _ALERT_TO_PROBLEM[self.kind]
        return Problem(
            kind=kind,
            affected_buses=tuple(self.failed_buses),
            affected_branches=tuple(self.failed_branches),
        )


@dataclass
class RecoveryPlan:
    id: int
    network_id: str
    source: str
    proposal: Topology
    predicted_loss: float
    predicted_quality: QualityMetrics
    status: str
    alert: Alert
    matched_case: int | None = None
    similarity: float | None = None
    shed_buses: list[int] = field(default_factory=list)
    evaluations: int = 0
    created_at: float = field(default_factory=time.time)


@dataclass
class GridSession:
    """Operating state of one managed network."""

    network_id: str
    base_network: Network
    current_network: Network
    current_topology: Topology
    current_metrics: QualityMetrics
    current_loss: float


@dataclass
class SeedReport:
    alert: Alert
    outcome: str  # retained | duplicate | skipped
    detail: str = ""
    case_id: int | None = None


class Orchestrator:
    """Holds managed networks, the shared case base, and the plan registry."""

    def __init__(
        self,
        case_base: CaseBase | None = None,
        params: HatsgaParams | None = None,
        threshold: float = 0.92,
        weights: SimilarityWeights | None = None,
        retrieve_limit: int = 5,
        mode: str = MANUAL,
    ):
        if mode not in (AUTONOMOUS, MANUAL):
            raise ValueError(f"unknown mode {mode!r}")
        self.case_base = case_base if case_base is not None else CaseBase()
        self.params = params or HatsgaParams()
        self.threshold = threshold
        self.weights = weights or SimilarityWeights()
        self.retrieve_limit = retrieve_limit
        self.mode = mode
        self.sessions: dict[str, GridSession] = {}
        self.plans: dict[int, RecoveryPlan] = {}
        self.hatsga_runs = 0
        self._plan_ids = itertools.count(1)
        self._net_ids = itertools.count(1)
        self._lock = threading.Lock()

    # --- network registry ---

    def register_network(self, net: Network, network_id: str | None = None) -> str:
        """Admit a network and radialize its initial operating topology."""
        network_id = network_id or f"net-{next(self._net_ids)}"
        if network_id in self.sessions:
            raise ValueError(f"network id {network_id!r} already registered")
        topo, loss = initial_topology(net, self.params.tol, self.params.max_iter)
        sol = solve(net, topo, self.params.tol, self.params.max_iter)
        metrics = quality(net, sol, self.params.quality_limit)
        self.sessions[network_id] = GridSession(
            network_id=network_id,
            base_network=net,
            current_network=net,
            current_topology=topo,
            current_metrics=metrics,
            current_loss=sol.loss_total,
        )
        return network_id

    def session(self, network_id: str) -> GridSession:
        try:
            return self.sessions[network_id]
        except KeyError:
            raise UnknownNetwork(f"no network {network_id!r}") from None

    # --- alert pipeline ---

    def _post_fault_network(self, session: GridSession, alert: Alert) -> tuple[Network, list[int]]:
        net = session.base_network
        if alert.failed_buses or alert.failed_branches:
            net = apply_fault(net, alert.failed_buses, alert.failed_branches)
        return slack_component(net)

    def _query_attributes(self, session: GridSession, net: Network) -> AttributeVector:
        """Attributes of the monitored state: the current operating topology
        carried onto the post-fault network (repaired where the fault broke
        it) and power-flowed. Falls back to the last known metrics when the
        degraded flow cannot be solved."""
        try:
            projected = project_topology(
                session.current_topology,
                (br.id for br in session.current_network.branches),
                net,
            )
            carried = repair_radial(net, projected)
            sol = solve(net, carried, self.params.tol, self.params.max_iter)
            if sol.converged:
                return AttributeVector.from_quality(
                    quality(net, sol, self.params.quality_limit)
                )
        except (Unrepairable, NotRadial, IslandedLoad, SingularJacobian):
            pass
        return AttributeVector.from_quality(session.current_metrics)

    def handle_alert(self, alert: Alert, network_id: str, mode: str | None = None) -> RecoveryPlan:
        """Run the full cycle for one alert and return the resulting plan."""
        mode = mode or self.mode
        if mode not in (AUTONOMOUS, MANUAL):
            raise ValueError(f"unknown mode {mode!r}")
        with self._lock:
            session = self.session(network_id)
            try:
                post_net, shed = self._post_fault_network(session, alert)
            except (SlackFailed, DisconnectedGraph) as exc:
                raise Unrecoverable(str(exc)) from exc
            problem = alert.problem()
            query = Query(
                state=NetworkState.of(post_net),
                problem=problem,
                attributes=self._query_attributes(session, post_net),
            )

            plan = self._plan_via_reuse(session, alert, post_net, shed, query)
            if plan is None:
                plan = self._plan_via_search(session, alert, post_net, shed, problem)
            self.plans[plan.id] = plan

            if mode == AUTONOMOUS and plan.predicted_quality.violation_count == 0:
                self._apply(plan, session, post_net, problem)
            return plan

    def _plan_via_reuse(self, session, alert, post_net, shed, query) -> RecoveryPlan | None:
        hits = retrieve(
            self.case_base,
            query,
            threshold=self.threshold,
            weights=self.weights,
            limit=self.retrieve_limit,
        )
        if not hits:
            return None
        top_case, similarity = hits[0]
        try:
            proposal = adapt(top_case, post_net)
        except Unrepairable:
            return None
        outcome = revise(
            post_net, proposal, self.params.quality_limit, self.params.tol, self.params.max_iter
        )
        if not outcome.accepted:
            return None
        return RecoveryPlan(
            id=next(self._plan_ids),
            network_id=session.network_id,
            source=CBR_REUSE,
            proposal=proposal,
            predicted_loss=outcome.solution.loss_total,
            predicted_quality=outcome.metrics,
            status=PENDING,
            alert=alert,
            matched_case=top_case.id,
            similarity=similarity,
            shed_buses=shed,
        )

    def _plan_via_search(self, session, alert, post_net, shed, problem) -> RecoveryPlan:
        self.hatsga_runs += 1
        try:
            result = reconfigure(post_net, self.params)
        except (NotConverged, DisconnectedGraph) as exc:
            raise Unrecoverable(f"reconfiguration search failed: {exc}") from exc
        return RecoveryPlan(
            id=next(self._plan_ids),
            network_id=session.network_id,
            source=HATSGA,
            proposal=result.best_topology,
            predicted_loss=result.best_loss,
            predicted_quality=result.quality,
            status=PENDING,
            alert=alert,
            shed_buses=shed,
            evaluations=result.evaluations,
        )

    def _apply(self, plan: RecoveryPlan, session: GridSession, post_net: Network, problem: Problem):
        """Make the plan the operating state and remember it as a case."""
        outcome = revise(
            post_net, plan.proposal, self.params.quality_limit, self.params.tol,
            self.params.max_iter,
        )
        if not outcome.accepted:
            raise Unrecoverable("plan no longer validates against the network")
        session.current_network = post_net
        session.current_topology = plan.proposal
        session.current_metrics = outcome.metrics
        session.current_loss = outcome.solution.loss_total
        plan.status = APPLIED
        stored = self.case_base.retain(
            Case(
                id=None,
                state=NetworkState.of(post_net),
                problem=problem,
                solution=plan.proposal,
                loss=outcome.solution.loss_total,
                metrics=outcome.metrics,
            ),
            net=post_net,
        )
        if plan.matched_case is None:
            plan.matched_case = stored.id

    # --- approvals ---

    def approve(self, plan_id: int, decision: str) -> RecoveryPlan:
        """Resolve a pending plan: 'approve' applies and retains, 'reject'
        records the refusal and leaves the grid untouched."""
        if decision not in ("approve", "reject"):
            raise ValueError("decision must be 'approve' or 'reject'")
        with self._lock:
            plan = self.plans.get(plan_id)
            if plan is None:
                raise UnknownPlan(f"no plan {plan_id}")
            if plan.status != PENDING:
                raise NotPending(f"plan {plan_id} is {plan.status}")
            if decision == "reject":
                plan.status = REJECTED
                return plan
            session = self.session(plan.network_id)
            post_net, _ = self._post_fault_network(session, plan.alert)
            self._apply(plan, session, post_net, plan.alert.problem())
            return plan

    # --- seeding ---

    def seed_base(self, network_id: str, scenarios: Iterable[Alert]) -> list[SeedReport]:
        """Populate the case base by solving each scenario with the search.

        Scenarios whose fault sheds load, or that the search cannot solve
        within the voltage band, are skipped with a report entry.
        """
        reports: list[SeedReport] = []
        with self._lock:
            session = self.session(network_id)
            for alert in scenarios:
                try:
                    post_net, shed = self._post_fault_network(session, alert)
                except (SlackFailed, DisconnectedGraph) as exc:
                    reports.append(SeedReport(alert, "skipped", f"unrecoverable: {exc}"))
                    continue
                shed_load = [b for b in shed if session.base_network.bus(b).load_p > 0]
                if shed_load:
                    reports.append(
                        SeedReport(
                            alert, "skipped",
                            f"unrecoverable: fault strands loaded buses {shed_load}",
                        )
                    )
                    continue
                self.hatsga_runs += 1
                try:
                    result = reconfigure(post_net, self.params)
                except (NotConverged, DisconnectedGraph) as exc:
                    reports.append(SeedReport(alert, "skipped", f"unrecoverable: {exc}"))
                    continue
                if not result.quality_met:
                    reports.append(
                        SeedReport(alert, "skipped", "no topology satisfies the voltage band")
                    )
                    continue
                before = len(self.case_base)
                stored = self.case_base.retain(
                    Case(
                        id=None,
                        state=NetworkState.of(post_net),
                        problem=alert.problem(),
                        solution=result.best_topology,
                        loss=result.best_loss,
                        metrics=result.quality,
                    ),
                    net=post_net,
                )
                outcome = "retained" if len(self.case_base) > before else "duplicate"
                reports.append(SeedReport(alert, outcome, case_id=stored.id))
        return reports
