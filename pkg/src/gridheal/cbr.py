"""Knowledge plane: case model, similarity, retrieval, adaptation, revision.

A case pairs a problem (grid state + fault descriptor) with its solution
(a radial topology and the loss/quality it achieved) plus an occurrence
counter. Retrieval hard-filters cases by structural compatibility, scores
the survivors on three normalized attributes (loss ratio, voltage-profile
sum, violation count), and returns those above a similarity threshold.

Local similarity of one attribute pair is 1 - |c - t| / (max - min) after
clamping into the declared range; the global score is by default the
weighted mean of the locals, with a range-normalized Euclidean variant
available behind mode="euclidean".
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .errors import (
    AttributeMismatch,
    DegenerateRange,
    IslandedLoad,
    NotRadial,
    SingularJacobian,
    Unrepairable,
)
from .model import Network, Topology, is_radial
from .powerflow import PowerFlowSolution, QualityMetrics, quality, solve

ATTRIBUTES = ("loss_ratio", "profile_sum", "violation_count")

PROBLEM_KINDS = ("bus_fault", "branch_fault", "imbalance", "maintenance", "quality_violation")

WEIGHTED_MEAN = "weighted-mean"
EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class AttributeVector:
    """The three case attributes similarity is computed on."""

    loss_ratio: float
    profile_sum: float
    violation_count: float

    @classmethod
    def from_quality(cls, metrics: QualityMetrics) -> "AttributeVector":
        return cls(
            loss_ratio=metrics.loss_ratio,
            profile_sum=metrics.profile_sum,
            violation_count=float(metrics.violation_count),
        )

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in ATTRIBUTES}


@dataclass(frozen=True)
class SimilarityWeights:
    """Nonnegative per-attribute weights; normalized to sum 1 internally."""

    loss_ratio: float = 1.0
    profile_sum: float = 1.0
    violation_count: float = 1.0

    def __post_init__(self):
        values = self.as_dict()
        if any(v < 0 for v in values.values()):
            raise ValueError("weights must be nonnegative")
        if sum(values.values()) <= 0:
            raise ValueError("at least one weight must be positive")

    def as_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in ATTRIBUTES}

    def normalized(self) -> dict:
        values = self.as_dict()
        total = sum(values.values())
        return {k: v / total for k, v in values.items()}


@dataclass(frozen=True)
class NetworkState:
    """Summary of the grid state a case was solved in."""

    active_buses: tuple[int, ...]
    active_branches: tuple[int, ...]
    total_load_p: float
    bus_loads: Mapping[int, float]

    @classmethod
    def of(cls, net: Network) -> "NetworkState":
        return cls(
            active_buses=tuple(b.id for b in net.buses),
            active_branches=tuple(br.id for br in net.branches),
            total_load_p=net.total_load_p,
            bus_loads={b.id: b.load_p for b in net.buses if b.load_p},
        )

    @cached_property
    def bus_set(self) -> frozenset:
        return frozenset(self.active_buses)

    @cached_property
    def branch_set(self) -> frozenset:
        return frozenset(self.active_branches)

    def same_elements(self, other: "NetworkState") -> bool:
        return self.bus_set == other.bus_set and self.branch_set == other.branch_set


@dataclass(frozen=True)
class Problem:
    """What went wrong: the alert kind plus the affected element ids."""

    kind: str
    affected_buses: tuple[int, ...] = ()
    affected_branches: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        object.__setattr__(self, "affected_buses", tuple(sorted(self.affected_buses)))
        object.__setattr__(self, "affected_branches", tuple(sorted(self.affected_branches)))


@dataclass
class Case:
    """One remembered reconfiguration: problem, solution, and its quality."""

    id: int | None
    state: NetworkState
    problem: Problem
    solution: Topology
    loss: float
    metrics: QualityMetrics
    occurrences: int = 1
    last_used: int = 0

    @property
    def attributes(self) -> AttributeVector:
        return AttributeVector.from_quality(self.metrics)

    def matches(self, other: "Case") -> bool:
        """Dedup identity: same problem, same active sets, same open set."""
        return (
            self.problem == other.problem
            and self.state.same_elements(other.state)
            and self.solution.key == other.solution.key
        )


@dataclass(frozen=True)
class Query:
    """A current case looking for precedents."""

    state: NetworkState
    problem: Problem
    attributes: AttributeVector


def local_similarity(t: float, c: float, lo: float, hi: float) -> float:
    """Normalized closeness of one attribute pair, in [0, 1].

    Values are clamped into [lo, hi] first; identical values score 1.
    """
    if lo >= hi:
        raise DegenerateRange(f"attribute range [{lo}, {hi}] is empty")
    t = min(max(t, lo), hi)
    c = min(max(c, lo), hi)
    return 1.0 - abs(c - t) / (hi - lo)


def _vector_dict(vector: AttributeVector | Mapping[str, float]) -> dict:
    if isinstance(vector, AttributeVector):
        return vector.as_dict()
    return dict(vector)


def global_similarity(
    query: AttributeVector | Mapping[str, float],
    stored: AttributeVector | Mapping[str, float],
    weights: SimilarityWeights | Mapping[str, float] | None = None,
    ranges: Mapping[str, tuple[float, float]] | None = None,
    mode: str = WEIGHTED_MEAN,
) -> float:
    """Aggregate the per-attribute local similarities into one score.

    Default mode is the weighted mean of local similarities; mode="euclidean"
    instead returns 1 - sqrt(sum w_i * (t_i - c_i)^2) on range-normalized
    values, which also lands in [0, 1]. Weights are sum-normalized, so
    scaling all weights leaves the score unchanged.
    """
    q = _vector_dict(query)
    s = _vector_dict(stored)
    if set(q) != set(s):
        raise AttributeMismatch(f"attribute sets differ: {sorted(q)} vs {sorted(s)}")
    if weights is None:
        weights = SimilarityWeights()
    w = weights.normalized() if isinstance(weights, SimilarityWeights) else dict(weights)
    if set(w) != set(q):
        raise AttributeMismatch(f"weight attributes differ: {sorted(w)} vs {sorted(q)}")
    if not isinstance(weights, SimilarityWeights):
        total = sum(w.values())
        if total <= 0:
            raise ValueError("at least one weight must be positive")
        w = {k: v / total for k, v in w.items()}
    ranges = ranges or {name: (0.0, 1.0) for name in q}

    if mode == WEIGHTED_MEAN:
        score = 0.0
        for name in q:
            lo, hi = ranges[name]
            score += w[name] * local_similarity(q[name], s[name], lo, hi)
        return score
    if mode == EUCLIDEAN:
        acc = 0.0
        for name in q:
            lo, hi = ranges[name]
            if lo >= hi:
                raise DegenerateRange(f"attribute range [{lo}, {hi}] is empty")
            qn = (min(max(q[name], lo), hi) - lo) / (hi - lo)
            sn = (min(max(s[name], lo), hi) - lo) / (hi - lo)
            acc += w[name] * (qn - sn) ** 2
        return 1.0 - acc ** 0.5
    raise ValueError(f"unknown similarity mode {mode!r}")


def structurally_compatible(case: Case, query: Query) -> bool:
    """Hard pre-filter: the case must address the same problem kind and its
    topology must only use elements that survive in the query's network."""
    if case.problem.kind != query.problem.kind:
        return False
    return (
        case.state.bus_set >= query.state.bus_set
        and case.state.branch_set >= query.state.branch_set
    )


def retrieve(
    base: "CaseBase",
    query: Query,
    threshold: float = 0.92,
    weights: SimilarityWeights | None = None,
    limit: int | None = None,
    mode: str = WEIGHTED_MEAN,
) -> list[tuple[Case, float]]:
    """Linear scan of the base: filter, score, threshold, rank, truncate.

    Ranking is by similarity descending, then higher occurrence count, then
    lower case id. Returned cases get their last-used mark refreshed. The
    weighted-mean scoring is inlined here: a scan of the whole base sits on
    the alert latency path, where per-case indirection is measurable.
    """
    ranges = base.attribute_ranges()
    weights = weights or SimilarityWeights()
    scored = []
    if mode == WEIGHTED_MEAN:
        w = weights.normalized()
        w_lr, w_ps, w_vc = w["loss_ratio"], w["profile_sum"], w["violation_count"]
        (lr_lo, lr_hi) = ranges["loss_ratio"]
        (ps_lo, ps_hi) = ranges["profile_sum"]
        (vc_lo, vc_hi) = ranges["violation_count"]
        q = query.attributes
        q_lr = min(max(q.loss_ratio, lr_lo), lr_hi)
        q_ps = min(max(q.profile_sum, ps_lo), ps_hi)
        q_vc = min(max(q.violation_count, vc_lo), vc_hi)
        kind = query.problem.kind
        bus_set = query.state.bus_set
        branch_set = query.state.branch_set
        for case in base.cases():
            problem = case.problem
            state = case.state
            if (
                problem.kind != kind
                or not state.bus_set >= bus_set
                or not state.branch_set >= branch_set
            ):
                continue
            m = case.metrics
            c_lr = min(max(m.loss_ratio, lr_lo), lr_hi)
            c_ps = min(max(m.profile_sum, ps_lo), ps_hi)
            c_vc = min(max(float(m.violation_count), vc_lo), vc_hi)
            sim = (
                w_lr * (1.0 - abs(c_lr - q_lr) / (lr_hi - lr_lo))
                + w_ps * (1.0 - abs(c_ps - q_ps) / (ps_hi - ps_lo))
                + w_vc * (1.0 - abs(c_vc - q_vc) / (vc_hi - vc_lo))
            )
            if sim >= threshold:
                scored.append((case, sim))
    else:
        for case in base.cases():
            if not structurally_compatible(case, query):
                continue
            sim = global_similarity(query.attributes, case.attributes, weights, ranges, mode)
            if sim >= threshold:
                scored.append((case, sim))
    scored.sort(key=lambda pair: (-pair[1], -pair[0].occurrences, pair[0].id))
    if limit is not None:
        scored = scored[:limit]
    base.touch(case.id for case, _ in scored)
    return scored


def project_topology(case_topology: Topology, case_branches: Iterable[int], net: Network) -> Topology:
    """Project a stored topology onto (a possibly degraded) current network.

    Branches the case kept closed stay closed when they still exist; every
    other surviving branch is open (unknown or failed branches cannot be
    assumed closed).
    """
    case_closed = set(case_branches) - set(case_topology.open_switches)
    current = {br.id for br in net.branches}
    open_now = current - (case_closed & current)
    return Topology(open_now)


def repair_radial(net: Network, topo: Topology) -> Topology:
    """Close open switches (lowest impedance first) until the closed set
    spans every bus. The input's closed set must be acyclic, which holds for
    any projection of a stored radial solution. Raises Unrepairable when no
    switch set reconnects all buses."""
    parent = {b.id: b.id for b in net.buses}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = len(net.buses)
    open_set = set(topo.open_switches)
    for br in net.branches:
        if br.id in open_set:
            continue
        ra, rb = find(br.from_bus), find(br.to_bus)
        if ra == rb:
            raise NotRadial("projected topology contains a cycle")
        parent[ra] = rb
        components -= 1
    if components > 1:
        closable = sorted(
            (net.branch(b) for b in open_set if net.branch(b).switchable),
            key=lambda br: (br.impedance, br.id),
        )
        for br in closable:
            ra, rb = find(br.from_bus), find(br.to_bus)
            if ra != rb:
                parent[ra] = rb
                open_set.discard(br.id)
                components -= 1
                if components == 1:
                    break
    if components > 1:
        raise Unrepairable("no switch closures reconnect all buses")
    return Topology(open_set)


def adapt(case: Case, net: Network) -> Topology:
    """Fit a retrieved case's topology to the current network.

    Switches on failed branches are forced open by the projection; if the
    result no longer spans the network it is repaired by greedily closing
    the lowest-impedance open switches. The result is radial on ``net`` or
    Unrepairable is raised (signalling fallback to a fresh search).
    """
    projected = project_topology(case.solution, case.state.active_branches, net)
    repaired = repair_radial(net, projected)
    if not is_radial(net, repaired):
        raise Unrepairable("repair produced a non-spanning topology")
    return repaired


@dataclass(frozen=True)
class ReviseOutcome:
    accepted: bool
    solution: PowerFlowSolution | None
    metrics: QualityMetrics | None


def revise(
    net: Network,
    proposal: Topology,
    quality_limit: float = 0.05,
    tol: float = 1e-6,
    max_iter: int = 50,
) -> ReviseOutcome:
    """Validate a proposed topology by power flow.

    Accepted iff the flow converges and no bus violates the voltage band.
    Rejection is a result, not an error.
    """
    if not is_radial(net, proposal):
        raise NotRadial("revise expects a radial proposal")
    try:
        sol = solve(net, proposal, tol, max_iter)
    except (IslandedLoad, SingularJacobian):
        return ReviseOutcome(accepted=False, solution=None, metrics=None)
    if not sol.converged:
        return ReviseOutcome(accepted=False, solution=sol, metrics=None)
    metrics = quality(net, sol, quality_limit)
    return ReviseOutcome(
        accepted=metrics.violation_count == 0, solution=sol, metrics=metrics
    )
