"""Similarity, retrieval, adaptation, and revision tests.

Retrieval ordering is verified against an independent brute-force rescorer
that reimplements the similarity arithmetic and ranking rules from scratch.
"""

import math
import random

import pytest

from gridheal.casestore import CaseBase
from gridheal.cbr import (
    ATTRIBUTES,
    AttributeVector,
    Case,
    NetworkState,
    Problem,
    Query,
    SimilarityWeights,
    adapt,
    global_similarity,
    local_similarity,
    project_topology,
    repair_radial,
    retrieve,
    revise,
)
from gridheal.errors import AttributeMismatch, DegenerateRange, NotRadial, Unrepairable
from gridheal.hatsga import apply_fault, reconfigure
from gridheal.model import (
    PQ,
    SLACK,
    Branch,
    Bus,
    Topology,
    build_network,
    is_radial,
    slack_component,
)
from gridheal.powerflow import QualityMetrics

from conftest import ring4


def metrics(lr=0.05, ps=0.1, vc=0):
    return QualityMetrics(profile_sum=ps, violation_count=vc, loss_ratio=lr)


def make_case(cid=None, kind="branch_fault", buses=(1, 2, 3, 4), branches=(1, 2, 3, 4),
              open_sw=(4,), lr=0.05, ps=0.1, vc=0, affected=()):
    return Case(
        id=cid,
        state=NetworkState(tuple(buses), tuple(branches), 10.0, {}),
        problem=Problem(kind=kind, affected_branches=tuple(affected)),
        solution=Topology(open_sw),
        loss=lr * 10.0,
        metrics=metrics(lr, ps, vc),
    )


# --- local similarity ---

def test_local_similarity_identity():
    assert local_similarity(0.3, 0.3, 0.0, 1.0) == 1.0


def test_local_similarity_extremes():
    assert local_similarity(0.0, 1.0, 0.0, 1.0) == 0.0


def test_local_similarity_direct_value():
    assert local_similarity(0.02, 0.04, 0.0, 0.1) == pytest.approx(0.8)


def test_local_similarity_clamps():
    assert local_similarity(-5.0, 0.0, 0.0, 1.0) == 1.0
    assert local_similarity(2.0, 1.0, 0.0, 1.0) == 1.0


def test_local_similarity_degenerate_range():
    with pytest.raises(DegenerateRange):
        local_similarity(0.1, 0.2, 1.0, 1.0)


def test_local_similarity_randomized_properties():
    """Reflexivity, symmetry, range, monotonicity over 10^4 random triples."""
    rng = random.Random(20260810)
    for _ in range(10_000):
        lo = rng.uniform(-10, 10)
        hi = lo + rng.uniform(0.01, 20)
        t = rng.uniform(lo - 1, hi + 1)
        c = rng.uniform(lo - 1, hi + 1)
        s = local_similarity(t, c, lo, hi)
        assert 0.0 <= s <= 1.0
        assert local_similarity(c, t, lo, hi) == pytest.approx(s, abs=1e-12)
        assert local_similarity(t, t, lo, hi) == 1.0
        # moving c further from t (within range) cannot increase similarity
        tc = min(max(t, lo), hi)
        cc = min(max(c, lo), hi)
        further = cc + (0.1 if cc >= tc else -0.1)
        if lo <= further <= hi:
            assert local_similarity(t, further, lo, hi) <= s + 1e-12


# --- global similarity ---

RANGES = {"loss_ratio": (0.0, 1.0), "profile_sum": (0.0, 1.0), "violation_count": (0.0, 10.0)}


def test_global_identity_both_modes():
    v = AttributeVector(0.2, 0.4, 1.0)
    for mode in ("weighted-mean", "euclidean"):
        assert global_similarity(v, v, ranges=RANGES, mode=mode) == pytest.approx(1.0)


def test_global_degenerate_weights_select_attribute():
    q = AttributeVector(0.2, 0.9, 5.0)
    s = AttributeVector(0.4, 0.1, 0.0)
    w = SimilarityWeights(loss_ratio=1.0, profile_sum=0.0, violation_count=0.0)
    expected = local_similarity(0.2, 0.4, 0.0, 1.0)
    assert global_similarity(q, s, w, RANGES) == pytest.approx(expected)


def test_global_weighted_mean_of_locals():
    q = AttributeVector(0.0, 0.0, 0.0)
    s = AttributeVector(0.1, 0.2, 0.0)
    # locals: 0.9, 0.8, 1.0 with equal weights -> 0.9
    assert global_similarity(q, s, ranges=RANGES) == pytest.approx(0.9)


def test_global_scale_invariance():
    q = AttributeVector(0.3, 0.1, 2.0)
    s = AttributeVector(0.5, 0.7, 1.0)
    a = global_similarity(q, s, {"loss_ratio": 1, "profile_sum": 2, "violation_count": 3}, RANGES)
    b = global_similarity(q, s, {"loss_ratio": 10, "profile_sum": 20, "violation_count": 30}, RANGES)
    assert a == pytest.approx(b, abs=1e-12)


def test_global_euclidean_in_unit_interval():
    rng = random.Random(7)
    for _ in range(500):
        q = AttributeVector(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 10))
        s = AttributeVector(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 10))
        val = global_similarity(q, s, ranges=RANGES, mode="euclidean")
        assert 0.0 <= val <= 1.0


def test_global_attribute_mismatch():
    with pytest.raises(AttributeMismatch):
        global_similarity({"a": 1.0}, {"b": 1.0})


def test_global_hand_computed_various_weights():
    q = {"loss_ratio": 0.12, "profile_sum": 0.30, "violation_count": 2.0}
    s = {"loss_ratio": 0.07, "profile_sum": 0.45, "violation_count": 0.0}
    w = {"loss_ratio": 2.0, "profile_sum": 1.0, "violation_count": 1.0}
    # locals: 1-.05=0.95, 1-.15=0.85, 1-0.2=0.8 ; weighted mean with (0.5,0.25,0.25)
    expected = 0.5 * 0.95 + 0.25 * 0.85 + 0.25 * 0.8
    assert global_similarity(q, s, w, RANGES) == pytest.approx(expected)


# --- retrieval ---

def seeded_base(n=6):
    base = CaseBase()
    for i in range(n):
        base.retain(make_case(kind="branch_fault", affected=(i + 1,),
                              lr=0.02 * i, ps=0.05 * i, vc=i % 3))
    return base


def query_for(lr, ps, vc, kind="branch_fault", buses=(1, 2, 3, 4), branches=(1, 2, 3)):
    return Query(
        state=NetworkState(tuple(buses), tuple(branches), 10.0, {}),
        problem=Problem(kind=kind),
        attributes=AttributeVector(lr, ps, vc),
    )


def test_exact_case_retrieved_first_with_similarity_one():
    base = seeded_base()
    target = list(base.cases())[2]
    q = query_for(target.attributes.loss_ratio, target.attributes.profile_sum,
                  target.attributes.violation_count)
    results = retrieve(base, q, threshold=0.5)
    assert results[0][0].id == target.id
    assert results[0][1] == pytest.approx(1.0)


def test_threshold_filters():
    base = CaseBase()
    base.retain(make_case(lr=0.10, ps=0.10, vc=0, affected=(1,)))  # case A
    base.retain(make_case(lr=0.50, ps=0.50, vc=0, affected=(2,)))  # case B
    q = query_for(0.10, 0.10, 0)
    scored = {c.id: s for c, s in retrieve(base, q, threshold=0.0)}
    assert scored[1] == pytest.approx(1.0)
    cutoff = (scored[1] + scored[2]) / 2
    kept = retrieve(base, q, threshold=cutoff)
    assert [c.id for c, _ in kept] == [1]


def test_structural_filter_excludes_kind_and_subset():
    base = CaseBase()
    base.retain(make_case(kind="bus_fault", affected=()))
    base.retain(make_case(kind="branch_fault", buses=(1, 2, 3), branches=(1, 2),
                          open_sw=(), affected=()))
    q = query_for(0.05, 0.1, 0, kind="branch_fault", branches=(1, 2, 3, 4))
    # case 1: wrong kind; case 2: active branches not a superset of query's
    assert retrieve(base, q, threshold=0.0) == []


def test_retrieve_empty_base_is_empty():
    assert retrieve(CaseBase(), query_for(0, 0, 0), threshold=0.0) == []


def test_retrieve_limit_and_tiebreaks():
    base = CaseBase()
    # two cases with identical attributes; higher occurrences wins
    base.retain(make_case(lr=0.1, ps=0.1, vc=0, affected=(1,)))
    base.retain(make_case(lr=0.1, ps=0.1, vc=0, affected=(2,)))
    dup = make_case(lr=0.1, ps=0.1, vc=0, affected=(2,))
    base.retain(dup)  # bumps occurrences of case 2
    q = query_for(0.1, 0.1, 0)
    results = retrieve(base, q, threshold=0.0)
    assert [c.id for c, _ in results] == [2, 1]
    assert len(retrieve(base, q, threshold=0.0, limit=1)) == 1


def _brute_force_rank(base, query, weights, threshold):
    """Independent rescoring: fresh similarity arithmetic and ordering."""
    wd = {k: float(v) for k, v in weights.as_dict().items()}
    total = sum(wd.values())
    wd = {k: v / total for k, v in wd.items()}
    ranges = {}
    for name in ATTRIBUTES:
        top = max((getattr(c.attributes, name) for c in base.cases()), default=0.0)
        ranges[name] = (0.0, top if top > 0 else 1.0)
    rows = []
    for case in base.cases():
        if case.problem.kind != query.problem.kind:
            continue
        if not set(case.state.active_buses) >= set(query.state.active_buses):
            continue
        if not set(case.state.active_branches) >= set(query.state.active_branches):
            continue
        score = 0.0
        qd = query.attributes.as_dict()
        cd = case.attributes.as_dict()
        for name in ATTRIBUTES:
            lo, hi = ranges[name]
            qv = min(max(qd[name], lo), hi)
            cv = min(max(cd[name], lo), hi)
            score += wd[name] * (1.0 - abs(cv - qv) / (hi - lo))
        if score >= threshold:
            rows.append((case.id, score, case.occurrences))
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    return [(cid, score) for cid, score, _ in rows]


def test_retrieval_matches_brute_force_on_random_bases():
    rng = random.Random(42)
    base = CaseBase()
    for i in range(300):
        base.retain(make_case(
            kind=rng.choice(("branch_fault", "bus_fault")),
            affected=(i + 1,),
            lr=rng.uniform(0, 0.4), ps=rng.uniform(0, 0.8), vc=rng.randint(0, 4),
        ))
    for trial in range(30):
        weights = SimilarityWeights(
            loss_ratio=rng.uniform(0.1, 5),
            profile_sum=rng.uniform(0.1, 5),
            violation_count=rng.uniform(0.1, 5),
        )
        q = query_for(rng.uniform(0, 0.4), rng.uniform(0, 0.8), rng.randint(0, 4),
                      kind=rng.choice(("branch_fault", "bus_fault")))
        threshold = rng.choice((0.0, 0.5, 0.8, 0.92))
        mine = [(c.id, s) for c, s in retrieve(base, q, threshold, weights)]
        theirs = _brute_force_rank(base, q, weights, threshold)
        assert [cid for cid, _ in mine] == [cid for cid, _ in theirs]
        for (c1, s1), (c2, s2) in zip(mine, theirs):
            assert s1 == pytest.approx(s2, abs=1e-12)


def test_priority_weighting_reorders():
    base = CaseBase()
    base.retain(make_case(lr=0.10, ps=0.10, vc=3, affected=(1,)))
    base.retain(make_case(lr=0.20, ps=0.20, vc=0, affected=(2,)))
    q = query_for(0.10, 0.10, 0)
    equal = retrieve(base, q, 0.0, SimilarityWeights())
    priority = retrieve(base, q, 0.0, SimilarityWeights(violation_count=50.0))
    assert [c.id for c, _ in equal] == [1, 2]       # attribute-close case first
    assert [c.id for c, _ in priority] == [2, 1]    # violation-free case first


# --- adaptation ---

def test_adapt_identity_without_fault(ieee14, tree_oracle):
    topo = Topology(tree_oracle["best_open_switches"])
    case = Case(
        id=1,
        state=NetworkState.of(ieee14),
        problem=Problem(kind="imbalance"),
        solution=topo,
        loss=tree_oracle["best_loss_mw"],
        metrics=metrics(),
    )
    assert adapt(case, ieee14) == topo


def test_adapt_repairs_after_branch_fault():
    net = ring4()
    case = Case(
        id=1,
        state=NetworkState.of(net),
        problem=Problem(kind="branch_fault"),
        solution=Topology([3]),
        loss=1.0,
        metrics=metrics(),
    )
    # branch 1 fails: case kept it closed; repair must close switch 3
    degraded = apply_fault(net, failed_branches={1})
    adapted = adapt(case, degraded)
    assert is_radial(degraded, adapted)
    assert 3 not in adapted.open_switches


def test_adapt_unrepairable():
    net = build_network(
        [Bus(id=1, kind=SLACK), Bus(id=2, kind=PQ, load_p=2.0)],
        [Branch(id=1, from_bus=1, to_bus=2, resistance=0.01, reactance=0.02)],
    )
    case = Case(
        id=1, state=NetworkState.of(net), problem=Problem(kind="branch_fault"),
        solution=Topology(), loss=0.1, metrics=metrics(),
    )
    degraded = apply_fault(net, failed_branches={1})
    with pytest.raises(Unrepairable):
        adapt(case, degraded)


def test_adapt_five_bus_scenario_checked_by_power_flow():
    buses = [Bus(id=1, kind=SLACK)] + [Bus(id=i, kind=PQ, load_p=2.0, load_q=0.5)
                                       for i in (2, 3, 4, 5)]
    branches = [
        Branch(id=i, from_bus=a, to_bus=b, resistance=0.01, reactance=0.03)
        for i, (a, b) in enumerate([(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (2, 5)], start=1)
    ]
    net = build_network(buses, branches)
    case = Case(
        id=1, state=NetworkState.of(net), problem=Problem(kind="branch_fault"),
        solution=Topology([4, 6]), loss=0.5, metrics=metrics(),
    )
    degraded, shed = slack_component(apply_fault(net, failed_branches={2}))
    assert shed == []
    adapted = adapt(case, degraded)
    assert is_radial(degraded, adapted)
    outcome = revise(degraded, adapted)
    assert outcome.solution is not None and outcome.solution.converged


def test_project_topology_forces_failed_open():
    net = ring4()
    projected = project_topology(Topology([3]), (1, 2, 3, 4), apply_fault(net, failed_branches={1}))
    assert 1 not in {br.id for br in apply_fault(net, failed_branches={1}).branches}
    assert 3 in projected.open_switches


def test_repair_rejects_cycles():
    net = ring4()
    with pytest.raises(NotRadial):
        repair_radial(net, Topology())  # all closed: contains the ring cycle


# --- revision ---

def test_revise_accepts_oracle_topology(ieee14, tree_oracle):
    outcome = revise(ieee14, Topology(tree_oracle["best_open_switches"]))
    assert outcome.accepted
    assert outcome.solution.loss_total == pytest.approx(tree_oracle["best_loss_mw"], abs=1e-4)


def test_revise_rejects_voltage_violation(ieee14, tree_oracle):
    # tighten the band until the oracle-best topology fails it
    outcome = revise(ieee14, Topology(tree_oracle["best_open_switches"]), quality_limit=0.0005)
    assert not outcome.accepted
    assert outcome.metrics is not None and outcome.metrics.violation_count > 0


def test_revise_rejects_nonconvergent(ieee14):
    from gridheal.model import minimum_spanning_tree

    mst = minimum_spanning_tree(ieee14)  # known infeasible radial configuration
    outcome = revise(ieee14, mst)
    assert not outcome.accepted


def test_revise_requires_radial(ieee14):
    with pytest.raises(NotRadial):
        revise(ieee14, Topology())
