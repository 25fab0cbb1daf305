"""Newton-Raphson AC power flow over the closed-switch subgraph.

Solves the polar-form power balance equations from a flat start, returning
per-bus voltage phasors, total real loss, and the voltage-quality metrics
that feed both the reconfiguration objective and the case attributes.

The solver is pure and deterministic: solving the same (network, topology)
twice yields bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IslandedLoad, NotConverged, SingularJacobian
from .model import PQ, PV, SLACK, Network, Topology, _reachable, closed_branches

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50


@dataclass(frozen=True)
class PowerFlowSolution:
    """Converged (or partial) state of one power-flow run.

    ``v_mag``/``v_ang`` are keyed by bus id; ``loss_total`` is in MW.
    ``max_mismatch`` is the final per-unit power residual.
    """

    v_mag: dict
    v_ang: dict
    loss_total: float
    converged: bool
    iterations: int
    max_mismatch: float


@dataclass(frozen=True)
class QualityMetrics:
    """Voltage-profile and loss quality of a solved operating state."""

    profile_sum: float
    violation_count: int
    loss_ratio: float


def _ybus(net: Network, branches) -> tuple[np.ndarray, dict]:
    pos = {b.id: i for i, b in enumerate(net.buses)}
    n = len(net.buses)
    y = np.zeros((n, n), dtype=complex)
    for br in branches:
        ys = 1.0 / complex(br.resistance, br.reactance)
        ysh = 1j * br.charging_b / 2.0
        t = br.tap
        i, j = pos[br.from_bus], pos[br.to_bus]
        y[i, i] += (ys + ysh) / (t * t)
        y[j, j] += ys + ysh
        y[i, j] += -ys / t
        y[j, i] += -ys / t
    for b in net.buses:
        y[pos[b.id], pos[b.id]] += complex(b.shunt_g, b.shunt_b)
    return y, pos


def solve(
    net: Network,
    topo: Topology | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PowerFlowSolution:
    """Run Newton-Raphson on the subgraph of closed branches.

    ``topo`` of None means all branches closed. Raises IslandedLoad when the
    closed subgraph strands a bus from the slack; a run that exhausts
    ``max_iter`` returns a partial solution flagged converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    topo = topo or Topology()
    branches = closed_branches(net, topo)
    slack_id = net.slack_id
    reachable = _reachable(net, (b.id for b in branches), start=slack_id)
    stranded = [b.id for b in net.buses if b.id not in reachable]
    if stranded:
        loaded = [i for i in stranded if abs(net.bus(i).load_p) + abs(net.bus(i).load_q) > 0]
        raise IslandedLoad(
            f"buses {loaded or stranded} are disconnected from the slack in this topology"
        )

    y, pos = _ybus(net, branches)
    n = len(net.buses)
    base = net.base_mva

    kinds = [b.kind for b in net.buses]
    pv = np.array([i for i, k in enumerate(kinds) if k == PV], dtype=int)
    pq = np.array([i for i, k in enumerate(kinds) if k == PQ], dtype=int)
    pvpq = np.array([i for i, k in enumerate(kinds) if k != SLACK], dtype=int)

    p_sched = np.array([(b.gen_p - b.load_p) / base for b in net.buses])
    q_sched = np.array([(b.gen_q - b.load_q) / base for b in net.buses])

    # flat start: PQ at 1.0 pu / 0 rad, regulated buses at their setpoints
    vm = np.ones(n)
    va = np.zeros(n)
    for i, b in enumerate(net.buses):
        if b.kind in (SLACK, PV):
            vm[i] = b.v_setpoint

    iterations = 0
    max_mismatch = np.inf
    converged = False
    for iterations in range(max_iter + 1):
        v = vm * np.exp(1j * va)
        s_calc = v * np.conj(y @ v)
        dp = p_sched[pvpq] - s_calc.real[pvpq]
        dq = q_sched[pq] - s_calc.imag[pq]
        mism = np.concatenate([dp, dq])
        max_mismatch = float(np.max(np.abs(mism))) if mism.size else 0.0
        if max_mismatch <= tol:
            converged = True
            break
        if iterations == max_iter:
            break

        # complex-form Jacobian blocks (dS/dtheta, dS/d|V|)
        ibus = y @ v
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_vn = np.diag(v / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
        ds_dvm = diag_v @ np.conj(y @ diag_vn) + np.conj(diag_i) @ diag_vn

        j11 = ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = ds_dvm[np.ix_(pvpq, pq)].real
        j21 = ds_dva[np.ix_(pq, pvpq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        jac = np.block([[j11, j12], [j21, j22]])
        try:
            dx = np.linalg.solve(jac, mism)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian("non-finite Newton step")

        va[pvpq] += dx[: pvpq.size]
        vm[pq] += dx[pvpq.size :]

    v = vm * np.exp(1j * va)
    loss_pu = 0.0
    for br in branches:
        ys = 1.0 / complex(br.resistance, br.reactance)
        i, j = pos[br.from_bus], pos[br.to_bus]
        i_series = ys * (v[i] / br.tap - v[j])
        loss_pu += br.resistance * abs(i_series) ** 2
    # bus shunt conductance also dissipates real power
    for b in net.buses:
        if b.shunt_g:
            loss_pu += b.shunt_g * vm[pos[b.id]] ** 2

    ids = [b.id for b in net.buses]
    return PowerFlowSolution(
        v_mag={i: float(vm[pos[i]]) for i in ids},
        v_ang={i: float(va[pos[i]]) for i in ids},
        loss_total=float(loss_pu * base),
        converged=converged,
        iterations=iterations,
        max_mismatch=max_mismatch,
    )


def injection_loss(net: Network, topo: Topology | None, sol: PowerFlowSolution) -> float:
    """Total loss recomputed from bus injections (independent of branch sums)."""
    branches = closed_branches(net, topo or Topology())
    y, pos = _ybus(net, branches)
    n = len(net.buses)
    v = np.zeros(n, dtype=complex)
    for b in net.buses:
        v[pos[b.id]] = sol.v_mag[b.id] * np.exp(1j * sol.v_ang[b.id])
    s = v * np.conj(y @ v)
    return float(s.real.sum() * net.base_mva)


def branch_loadings(net: Network, topo: Topology | None, sol: PowerFlowSolution) -> dict:
    """Apparent-power loading |S| (pu, from side) of every closed branch."""
    loadings = {}
    for br in closed_branches(net, topo or Topology()):
        ys = 1.0 / complex(br.resistance, br.reactance)
        vf = sol.v_mag[br.from_bus] * np.exp(1j * sol.v_ang[br.from_bus])
        vt = sol.v_mag[br.to_bus] * np.exp(1j * sol.v_ang[br.to_bus])
        i_series = ys * (vf / br.tap - vt)
        loadings[br.id] = float(abs((vf / br.tap) * np.conj(i_series)))
    return loadings


def quality(net: Network, sol: PowerFlowSolution, limit_fraction: float = 0.05) -> QualityMetrics:
    """Voltage-profile metrics of a converged solution.

    A bus violates when its magnitude deviates from its nominal by more than
    ``limit_fraction`` of nominal. loss_ratio is loss over total MW load
    (0.0 for an unloaded network).
    """
    if not sol.converged:
        raise NotConverged("quality metrics require a converged solution")
    profile = 0.0
    violations = 0
    for b in net.buses:
        dev = abs(sol.v_mag[b.id] - b.v_nominal)
        profile += dev
        if dev > limit_fraction * b.v_nominal:
            violations += 1
    load = net.total_load_p
    ratio = sol.loss_total / load if load > 0 else 0.0
    return QualityMetrics(
        profile_sum=float(profile), violation_count=violations, loss_ratio=float(ratio)
    )
