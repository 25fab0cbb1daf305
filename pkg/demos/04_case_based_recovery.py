"""The knowledge plane: retrieve, reuse, revise, retain.

Seeds a case base by solving fault scenarios with the search, then shows
that a fresh double fault is answered from memory in milliseconds (no new
search), that repeating the identical alert matches at similarity 1.0, and
that the learning loop closes: every solved fault is remembered.
"""

import time

from gridheal import load_network
from gridheal.orchestrator import AUTONOMOUS, Alert, Orchestrator

net = load_network("src/gridheal/data/ieee14.cdf")
orch = Orchestrator(mode=AUTONOMOUS, threshold=0.92)
nid = orch.register_network(net)

print("=== Seeding the case base with solved perturbations ===")
scenarios = [Alert("fault", failed_buses={b}) for b in (9, 11, 12, 14)]
scenarios += [Alert("fault", failed_branches={i}) for i in (9, 11, 15, 16, 17, 18)]
for report in orch.seed_base(nid, scenarios):
    what = sorted(report.alert.failed_buses) or sorted(report.alert.failed_branches)
    print(f"  scenario {str(what):10} -> {report.outcome}")
print(f"case base holds {len(orch.case_base)} cases "
      f"after {orch.hatsga_runs} search runs")

print("\n=== A double fault answered from memory ===")
runs_before = orch.hatsga_runs
started = time.perf_counter()
plan = orch.handle_alert(Alert("fault", failed_buses={9, 11}), nid)
elapsed = (time.perf_counter() - started) * 1e3
print(f"source           {plan.source} (search invocations: {orch.hatsga_runs - runs_before})")
print(f"matched case     {plan.matched_case} at similarity {plan.similarity:.4f}")
print(f"plan             open {list(plan.proposal.open_switches)}, "
      f"loss {plan.predicted_loss:.3f} MW, shed {plan.shed_buses}")
print(f"latency          {elapsed:.1f} ms")

print("\n=== The identical alert again: an exact memory ===")
repeat = orch.handle_alert(Alert("fault", failed_buses={9, 11}), nid)
print(f"similarity {repeat.similarity:.4f} against case {repeat.matched_case} "
      f"(occurrences now {orch.case_base.get(repeat.matched_case).occurrences})")

print("\n=== Learning loop on a fresh orchestrator ===")
orch2 = Orchestrator(mode=AUTONOMOUS, threshold=0.0)
nid2 = orch2.register_network(net)
faults = [Alert("fault", failed_branches={i}) for i in (2, 3, 12, 16, 18)]
first = [orch2.handle_alert(a, nid2).source for a in faults]
runs_after_first = orch2.hatsga_runs
replay = [orch2.handle_alert(a, nid2).source for a in faults]
print(f"first pass sources : {first} ({runs_after_first} search runs)")
print(f"replay sources     : {replay} "
      f"({orch2.hatsga_runs - runs_after_first} new search runs)")
