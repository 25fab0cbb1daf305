"""Newton-Raphson power flow and the voltage-quality metrics.

Solves the meshed base case of each bundled system, then contrasts a good
radial topology with a poor one on the 14-bus network to show how losses
and the 5% voltage band drive the reconfiguration objective.
"""

from gridheal import Topology, load_network, quality, solve

DATA = "src/gridheal/data"

print("=== Base cases (all switches closed) ===")
for name in ("ieee14", "ieee30", "ieee57", "ieee118"):
    net = load_network(f"{DATA}/{name}.cdf")
    sol = solve(net)
    q = quality(net, sol)
    print(f"{name:8} converged in {sol.iterations} iterations, "
          f"loss {sol.loss_total:8.3f} MW, loss ratio {q.loss_ratio:.4f}, "
          f"violations {q.violation_count}")

net = load_network(f"{DATA}/ieee14.cdf")

print("\n=== Two radial topologies, very different quality ===")
good = Topology([5, 6, 7, 8, 16, 17, 19])    # loss-optimal among all 3909 trees
poor = Topology([5, 6, 7, 9, 18, 19, 20])    # a plain feeder radialization
for label, topo in (("optimal tree", good), ("naive tree", poor)):
    sol = solve(net, topo)
    q = quality(net, sol)
    worst_bus = min(sol.v_mag, key=lambda b: sol.v_mag[b])
    print(f"{label:13} loss {sol.loss_total:7.3f} MW | violations {q.violation_count}"
          f" | profile sum {q.profile_sum:.4f} pu | lowest voltage "
          f"{sol.v_mag[worst_bus]:.4f} pu at bus {worst_bus}")

print("\nPower balance sanity: branch-sum loss vs injection-sum loss")
from gridheal.powerflow import injection_loss

sol = solve(net, good)
print(f"  branch sum {sol.loss_total:.6f} MW vs injections "
      f"{injection_loss(net, good, sol):.6f} MW")
