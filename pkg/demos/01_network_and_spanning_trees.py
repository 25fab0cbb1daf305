"""Networks as graphs: radial topologies, spanning trees, and loops.

Loads the bundled IEEE test systems, counts their spanning trees exactly
(the size of the reconfiguration search space), builds a minimum-spanning-
tree operating topology, and walks one branch-exchange move around a
fundamental loop.
"""

from gridheal import (
    Topology,
    count_spanning_trees,
    fundamental_loop,
    is_radial,
    load_network,
    minimum_spanning_tree,
)

DATA = "src/gridheal/data"

print("=== Search-space size: exact spanning-tree counts ===")
for name in ("ieee14", "ieee30", "ieee57", "ieee118"):
    net = load_network(f"{DATA}/{name}.cdf")
    count = count_spanning_trees(net)
    print(f"{name:8}  {len(net.buses):4} buses  {len(net.branches):4} switches"
          f"  {count:.4e} radial topologies ({count})")

print("\n=== A radial operating topology for the 14-bus system ===")
net = load_network(f"{DATA}/ieee14.cdf")
mst = minimum_spanning_tree(net)
print(f"minimum-impedance spanning tree keeps {len(net.branches) - len(mst.open_switches)}"
      f" branches closed and opens switches {list(mst.open_switches)}")
print(f"radial? {is_radial(net, mst)}")

print("\n=== Fundamental loops: the unit move of reconfiguration ===")
close_me = mst.open_switches[0]
loop = fundamental_loop(net, mst, close_me)
print(f"closing open switch {close_me} creates the cycle {loop}")
for other in loop:
    if other == close_me:
        continue
    neighbor = mst.closed(close_me).opened(other)
    print(f"  swap {close_me} in / {other} out -> radial again: {is_radial(net, neighbor)}")

restored = mst.closed(close_me).opened(close_me)
print(f"swapping {close_me} back restores the original topology: {restored == mst}")
