"""Driving the HTTP API: upload a network, inject the fault, approve a plan.

Uses an in-process test client so the walkthrough needs no running server;
`gridheal serve` exposes the identical surface over a real socket.
"""

from fastapi.testclient import TestClient

from gridheal.orchestrator import Orchestrator
from gridheal.service import create_app

client = TestClient(create_app(Orchestrator()))  # manual-approval mode

print("=== POST /networks ===")
content = open("src/gridheal/data/ieee14.cdf").read()
reply = client.post("/networks", json={"format": "cdf", "content": content}).json()
print(reply)
nid = reply["network_id"]

print("\n=== GET /networks/{id}/state ===")
print(client.get(f"/networks/{nid}/state").json())

print("\n=== POST /alerts (fault on buses 9 and 11) ===")
plan = client.post("/alerts", json={
    "network_id": nid, "kind": "fault", "failed_buses": [9, 11]}).json()
print({k: plan[k] for k in ("id", "source", "status", "open_switches",
                            "predicted_loss_mw", "shed_buses")})

print("\n=== POST /plans/{id}/approval ===")
approved = client.post(f"/plans/{plan['id']}/approval", json={"decision": "approve"}).json()
print({k: approved[k] for k in ("id", "status")})

print("\n=== GET /cases (the applied plan was retained) ===")
cases = client.get("/cases").json()
print(f"count={cases['count']}")

print("\n=== POST /retrieve (what-if exploration with attribute weights) ===")
case = cases["cases"][0]
result = client.post("/retrieve", json={
    "attributes": {"loss_ratio": case["metrics"]["loss_ratio"],
                   "profile_sum": case["metrics"]["profile_sum"],
                   "violation_count": float(case["metrics"]["violation_count"])},
    "weights": {"loss_ratio": 1.0, "profile_sum": 1.0, "violation_count": 5.0},
    "threshold": 0.9,
    "problem_kind": "bus_fault",
}).json()
for row in result["results"]:
    print(f"case {row['id']} similarity {row['similarity']:.4f}")

print("\n=== Errors are machine readable ===")
print(client.post("/alerts", json={"network_id": "nope", "kind": "rebalance"}).json())
