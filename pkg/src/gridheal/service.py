"""HTTP API over the orchestrator.

All payloads are JSON; every error body is machine-readable
``{"code", "message", "detail"}`` where ``code`` is the domain error class
name. An optional static bearer token (``GRIDHEAL_API_TOKEN`` or the
``token`` argument) gates every route when configured.
"""

from __future__ import annotations

import os
from contextlib import asynccontextmanager

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import cbr, casestore
from .cdf import parse_cdf, parse_native
from .errors import GridHealError, SchemaViolation, UnknownPlan
from .orchestrator import Alert, Orchestrator, RecoveryPlan

_STATUS_BY_CODE = {
    "UnknownPlan": 404,
    "UnknownNetwork": 404,
    "NotPending": 409,
    "Unrecoverable": 422,
    "SchemaViolation": 400,
    "MalformedCard": 400,
    "MissingSection": 400,
    "NoSlackBus": 400,
    "NoSlack": 400,
    "SlackFailed": 422,
    "DegenerateRange": 400,
    "AttributeMismatch": 400,
}


class NetworkUpload(BaseModel):
    format: str = Field(pattern="^(cdf|native)$")
    content: str
    network_id: str | None = None


class AlertBody(BaseModel):
    network_id: str
    kind: str
    failed_buses: list[int] = []
    failed_branches: list[int] = []
    mode: str | None = None


class RetrieveBody(BaseModel):
    network_id: str | None = None
    attributes: dict[str, float]
    weights: dict[str, float] | None = None
    threshold: float = 0.92
    limit: int | None = None
    problem_kind: str | None = None
    affected_buses: list[int] = []
    affected_branches: list[int] = []


class ApprovalBody(BaseModel):
    decision: str = Field(pattern="^(approve|reject)$")


def _quality_doc(metrics) -> dict | None:
    if metrics is None:
        return None
    return {
        "profile_sum": metrics.profile_sum,
        "violation_count": metrics.violation_count,
        "loss_ratio": metrics.loss_ratio,
    }


def _plan_doc(plan: RecoveryPlan) -> dict:
    return {
        "id": plan.id,
        "network_id": plan.network_id,
        "source": plan.source,
        "status": plan.status,
        "open_switches": list(plan.proposal.open_switches),
        "predicted_loss_mw": plan.predicted_loss,
        "predicted_quality": _quality_doc(plan.predicted_quality),
        "matched_case": plan.matched_case,
        "similarity": plan.similarity,
        "shed_buses": plan.shed_buses,
        "evaluations": plan.evaluations,
        "alert": {
            "kind": plan.alert.kind,
            "failed_buses": sorted(plan.alert.failed_buses),
            "failed_branches": sorted(plan.alert.failed_branches),
        },
    }


def _case_doc(case: cbr.Case, similarity: float | None = None) -> dict:
    doc = casestore._case_to_doc(case)
    if similarity is not None:
        doc["similarity"] = similarity
    return doc


def create_app(
    orchestrator: Orchestrator | None = None,
    token: str | None = None,
    case_base_path: str | None = None,
) -> FastAPI:
    """Build the API application around one orchestrator instance."""
    orch = orchestrator or Orchestrator()
    token = token if token is not None else os.environ.get("GRIDHEAL_API_TOKEN")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        # graceful shutdown persists the learned cases
        if app.state.case_base_path:
            casestore.save(orch.case_base, app.state.case_base_path)

    app = FastAPI(title="gridheal", version="0.1.0", lifespan=lifespan)
    app.state.orchestrator = orch
    app.state.case_base_path = case_base_path

    async def require_token(request: Request):
        if not token:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {token}":
            raise PermissionError("missing or invalid token")

    @app.exception_handler(GridHealError)
    async def domain_error(request: Request, exc: GridHealError):
        return JSONResponse(
            status_code=_STATUS_BY_CODE.get(exc.error_code, 422),
            content={"code": exc.error_code, "message": str(exc), "detail": None},
        )

    @app.exception_handler(PermissionError)
    async def auth_error(request: Request, exc: PermissionError):
        return JSONResponse(
            status_code=401,
            content={"code": "Unauthorized", "message": str(exc), "detail": None},
        )

    @app.exception_handler(ValueError)
    async def value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"code": "InvalidArgument", "message": str(exc), "detail": None},
        )

    @app.post("/networks", dependencies=[Depends(require_token)])
    def upload_network(body: NetworkUpload) -> dict:
        net = parse_cdf(body.content) if body.format == "cdf" else parse_native(body.content)
        network_id = orch.register_network(net, body.network_id)
        return {
            "network_id": network_id,
            "buses": len(net.buses),
            "branches": len(net.branches),
        }

    @app.get("/networks/{network_id}/state", dependencies=[Depends(require_token)])
    def network_state(network_id: str) -> dict:
        session = orch.session(network_id)
        net = session.current_network
        return {
            "network_id": network_id,
            "buses": len(net.buses),
            "branches": len(net.branches),
            "open_switches": list(session.current_topology.open_switches),
            "loss_mw": session.current_loss,
            "quality": _quality_doc(session.current_metrics),
            # schematic graph for clients that draw the topology
            "graph": {
                "buses": [{"id": b.id, "kind": b.kind} for b in net.buses],
                "branches": [
                    {"id": br.id, "from_bus": br.from_bus, "to_bus": br.to_bus}
                    for br in net.branches
                ],
            },
        }

    @app.post("/alerts", dependencies=[Depends(require_token)])
    def submit_alert(body: AlertBody) -> dict:
        alert = Alert(
            kind=body.kind,
            failed_buses=frozenset(body.failed_buses),
            failed_branches=frozenset(body.failed_branches),
        )
        plan = orch.handle_alert(alert, body.network_id, mode=body.mode)
        return _plan_doc(plan)

    @app.post("/retrieve", dependencies=[Depends(require_token)])
    def retrieve_cases(body: RetrieveBody) -> dict:
        missing = set(cbr.ATTRIBUTES) - set(body.attributes)
        if missing:
            raise SchemaViolation(f"attributes missing {sorted(missing)}", path="$.attributes")
        query_attrs = cbr.AttributeVector(**{k: body.attributes[k] for k in cbr.ATTRIBUTES})
        weights = cbr.SimilarityWeights(**body.weights) if body.weights else None
        if body.network_id is not None:
            state = cbr.NetworkState.of(orch.session(body.network_id).current_network)
        else:
            state = cbr.NetworkState((), (), 0.0, {})
        problem = cbr.Problem(
            kind=body.problem_kind or "bus_fault",
            affected_buses=tuple(body.affected_buses),
            affected_branches=tuple(body.affected_branches),
        )
        # an empty state (no network_id) passes the superset filter for every
        # case, turning this into pure attribute-space what-if exploration
        query = cbr.Query(state=state, problem=problem, attributes=query_attrs)
        results = cbr.retrieve(orch.case_base, query, body.threshold, weights, body.limit)
        return {"results": [_case_doc(case, sim) for case, sim in results]}

    @app.get("/cases", dependencies=[Depends(require_token)])
    def list_cases() -> dict:
        return {
            "revision": orch.case_base.revision,
            "count": len(orch.case_base),
            "cases": [_case_doc(c) for c in orch.case_base.cases()],
        }

    @app.get("/plans/{plan_id}", dependencies=[Depends(require_token)])
    def plan_status(plan_id: int) -> dict:
        plan = orch.plans.get(plan_id)
        if plan is None:
            raise UnknownPlan(f"no plan {plan_id}")
        return _plan_doc(plan)

    @app.post("/plans/{plan_id}/approval", dependencies=[Depends(require_token)])
    def plan_approval(plan_id: int, body: ApprovalBody) -> dict:
        plan = orch.approve(plan_id, body.decision)
        return _plan_doc(plan)

    return app
