"""Durable case base: retention with occurrence counting, capacity-bounded
maintenance, and atomic JSON persistence.

Eviction removes the least-remembered cases first (lowest occurrence count,
then oldest last-use, then lowest id). Last-use is a logical ordinal bumped
on every retrieval hit and retention, which keeps maintenance deterministic.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Iterator

import jsonschema

from .errors import InvalidCase, SchemaViolation, StorageError
from .model import Topology
from .powerflow import QualityMetrics
from .cbr import ATTRIBUTES, Case, NetworkState, Problem

STORE_FORMAT = "grid-case-base"
STORE_VERSION = 1


class CaseBase:
    """In-memory case collection with a change counter.

    Mutations (retain, touch, maintain, eviction) bump ``revision``;
    retrieval runs against a consistent snapshot under the owner's lock.
    """

    def __init__(self, capacity: int | None = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive when set")
        self.capacity = capacity
        self.revision = 0
        self._cases: dict[int, Case] = {}
        self._next_id = 1
        self._clock = 0
        self._ranges_cache: tuple[int, dict] | None = None

    def __len__(self) -> int:
        return len(self._cases)

    def cases(self) -> Iterator[Case]:
        return iter(self._cases.values())

    def get(self, case_id: int) -> Case | None:
        return self._cases.get(case_id)

    def _tick(self) -> int:
        self._clock += 1
        return self._clock

    def touch(self, case_ids: Iterable[int]) -> None:
        """Refresh last-use of retrieval hits."""
        bumped = False
        for case_id in case_ids:
            case = self._cases.get(case_id)
            if case is not None:
                case.last_used = self._tick()
                bumped = True
        if bumped:
            self.revision += 1

    def attribute_ranges(self) -> dict:
        """[0, observed max] per attribute; [0, 1] when nothing observed.

        Recomputed whenever the base changed (keyed on the case count and
        a metric revision independent of touch-only changes).
        """
        key = self.revision
        if self._ranges_cache is not None and self._ranges_cache[0] == key:
            return self._ranges_cache[1]
        lr = ps = vc = 0.0
        for case in self._cases.values():
            m = case.metrics
            lr = max(lr, m.loss_ratio)
            ps = max(ps, m.profile_sum)
            vc = max(vc, float(m.violation_count))
        ranges = {
            "loss_ratio": (0.0, lr if lr > 0 else 1.0),
            "profile_sum": (0.0, ps if ps > 0 else 1.0),
            "violation_count": (0.0, vc if vc > 0 else 1.0),
        }
        self._ranges_cache = (key, ranges)
        return ranges

    def retain(self, candidate: Case, net=None) -> Case:
        """Remember a validated solution.

        A candidate matching an existing case (same problem, same active
        sets, same open-switch set) increments that case's occurrence count
        instead of inserting; novel candidates are inserted with count 1.
        Runs maintenance afterwards when over capacity. Returns the stored
        case. Raises InvalidCase when the solution cannot be radial on the
        recorded state.
        """
        closed = len(set(candidate.state.active_branches) - set(candidate.solution.open_switches))
        if closed != len(candidate.state.active_buses) - 1:
            raise InvalidCase(
                f"solution closes {closed} branches for {len(candidate.state.active_buses)} buses"
            )
        if net is not None:
            from .model import is_radial

            if not is_radial(net, candidate.solution):
                raise InvalidCase("solution is not radial on the supplied network")

        for case in self._cases.values():
            if case.matches(candidate):
                case.occurrences += 1
                case.last_used = self._tick()
                self.revision += 1
                return case

        case = Case(
            id=self._next_id,
            state=candidate.state,
            problem=candidate.problem,
            solution=candidate.solution,
            loss=candidate.loss,
            metrics=candidate.metrics,
            occurrences=max(1, candidate.occurrences),
            last_used=self._tick(),
        )
        self._next_id += 1
        self._cases[case.id] = case
        self.revision += 1
        if self.capacity is not None and len(self._cases) > self.capacity:
            self.maintain()
        return case

    def maintain(self) -> list[Case]:
        """Evict least-remembered cases until within capacity.

        Order: lowest occurrence count, then oldest last-use, then lowest id.
        Returns the evicted cases (empty when under capacity or unbounded).
        """
        evicted: list[Case] = []
        if self.capacity is None:
            return evicted
        while len(self._cases) > self.capacity:
            victim = min(
                self._cases.values(), key=lambda c: (c.occurrences, c.last_used, c.id)
            )
            del self._cases[victim.id]
            evicted.append(victim)
            self.revision += 1
        return evicted


# --- persistence ------------------------------------------------------------

_METRICS_SCHEMA = {
    "type": "object",
    "required": ["profile_sum", "violation_count", "loss_ratio"],
    "properties": {
        "profile_sum": {"type": "number"},
        "violation_count": {"type": "integer"},
        "loss_ratio": {"type": "number"},
    },
}

_CASE_SCHEMA = {
    "type": "object",
    "required": ["id", "state", "problem", "open_switches", "loss", "metrics", "occurrences"],
    "properties": {
        "id": {"type": "integer"},
        "state": {
            "type": "object",
            "required": ["active_buses", "active_branches", "total_load_p"],
            "properties": {
                "active_buses": {"type": "array", "items": {"type": "integer"}},
                "active_branches": {"type": "array", "items": {"type": "integer"}},
                "total_load_p": {"type": "number"},
                "bus_loads": {"type": "object"},
            },
        },
        "problem": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string"},
                "affected_buses": {"type": "array", "items": {"type": "integer"}},
                "affected_branches": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "open_switches": {"type": "array", "items": {"type": "integer"}},
        "loss": {"type": "number"},
        "metrics": _METRICS_SCHEMA,
        "occurrences": {"type": "integer", "minimum": 1},
        "last_used": {"type": "integer"},
    },
}

STORE_SCHEMA = {
    "type": "object",
    "required": ["format", "version", "cases"],
    "properties": {
        "format": {"const": STORE_FORMAT},
        "version": {"type": "integer"},
        "capacity": {"type": ["integer", "null"]},
        "next_id": {"type": "integer"},
        "clock": {"type": "integer"},
        "cases": {"type": "array", "items": _CASE_SCHEMA},
    },
}


def _case_to_doc(case: Case) -> dict:
    return {
        "id": case.id,
        "state": {
            "active_buses": list(case.state.active_buses),
            "active_branches": list(case.state.active_branches),
            "total_load_p": case.state.total_load_p,
            "bus_loads": {str(k): v for k, v in sorted(case.state.bus_loads.items())},
        },
        "problem": {
            "kind": case.problem.kind,
            "affected_buses": list(case.problem.affected_buses),
            "affected_branches": list(case.problem.affected_branches),
        },
        "open_switches": list(case.solution.open_switches),
        "loss": case.loss,
        "metrics": {
            "profile_sum": case.metrics.profile_sum,
            "violation_count": case.metrics.violation_count,
            "loss_ratio": case.metrics.loss_ratio,
        },
        "occurrences": case.occurrences,
        "last_used": case.last_used,
    }


def _case_from_doc(doc: dict) -> Case:
    state = NetworkState(
        active_buses=tuple(doc["state"]["active_buses"]),
        active_branches=tuple(doc["state"]["active_branches"]),
        total_load_p=doc["state"]["total_load_p"],
        bus_loads={int(k): v for k, v in doc["state"].get("bus_loads", {}).items()},
    )
    problem = Problem(
        kind=doc["problem"]["kind"],
        affected_buses=tuple(doc["problem"].get("affected_buses", ())),
        affected_branches=tuple(doc["problem"].get("affected_branches", ())),
    )
    metrics = QualityMetrics(
        profile_sum=doc["metrics"]["profile_sum"],
        violation_count=doc["metrics"]["violation_count"],
        loss_ratio=doc["metrics"]["loss_ratio"],
    )
    return Case(
        id=doc["id"],
        state=state,
        problem=problem,
        solution=Topology(doc["open_switches"]),
        loss=doc["loss"],
        metrics=metrics,
        occurrences=doc["occurrences"],
        last_used=doc.get("last_used", 0),
    )


def save(base: CaseBase, path: str) -> None:
    """Write the base atomically (temp file + rename in the same directory)."""
    doc = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "capacity": base.capacity,
        "next_id": base._next_id,
        "clock": base._clock,
        "cases": [_case_to_doc(c) for c in base.cases()],
    }
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp_path = tempfile.mkstemp(prefix=".casebase-", dir=directory)
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp_path, path)
    except OSError as exc:
        raise StorageError(f"cannot write case base to {path}: {exc}") from exc


def load(path: str) -> CaseBase:
    """Read a case base; a malformed file raises SchemaViolation untouched."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read case base from {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, STORE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path_str = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path
        )
        raise SchemaViolation(exc.message, path=path_str) from exc

    base = CaseBase(capacity=doc.get("capacity"))
    for case_doc in doc["cases"]:
        case = _case_from_doc(case_doc)
        if case.id in base._cases:
            raise SchemaViolation(f"duplicate case id {case.id}", path="$.cases")
        base._cases[case.id] = case
    base._next_id = doc.get("next_id", max(base._cases, default=0) + 1)
    base._clock = doc.get("clock", max((c.last_used for c in base.cases()), default=0))
    return base
