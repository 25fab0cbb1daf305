"""Exception hierarchy shared by all gridheal modules.

Every domain failure maps to one class here so callers (CLI, HTTP service)
can translate errors into stable machine-readable codes via ``error_code``.
"""

from __future__ import annotations


class GridHealError(Exception):
    """Base class for all domain errors."""

    @property
    def error_code(self) -> str:
        return type(self).__name__


# --- network construction / validation ---

class DuplicateId(GridHealError):
    pass


class DanglingEndpoint(GridHealError):
    pass


class NoSlack(GridHealError):
    pass


class MultipleSlack(GridHealError):
    pass


class DisconnectedGraph(GridHealError):
    pass


class UnknownSwitchId(GridHealError):
    pass


class NotRadial(GridHealError):
    pass


class SwitchNotOpen(GridHealError):
    pass


class SlackFailed(GridHealError):
    pass


# --- parsing / persistence ---

class MalformedCard(GridHealError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        detail = message
        if line is not None:
            detail += f" (line {line}" + (f", {column})" if column else ")")
        super().__init__(detail)
        self.line = line
        self.column = column


class MissingSection(GridHealError):
    pass


class NoSlackBus(NoSlack):
    pass


class SchemaViolation(GridHealError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class StorageError(GridHealError):
    pass


class BindError(GridHealError):
    pass


# --- power flow ---

class IslandedLoad(GridHealError):
    pass


class SingularJacobian(GridHealError):
    pass


class NotConverged(GridHealError):
    pass


# --- similarity / CBR ---

class DegenerateRange(GridHealError):
    pass


class AttributeMismatch(GridHealError):
    pass


class Unrepairable(GridHealError):
    pass


class InvalidCase(GridHealError):
    pass


# --- orchestration ---

class Unrecoverable(GridHealError):
    pass


class UnknownPlan(GridHealError):
    pass


class UnknownNetwork(GridHealError):
    pass


class NotPending(GridHealError):
    pass


class LedgerConsistencyError(GridHealError):
    """A tabu-ledger key was re-recorded with a different loss."""
