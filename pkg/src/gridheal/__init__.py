"""Self-healing distribution-grid reconfiguration with a case-based
reasoning knowledge plane.

The library computes minimum-loss radial topologies by branch exchange with
a persistent memoizing tabu ledger (power flows by Newton-Raphson) and
accelerates recovery from faults by retrieving, adapting, validating, and
retaining previously solved reconfiguration cases.
"""

from . import errors
from .cbr import (
    AttributeVector,
    Case,
    NetworkState,
    Problem,
    Query,
    SimilarityWeights,
    adapt,
    global_similarity,
    local_similarity,
    retrieve,
    revise,
)
from .casestore import CaseBase, load as load_case_base, save as save_case_base
from .cdf import emit_cdf, emit_native, load_network, parse_cdf, parse_native
from .hatsga import (
    HatsgaParams,
    HatsgaResult,
    TabuLedger,
    apply_fault,
    elite_subset,
    initial_topology,
    rank_candidates,
    reconfigure,
)
from .model import (
    Branch,
    Bus,
    Network,
    Topology,
    build_network,
    count_spanning_trees,
    fundamental_loop,
    is_radial,
    minimum_spanning_tree,
    slack_component,
)
from .orchestrator import Alert, Orchestrator, RecoveryPlan
from .powerflow import PowerFlowSolution, QualityMetrics, quality, solve

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "AttributeVector",
    "Branch",
    "Bus",
    "Case",
    "CaseBase",
    "HatsgaParams",
    "HatsgaResult",
    "Network",
    "NetworkState",
    "Orchestrator",
    "PowerFlowSolution",
    "Problem",
    "QualityMetrics",
    "Query",
    "RecoveryPlan",
    "SimilarityWeights",
    "TabuLedger",
    "Topology",
    "adapt",
    "apply_fault",
    "build_network",
    "count_spanning_trees",
    "elite_subset",
    "emit_cdf",
    "emit_native",
    "errors",
    "fundamental_loop",
    "global_similarity",
    "initial_topology",
    "is_radial",
    "load_case_base",
    "load_network",
    "local_similarity",
    "minimum_spanning_tree",
    "parse_cdf",
    "parse_native",
    "quality",
    "rank_candidates",
    "reconfigure",
    "retrieve",
    "revise",
    "save_case_base",
    "slack_component",
    "solve",
]
