"""Single-amplitude density-matrix tensor network simulator with edge cutting."""

from qcut.circuit import (
    Circuit,
    CircuitError,
    Gate,
    RegularGraph,
    emit_circuit,
    parse_circuit,
    qaoa_circuit,
    random_regular_graph,
    standard_gate,
)
from qcut.contraction import (
    ContractionPlan,
    RankLimitError,
    best_plan,
    contract_pair,
    estimate_cost,
    execute_plan,
    greedy_plan,
    plan_from_order,
)
from qcut.cutting import (
    CutSet,
    apply_cut,
    cut_width,
    enumerate_assignments,
    ga_search,
)
from qcut.network import (
    Tensor,
    TensorNetwork,
    UndirectedGraph,
    build_network,
    network_graph,
)
from qcut.oracle import dm_simulate

__version__ = "0.1.0"

__all__ = [
    "Circuit",
    "CircuitError",
    "ContractionPlan",
    "CutSet",
    "Gate",
    "RankLimitError",
    "RegularGraph",
    "Tensor",
    "TensorNetwork",
    "UndirectedGraph",
    "apply_cut",
    "best_plan",
    "build_network",
    "contract_pair",
    "cut_width",
    "dm_simulate",
    "emit_circuit",
    "enumerate_assignments",
    "estimate_cost",
    "execute_plan",
    "ga_search",
    "network_graph",
    "parse_circuit",
    "greedy_plan",
    "plan_from_order",
    "qaoa_circuit",
    "random_regular_graph",
    "standard_gate",
]
