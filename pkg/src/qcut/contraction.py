"""Pairwise tensor contraction, contraction planning and plan execution."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from qcut.network import Tensor, TensorNetwork, network_graph
from qcut.ordering import ORDER_FUNCS, STRATEGIES, induced_width

DEFAULT_MAX_RANK = 13
BYTES_PER_ENTRY = 16


def default_max_rank() -> int:
    return int(os.environ.get("QCUT_MAX_RANK", DEFAULT_MAX_RANK))


def tensor_bytes(rank: int) -> int:
    return BYTES_PER_ENTRY * 4**rank


class RankLimitError(RuntimeError):
    """A contraction would produce a tensor above the configured rank limit."""

    def __init__(self, rank: int, max_rank: int, context: str = ""):
        self.rank = rank
        self.max_rank = max_rank
        msg = (
            f"tensor rank {rank} exceeds max_rank {max_rank} "
            f"({tensor_bytes(rank)} bytes for one tensor)"
        )
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


def contract_pair(
    e: Tensor,
    f: Tensor,
    shared_legs: Sequence[int] | None = None,
    max_rank: int | None = None,
) -> Tensor:
    """Sum ``e`` and ``f`` over their shared legs.

    The result carries the free legs of ``e`` followed by those of ``f``,
    each in its original order. ``shared_legs`` defaults to every leg label
    the two tensors have in common.
    """
    if shared_legs is None:
        shared_legs = sorted(set(e.legs) & set(f.legs))
    shared_legs = list(shared_legs)
    if not shared_legs:
        raise ValueError("tensors share no legs")
    try:
        axes_e = [e.legs.index(s) for s in shared_legs]
        axes_f = [f.legs.index(s) for s in shared_legs]
    except ValueError:
        raise ValueError(f"shared legs {shared_legs} not present on both tensors") from None
    rank = e.rank + f.rank - 2 * len(shared_legs)
    if max_rank is not None and rank > max_rank:
        raise RankLimitError(rank, max_rank)
    keep = set(shared_legs)
    legs = [x for x in e.legs if x not in keep] + [x for x in f.legs if x not in keep]
    return Tensor(np.tensordot(e.data, f.data, axes=(axes_e, axes_f)), legs)


@dataclass(frozen=True)
class PlanStep:
    a: int
    b: int
    out: int
    shared: tuple[int, ...]
    a_rank: int
    b_rank: int
    rank: int

    @property
    def workspace(self) -> int:
        """Distinct legs touched by the step."""
        return self.a_rank + self.b_rank - len(self.shared)


@dataclass
class ContractionPlan:
    """Ordered pairwise merges that reduce a network to one scalar.

    ``leftovers`` are vertices that are already rank 0 and merge with
    nothing; they are multiplied into the result at the end. A step whose
    output has rank 0 folds straight into the running scalar.
    """

    steps: list[PlanStep]
    leftovers: list[int] = field(default_factory=list)
    peak_rank: int = 0
    cost_estimate: float = 0.0
    order: list[int] | None = None

    def to_json(self) -> dict:
        return {
            "steps": [
                asdict(s) | {"shared": list(s.shared), "workspace": s.workspace}
                for s in self.steps
            ],
            "leftovers": list(self.leftovers),
            "peak_rank": self.peak_rank,
            "cost_estimate": self.cost_estimate,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContractionPlan":
        steps = [
            PlanStep(
                s["a"], s["b"], s["out"], tuple(s["shared"]), s["a_rank"], s["b_rank"], s["rank"]
            )
            for s in obj["steps"]
        ]
        return cls(steps, list(obj["leftovers"]), obj["peak_rank"], obj["cost_estimate"])

    def step_ranks(self) -> list[int]:
        return [s.rank for s in self.steps]


def plan_from_order(tn: TensorNetwork, order: Sequence[int]) -> ContractionPlan:
    """Plan a contraction that follows the elimination tree of ``order``.

    Vertices are visited in order. The cluster holding the visited vertex is
    merged into the adjacent cluster whose unvisited root comes earliest in
    the order, which is the vertex's parent in the induced tree
    decomposition. All edges between the two clusters are summed in one step.
    """
    order = list(order)
    if sorted(order) != sorted(tn.tensors):
        raise ValueError("order is not a permutation of the network's vertices")
    pos = {v: i for i, v in enumerate(order)}
    legs = {v: list(t.legs) for v, t in tn.tensors.items()}
    owner = {v: v for v in tn.tensors}  # original vertex -> current cluster id
    ends = {eid: [e.u, e.v] for eid, e in tn.edges.items()}  # edge -> clusters
    root = {v: v for v in tn.tensors}  # cluster -> its unvisited vertex
    done: set[int] = set()
    next_id = max(tn.tensors, default=-1) + 1
    steps: list[PlanStep] = []
    leftovers: list[int] = []
    peak = max((t.rank for t in tn.tensors.values()), default=0)
    cost = 0.0

    for v in order:
        c = owner[v]
        if c in done:
            continue
        nbrs = {x for eid in legs[c] for x in ends[eid] if x != c}
        if not nbrs:
            leftovers.append(c)
            done.add(c)
            continue
        target = min(nbrs, key=lambda x: pos[root[x]])
        shared = tuple(sorted(eid for eid in legs[c] if target in ends[eid]))
        keep = set(shared)
        new_legs = [x for x in legs[c] if x not in keep] + [
            x for x in legs[target] if x not in keep
        ]
        step = PlanStep(
            c, target, next_id, shared, len(legs[c]), len(legs[target]), len(new_legs)
        )
        out = next_id
        next_id += 1
        steps.append(step)
        peak = max(peak, step.rank)
        cost += 4.0**step.workspace
        for eid in new_legs:
            ends[eid] = [out if x in (c, target) else x for x in ends[eid]]
        for x in (c, target):
            del legs[x]
        legs[out] = new_legs
        root[out] = root[target]
        for orig, cl in owner.items():
            if cl == c or cl == target:
                owner[orig] = out
        if not new_legs:
            done.add(out)
    return ContractionPlan(steps, leftovers, peak, cost, order)


def greedy_plan(tn: TensorNetwork) -> ContractionPlan:
    """Repeatedly merge the adjacent pair whose result has the smallest rank.

    Ties go to the cheaper step (fewest distinct legs touched), then to the
    smallest cluster ids, so the plan is deterministic.
    """
    legs = {v: list(t.legs) for v, t in tn.tensors.items()}
    ends = {eid: [e.u, e.v] for eid, e in tn.edges.items()}
    next_id = max(tn.tensors, default=-1) + 1
    steps: list[PlanStep] = []
    leftovers = [v for v, ls in legs.items() if not ls]
    for v in leftovers:
        del legs[v]
    peak = max((t.rank for t in tn.tensors.values()), default=0)
    cost = 0.0

    while legs:
        best = None
        for eid, (a, b) in ends.items():
            a, b = min(a, b), max(a, b)
            shared = sum(1 for x in legs[a] if b in ends[x])
            rank = len(legs[a]) + len(legs[b]) - 2 * shared
            key = (rank, rank + shared, a, b)
            if best is None or key < best:
                best = key
        _, _, a, b = best
        shared = tuple(sorted(x for x in legs[a] if b in ends[x]))
        keep = set(shared)
        new_legs = [x for x in legs[a] if x not in keep] + [x for x in legs[b] if x not in keep]
        step = PlanStep(a, b, next_id, shared, len(legs[a]), len(legs[b]), len(new_legs))
        steps.append(step)
        peak = max(peak, step.rank)
        cost += 4.0**step.workspace
        for eid in shared:
            del ends[eid]
        for eid in new_legs:
            ends[eid] = [next_id if x in (a, b) else x for x in ends[eid]]
        del legs[a], legs[b]
        if new_legs:
            legs[next_id] = new_legs
        next_id += 1
    return ContractionPlan(steps, leftovers, peak, cost, None)


def execute_plan(
    tn: TensorNetwork, plan: ContractionPlan, max_rank: int | None = None
) -> complex:
    """Contract ``tn`` along ``plan`` and return the surviving scalar.

    With ``max_rank`` set, a plan whose peak rank is too large is rejected
    before any tensor is allocated.
    """
    if max_rank is not None and plan.peak_rank > max_rank:
        raise RankLimitError(plan.peak_rank, max_rank, "planned peak")
    tensors = dict(tn.tensors)
    scalar = complex(1.0)
    for step in plan.steps:
        merged = contract_pair(tensors.pop(step.a), tensors.pop(step.b), step.shared, max_rank)
        if merged.rank == 0:
            scalar *= complex(merged.data)
        else:
            tensors[step.out] = merged
    for v in plan.leftovers:
        t = tensors.pop(v)
        if t.rank:
            raise ValueError(f"leftover vertex {v} still has rank {t.rank}")
        scalar *= complex(t.data)
    if tensors:
        raise ValueError(f"plan left {len(tensors)} tensors uncontracted")
    return scalar


@dataclass(frozen=True)
class CostEstimate:
    peak_rank: int
    cost_estimate: float
    bytes_peak: int


def estimate_cost(plan: ContractionPlan) -> CostEstimate:
    """Memory and flop accounting for a plan; nothing is contracted.

    ``bytes_peak`` is the larger of the peak tensor and the most memory any
    single step holds at once (both operands plus the result).
    """
    live = tensor_bytes(plan.peak_rank)
    for s in plan.steps:
        live = max(
            live, tensor_bytes(s.a_rank) + tensor_bytes(s.b_rank) + tensor_bytes(s.rank)
        )
    return CostEstimate(plan.peak_rank, plan.cost_estimate, live)


def best_plan(
    tn: TensorNetwork,
    strategies: Iterable[str] = STRATEGIES,
    restarts: int = 1,
    seed: int = 0,
) -> ContractionPlan:
    """Plan from every portfolio order and keep the smallest (peak, cost).

    Two order-free candidates are always tried as well: the greedy pairwise
    plan, and ascending vertex ids, which for circuit networks is program
    order (a time-slice contraction whose peak rank stays near the qubit
    count). Both guard against elimination-tree plans that build far larger
    tensors than the width suggests.
    """
    g = network_graph(tn)
    adj = g.adjacency()
    best = None
    for plan in (greedy_plan(tn), plan_from_order(tn, sorted(tn.tensors))):
        key = (plan.peak_rank, plan.cost_estimate)
        if best is None or key < best[0]:
            best = (key, plan)
    for name in strategies:
        for k in range(restarts):
            order = ORDER_FUNCS[name](adj, f"{seed}:{name}:{k}")
            plan = plan_from_order(tn, order)
            key = (plan.peak_rank, plan.cost_estimate)
            if key < best[0]:
                best = (key, plan)
    return best[1]


def plan_width(tn: TensorNetwork, plan: ContractionPlan) -> int:
    """Induced width of the order an elimination-tree plan was built from."""
    if plan.order is None:
        raise ValueError("plan was not derived from an elimination order")
    return induced_width(network_graph(tn), plan.order)
