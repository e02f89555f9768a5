"""Edge cutting and the genetic search for cut sets.

Fixing a cut edge to each of its four basis values gives four networks whose
amplitudes sum to the uncut amplitude. With ``m`` cut edges there are
``4**m`` such subnetworks, all with the same topology, indexed in base 4
with the first cut edge as the most significant digit.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from qcut.network import Tensor, TensorNetwork, UndirectedGraph, network_graph
from qcut.ordering import STRATEGIES, best_order

log = logging.getLogger(__name__)

DEFAULT_MAX_JOBS = 2**24


class JobLimitError(ValueError):
    pass


@dataclass(frozen=True)
class CutSet:
    edge_ids: tuple[int, ...] = ()

    def __post_init__(self):
        ids = tuple(int(e) for e in self.edge_ids)
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate edges in cut set {ids}")
        object.__setattr__(self, "edge_ids", ids)

    @property
    def m(self) -> int:
        return len(self.edge_ids)

    @property
    def n_subnetworks(self) -> int:
        return 4**self.m

    def __len__(self):
        return len(self.edge_ids)

    def __iter__(self):
        return iter(self.edge_ids)


def digits_of(index: int, m: int) -> tuple[int, ...]:
    """Base-4 digits of ``index``, most significant first."""
    if not 0 <= index < 4**m:
        raise ValueError(f"assignment id {index} outside [0, {4**m})")
    out = []
    for _ in range(m):
        index, d = divmod(index, 4)
        out.append(d)
    return tuple(reversed(out))


def index_of(digits: Sequence[int]) -> int:
    idx = 0
    for d in digits:
        idx = 4 * idx + d
    return idx


def enumerate_assignments(m: int, max_jobs: int = DEFAULT_MAX_JOBS) -> Iterator[tuple[int, ...]]:
    """Lazily yield all ``4**m`` digit vectors in lexicographic order."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if 4**m > max_jobs:
        raise JobLimitError(f"4^{m} = {4**m} subnetworks exceeds the job limit {max_jobs}")
    return itertools.product(range(4), repeat=m)


def apply_cut(tn: TensorNetwork, cut: CutSet | Sequence[int], asg: Sequence[int]) -> TensorNetwork:
    """Remove each cut edge, fixing its index to the assigned basis value.

    Both endpoint tensors are sliced at that leg, which equals attaching the
    rank-1 selector vertices to either side and contracting them in.
    """
    cut = cut if isinstance(cut, CutSet) else CutSet(tuple(cut))
    asg = tuple(asg)
    if len(asg) != cut.m:
        raise ValueError(f"assignment has {len(asg)} digits for {cut.m} cut edges")
    if not cut.m:
        return tn
    unknown = [e for e in cut if e not in tn.edges]
    if unknown:
        raise KeyError(f"unknown edge ids {unknown}")
    tensors = dict(tn.tensors)
    for eid, a in zip(cut, asg):
        if not 0 <= a < 4:
            raise ValueError(f"basis index {a} out of range")
        edge = tn.edges[eid]
        for w in (edge.u, edge.v):
            t = tensors[w]
            axis = t.legs.index(eid)
            data = t.data[(slice(None),) * axis + (a,)]
            tensors[w] = Tensor(data, t.legs[:axis] + t.legs[axis + 1 :])
    drop = set(cut.edge_ids)
    edges = {k: e for k, e in tn.edges.items() if k not in drop}
    return TensorNetwork(tensors, edges, tn.labels)


def cut_width(
    g: UndirectedGraph,
    cut: CutSet | Sequence[int],
    restarts: int = 1,
    seed: int = 0,
    strategies=STRATEGIES,
) -> int:
    """Heuristic width of ``g`` with the cut edges deleted (the GA fitness)."""
    ids = cut.edge_ids if isinstance(cut, CutSet) else tuple(cut)
    return best_order(g.without_edges(ids), strategies, restarts, seed)[1]


def graph_hash(g: UndirectedGraph) -> str:
    h = hashlib.sha256()
    h.update(repr(sorted(g.vertices)).encode())
    h.update(repr(sorted(g.edges.items())).encode())
    return h.hexdigest()


@dataclass
class GAResult:
    cut: CutSet
    width: int
    history: list[int]
    evaluations: int = 0
    initial_best: int = 0
    params: dict = field(default_factory=dict)

    def to_json(self, g: UndirectedGraph | None = None) -> dict:
        return {
            "v": 1,
            "edges": list(self.cut.edge_ids),
            "source_graph_hash": graph_hash(g) if g is not None else None,
            "width_found": self.width,
            "ga": {**self.params, "history": list(self.history)},
        }


def _sort_key(ind: tuple[int, ...], fitness: int):
    return (fitness, sum(ind), ind)


def ga_search(
    g: UndirectedGraph,
    M: int,
    N: int = 11,
    T: int = 4,
    seed: int = 0,
    restarts: int = 1,
    seed_individuals: Sequence[Sequence[int]] = (),
) -> GAResult:
    """Genetic search for ``M`` edges whose removal minimises the width.

    Each generation evaluates and sorts the population, crosses adjacent
    pairs after the best individual by swapping the tails (last ``M // 2``
    edges of the sorted edge lists), repairs duplicates with random unused
    edges, and mutates one random non-best individual by swapping one edge
    for an unused one. The best individual is never modified, so the best
    fitness cannot get worse. ``seed_individuals`` replace the first random
    members of the initial population.
    """
    edges = sorted(g.edges)
    if not edges:
        raise ValueError("graph has no edges to cut")
    if not 0 <= M <= len(edges):
        raise ValueError(f"cannot pick M={M} edges from a graph with {len(edges)} edges")
    if N < 2:
        raise ValueError("population size N must be >= 2")
    if T < 0:
        raise ValueError("iteration count T must be >= 0")

    rng = random.Random(seed)
    cache: dict[tuple[int, ...], int] = {}

    def fitness(ind: tuple[int, ...]) -> int:
        if ind not in cache:
            # fixed seed: an individual always gets the same width
            cache[ind] = cut_width(g, ind, restarts, seed)
        return cache[ind]

    def canon(ind) -> tuple[int, ...]:
        return tuple(sorted(ind))

    pop: list[tuple[int, ...]] = []
    for ind in seed_individuals[:N]:
        ind = canon(ind)
        if len(ind) != M or len(set(ind)) != M or not set(ind) <= g.edges.keys():
            raise ValueError(f"seed individual {ind} is not {M} distinct graph edges")
        pop.append(ind)
    while len(pop) < N:
        pop.append(canon(rng.sample(edges, M)))

    def evaluate(pop):
        return sorted(pop, key=lambda ind: _sort_key(ind, fitness(ind)))

    def repair(ind: list[int]) -> tuple[int, ...]:
        seen: set[int] = set()
        for i, e in enumerate(ind):
            if e in seen:
                ind[i] = rng.choice([x for x in edges if x not in seen and x not in ind])
            seen.add(ind[i])
        return canon(ind)

    history = []
    initial_best = None
    half = M // 2
    for _ in range(T):
        pop = evaluate(pop)
        history.append(fitness(pop[0]))
        if initial_best is None:
            initial_best = history[0]
        # crossover of adjacent pairs (1,2), (3,4), ... leaving pop[0] alone
        for i in range(1, N - 1, 2):
            a, b = list(pop[i]), list(pop[i + 1])
            if half:
                a[M - half :], b[M - half :] = b[M - half :], a[M - half :]
            pop[i], pop[i + 1] = repair(a), repair(b)
        if M and M < len(edges):
            j = rng.randrange(1, N)
            ind = list(pop[j])
            k = rng.randrange(M)
            ind[k] = rng.choice([x for x in edges if x not in pop[j]])
            pop[j] = canon(ind)
    pop = evaluate(pop)
    best = pop[0]
    history.append(fitness(best))
    if initial_best is None:
        initial_best = history[0]
    log.debug("ga_search M=%d: history %s, %d evaluations", M, history, len(cache))
    return GAResult(
        CutSet(best),
        fitness(best),
        history,
        len(cache),
        initial_best,
        {"M": M, "N": N, "T": T, "seed": seed},
    )


def cut_network_template(tn: TensorNetwork, cut: CutSet) -> TensorNetwork:
    """The shared topology of all subnetworks (assignment zero)."""
    return apply_cut(tn, cut, (0,) * cut.m)


def subnetwork_graph(tn: TensorNetwork, cut: CutSet) -> UndirectedGraph:
    return network_graph(tn).without_edges(cut.edge_ids)
