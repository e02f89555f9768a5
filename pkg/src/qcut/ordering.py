"""Elimination orderings, induced widths and tree decompositions.

All width computations run on the collapsed simple graph: parallel edges
are merged and never change a width. Disconnected graphs need no special
casing because elimination handles each component independently, and the
reported width is the maximum over components.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

from qcut.network import UndirectedGraph

Adjacency = dict[int, set[int]]

STRATEGIES = ("min_degree", "min_fill")


def _adjacency(g) -> Adjacency:
    if isinstance(g, UndirectedGraph):
        return g.adjacency()
    return {v: set(ns) for v, ns in g.items()}


def _fill_in(adj: Adjacency, v: int) -> int:
    nbrs = adj[v]
    missing = 0
    for a in nbrs:
        missing += len(nbrs) - 1 - len(adj[a] & nbrs)
    return missing // 2


def _eliminate(adj: Adjacency, v: int) -> set[int]:
    nbrs = adj.pop(v)
    for a in nbrs:
        na = adj[a]
        na.discard(v)
        na |= nbrs
        na.discard(a)
    return nbrs


def _greedy_order(g, seed, score: Callable[[Adjacency, int], int], radius: int) -> list[int]:
    rng = random.Random(seed)
    adj = _adjacency(g)
    cache = {v: score(adj, v) for v in adj}
    order = []
    while cache:
        best = min(cache.values())
        ties = [v for v, s in cache.items() if s == best]
        v = ties[0] if len(ties) == 1 else rng.choice(ties)
        order.append(v)
        del cache[v]
        nbrs = _eliminate(adj, v)
        dirty = set(nbrs)
        if radius > 1:
            for a in nbrs:
                dirty |= adj[a]
        for a in dirty:
            cache[a] = score(adj, a)
    return order


def min_degree_order(g, seed: int = 0) -> list[int]:
    """Greedy minimum-degree elimination with seeded random tie-breaking."""
    return _greedy_order(g, seed, lambda adj, v: len(adj[v]), radius=1)


def min_fill_order(g, seed: int = 0) -> list[int]:
    """Greedy minimum fill-in elimination with seeded random tie-breaking."""
    # a vertex's fill count depends on edges among its neighbours, which an
    # elimination can change for anything within distance two
    return _greedy_order(g, seed, _fill_in, radius=2)


ORDER_FUNCS = {"min_degree": min_degree_order, "min_fill": min_fill_order}


def _check_permutation(adj: Adjacency, order) -> None:
    if len(order) != len(adj) or set(order) != adj.keys():
        raise ValueError("elimination order is not a permutation of the graph's vertices")


def induced_width(g, order) -> int:
    """Largest neighbourhood seen when eliminating along ``order``."""
    adj = _adjacency(g)
    order = list(order)
    _check_permutation(adj, order)
    width = 0
    for v in order:
        width = max(width, len(_eliminate(adj, v)))
    return width


@dataclass
class TreeDecomposition:
    bags: list[frozenset]
    tree_edges: list[tuple[int, int]]

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def to_pace(self, n_vertices: int | None = None) -> str:
        """PACE ``.td`` text; graph vertex ``v`` is written as ``v + 1``."""
        if n_vertices is None:
            n_vertices = len(set().union(*self.bags)) if self.bags else 0
        lines = [f"s td {len(self.bags)} {self.width + 1} {n_vertices}"]
        for i, bag in enumerate(self.bags, start=1):
            lines.append(" ".join(["b", str(i), *(str(v + 1) for v in sorted(bag))]))
        lines.extend(f"{a + 1} {b + 1}" for a, b in self.tree_edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_pace(cls, text: str) -> "TreeDecomposition":
        bags: dict[int, frozenset] = {}
        edges = []
        n_bags = None
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0] == "c":
                continue
            if parts[0] == "s":
                if parts[1] != "td":
                    raise ValueError("not a tree decomposition file")
                n_bags = int(parts[2])
            elif parts[0] == "b":
                bags[int(parts[1]) - 1] = frozenset(int(x) - 1 for x in parts[2:])
            else:
                a, b = (int(x) - 1 for x in parts)
                edges.append((a, b))
        if n_bags is None:
            raise ValueError("missing 's td' line")
        return cls([bags.get(i, frozenset()) for i in range(n_bags)], edges)


def order_to_tree_decomposition(g, order, absorb: bool = True) -> TreeDecomposition:
    """Tree decomposition induced by eliminating along ``order``.

    The bag of ``v`` is ``v`` plus its fill-graph neighbours at elimination
    time, and it hangs below the bag of the earliest-eliminated of those
    neighbours. Component roots are chained together. With ``absorb``, any
    bag contained in an adjacent bag is merged into it.
    """
    adj = _adjacency(g)
    order = list(order)
    _check_permutation(adj, order)
    pos = {v: i for i, v in enumerate(order)}
    bags = []
    parent: list[int | None] = []
    for v in order:
        nbrs = _eliminate(adj, v)
        bags.append(frozenset(nbrs | {v}))
        parent.append(min((pos[a] for a in nbrs), default=None))
    roots = [i for i, p in enumerate(parent) if p is None]
    edges = [(i, p) for i, p in enumerate(parent) if p is not None]
    edges.extend(zip(roots, roots[1:]))
    if absorb:
        bags, edges = _absorb(bags, edges)
    return TreeDecomposition(bags, edges)


def _absorb(bags: list[frozenset], edges: list[tuple[int, int]]):
    nbr: dict[int, set[int]] = {i: set() for i in range(len(bags))}
    for a, b in edges:
        nbr[a].add(b)
        nbr[b].add(a)
    alive = dict(enumerate(bags))
    changed = True
    while changed:
        changed = False
        for i in list(alive):
            if i not in alive:
                continue
            for j in nbr[i]:
                if alive[i] <= alive[j]:
                    for k in nbr[i] - {j}:
                        nbr[k].discard(i)
                        nbr[k].add(j)
                        nbr[j].add(k)
                    nbr[j].discard(i)
                    del nbr[i]
                    del alive[i]
                    changed = True
                    break
    index = {old: new for new, old in enumerate(alive)}
    new_edges = sorted(
        {(min(index[a], index[b]), max(index[a], index[b])) for a in nbr for b in nbr[a]}
    )
    return list(alive.values()), new_edges


@dataclass
class ValidationReport:
    ok: bool
    condition: int | None = None
    witness: object = None
    message: str = ""

    def __bool__(self):
        return self.ok


def validate_tree_decomposition(g, td: TreeDecomposition) -> ValidationReport:
    """Check the three tree-decomposition conditions, plus tree shape.

    Condition 0 is reported when the bag graph is not a tree.
    """
    adj = _adjacency(g)
    nb = len(td.bags)
    tree: dict[int, set[int]] = {i: set() for i in range(nb)}
    for a, b in td.tree_edges:
        if not (0 <= a < nb and 0 <= b < nb) or a == b:
            return ValidationReport(False, 0, (a, b), f"bad tree edge {(a, b)}")
        tree[a].add(b)
        tree[b].add(a)
    if nb and (len(td.tree_edges) != nb - 1 or len(_reach(tree, 0, set(range(nb)))) != nb):
        return ValidationReport(False, 0, None, "bag graph is not a tree")

    covered = set().union(*td.bags) if td.bags else set()
    for v in adj:
        if v not in covered:
            return ValidationReport(False, 1, v, f"vertex {v} is in no bag")
    for u in adj:
        for v in adj[u]:
            if u < v and not any(u in b and v in b for b in td.bags):
                return ValidationReport(False, 2, (u, v), f"edge {(u, v)} is in no bag")
    for v in adj:
        holding = {i for i, b in enumerate(td.bags) if v in b}
        start = next(iter(holding))
        if _reach(tree, start, holding) != holding:
            return ValidationReport(
                False, 3, v, f"bags containing vertex {v} are not connected"
            )
    return ValidationReport(True)


def _reach(tree: dict[int, set[int]], start: int, allowed: set[int]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        for w in tree[stack.pop()]:
            if w in allowed and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def best_order(
    g,
    strategies: Iterable[str] = STRATEGIES,
    restarts: int = 1,
    seed: int = 0,
) -> tuple[list[int], int]:
    """Run every strategy ``restarts`` times and keep the narrowest order.

    Ties keep the first result in (strategy, restart) order, so the outcome
    depends only on the arguments.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    adj = _adjacency(g)
    best: tuple[list[int], int] | None = None
    for name in strategies:
        func = ORDER_FUNCS[name]
        for k in range(restarts):
            order = func(adj, f"{seed}:{name}:{k}")
            w = induced_width(adj, order)
            if best is None or w < best[1]:
                best = (order, w)
    assert best is not None, "no strategies given"
    return best


def exact_treewidth(g, max_vertices: int = 20) -> int:
    """Exact treewidth by dynamic programming over vertex subsets.

    Exponential; intended as a test oracle for small graphs.
    """
    adj = _adjacency(g)
    verts = sorted(adj)
    n = len(verts)
    if n > max_vertices:
        raise ValueError(f"exact treewidth limited to {max_vertices} vertices, got {n}")
    if n == 0:
        return -1
    idx = {v: i for i, v in enumerate(verts)}
    nbr = [sum(1 << idx[w] for w in adj[v]) for v in verts]

    def q(s: int, v: int) -> int:
        # vertices outside s+v reachable from v through s
        seen = 1 << v
        frontier = 1 << v
        out = 0
        while frontier:
            i = (frontier & -frontier).bit_length() - 1
            frontier &= frontier - 1
            nb = nbr[i] & ~seen
            seen |= nb
            frontier |= nb & s
            out |= nb & ~s
        return bin(out).count("1")

    @lru_cache(maxsize=None)
    def tw(s: int) -> int:
        if s == 0:
            return -1
        best = n
        rest = s
        while rest:
            low = rest & -rest
            rest ^= low
            v = low.bit_length() - 1
            sub = s ^ low
            best = min(best, max(tw(sub), q(sub, v)))
        return best

    return tw((1 << n) - 1)
