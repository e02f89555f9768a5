"""Density-operator tensor networks built from circuits.

Every leg ranges over the basis ``[|0><0|, |0><1|, |1><0|, |1><1|]``; basis
index ``a = 2*r + c`` is the matrix unit with a one at row ``r``, column ``c``.
Tensors store one numpy axis of length 4 per leg, and each leg is labelled by
the id of the network edge attached to it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from qcut.circuit import Circuit

BASIS = tuple(np.eye(4, dtype=complex)[a].reshape(2, 2) for a in range(4))


@dataclass(frozen=True, eq=False)
class Tensor:
    data: np.ndarray
    legs: tuple[int, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        legs = tuple(int(e) for e in self.legs)
        if data.shape != (4,) * len(legs):
            raise ValueError(f"tensor of shape {data.shape} cannot carry {len(legs)} legs")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "legs", legs)

    @property
    def rank(self) -> int:
        return len(self.legs)

    def flat(self) -> np.ndarray:
        """Row-major array of the ``4**rank`` entries."""
        return self.data.reshape(-1)


def input_tensor(rho) -> np.ndarray:
    """``T[s] = tr(Pi_s^dagger rho)``, i.e. the row-major entries of rho."""
    rho = np.asarray(rho, dtype=complex)
    return np.array([np.trace(b.conj().T @ rho) for b in BASIS])


def measure_tensor(e) -> np.ndarray:
    """``T[t] = tr(E Pi_t)`` without a dagger on the basis element."""
    e = np.asarray(e, dtype=complex)
    return np.array([np.trace(e @ b) for b in BASIS])


def gate_tensor_1q(g) -> np.ndarray:
    """``T[s, t] = tr(Pi_t^dagger G Pi_s G^dagger)``; legs are (input, output)."""
    g = np.asarray(g, dtype=complex)
    out = np.empty((4, 4), dtype=complex)
    for s, bs in enumerate(BASIS):
        evolved = g @ bs @ g.conj().T
        for t, bt in enumerate(BASIS):
            out[s, t] = np.trace(bt.conj().T @ evolved)
    return out


def gate_tensor_2q(g) -> np.ndarray:
    """Two-qubit analogue of :func:`gate_tensor_1q` with legs (s1, s2, t1, t2)."""
    g = np.asarray(g, dtype=complex)
    out = np.empty((4, 4, 4, 4), dtype=complex)
    pairs = [(a, b, np.kron(BASIS[a], BASIS[b])) for a in range(4) for b in range(4)]
    for s1, s2, bs in pairs:
        evolved = g @ bs @ g.conj().T
        for t1, t2, bt in pairs:
            out[s1, s2, t1, t2] = np.trace(bt.conj().T @ evolved)
    return out


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int


@dataclass
class TensorNetwork:
    """A closed multigraph of tensors.

    ``tensors`` maps vertex id to tensor; ``edges`` maps edge id to its two
    endpoint vertices. A leg's position is looked up through the tensor's
    ``legs`` tuple, so edge records never go stale when tensors are sliced.
    """

    tensors: dict[int, Tensor]
    edges: dict[int, Edge]
    labels: dict[int, str] = field(default_factory=dict)

    def leg_of(self, vertex: int, edge_id: int) -> int:
        return self.tensors[vertex].legs.index(edge_id)

    def edge_records(self) -> list[tuple[int, tuple[int, int], tuple[int, int]]]:
        return [
            (e.id, (e.u, self.leg_of(e.u, e.id)), (e.v, self.leg_of(e.v, e.id)))
            for e in self.edges.values()
        ]

    def check_closed(self) -> None:
        """Raise unless every leg is attached to exactly one edge."""
        seen: dict[int, int] = {}
        for vid, t in self.tensors.items():
            for eid in t.legs:
                seen[eid] = seen.get(eid, 0) + 1
                edge = self.edges.get(eid)
                if edge is None or vid not in (edge.u, edge.v):
                    raise ValueError(f"leg {eid} of vertex {vid} has no matching edge")
        for eid, edge in self.edges.items():
            if edge.u == edge.v:
                raise ValueError(f"edge {eid} is a self-loop")
            if seen.get(eid) != 2:
                raise ValueError(f"edge {eid} is attached to {seen.get(eid, 0)} legs")

    def rank_signature(self) -> tuple:
        """Topology fingerprint: vertex ranks and edge endpoints with leg positions."""
        return (
            tuple(sorted((v, t.rank) for v, t in self.tensors.items())),
            tuple(sorted(self.edge_records())),
        )

    def to_json(self) -> dict:
        return {
            "vertices": [
                {
                    "id": vid,
                    "rank": t.rank,
                    "legs": list(t.legs),
                    "data": [[z.real, z.imag] for z in t.flat().tolist()],
                    **({"label": self.labels[vid]} if vid in self.labels else {}),
                }
                for vid, t in self.tensors.items()
            ],
            "edges": [
                {"id": eid, "endpoints": [list(a), list(b)]}
                for eid, a, b in self.edge_records()
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TensorNetwork":
        tensors = {}
        labels = {}
        for v in obj["vertices"]:
            flat = np.array([complex(re, im) for re, im in v["data"]], dtype=complex)
            tensors[v["id"]] = Tensor(flat.reshape((4,) * v["rank"]), v["legs"])
            if "label" in v:
                labels[v["id"]] = v["label"]
        edges = {
            e["id"]: Edge(e["id"], e["endpoints"][0][0], e["endpoints"][1][0])
            for e in obj["edges"]
        }
        tn = cls(tensors, edges, labels)
        tn.check_closed()
        return tn

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def build_network(c: Circuit) -> TensorNetwork:
    """Translate a circuit into its closed tensor network.

    Vertex ids: inputs ``0..n-1``, then gates in program order, then
    measurements. Edge ids are assigned as wire segments are consumed, so
    gate input wires come first (in program order) and the final wires into
    the measurements come last (in qubit order).
    """
    n = c.n_qubits
    tensors: dict[int, Tensor] = {}
    edges: dict[int, Edge] = {}
    labels: dict[int, str] = {}
    # per qubit: (vertex, position of the open output leg) awaiting a consumer
    frontier: list[tuple[int, int]] = []
    legs: dict[int, list[int]] = {}
    datas: dict[int, np.ndarray] = {}

    for q, rho in enumerate(c.inputs):
        datas[q] = input_tensor(rho)
        legs[q] = [-1]
        labels[q] = f"in{q}"
        frontier.append((q, 0))

    def connect(q: int, consumer: int, leg: int) -> None:
        eid = len(edges)
        producer, out_leg = frontier[q]
        legs[producer][out_leg] = eid
        legs[consumer][leg] = eid
        edges[eid] = Edge(eid, producer, consumer)

    vid = n
    for k, (gate, targets) in enumerate(c.ops):
        if gate.arity == 1:
            datas[vid] = gate_tensor_1q(gate.unitary)
        else:
            datas[vid] = gate_tensor_2q(gate.unitary)
        legs[vid] = [-1] * (2 * gate.arity)
        labels[vid] = f"g{k}:{gate.name}"
        for i, q in enumerate(targets):
            connect(q, vid, i)
            frontier[q] = (vid, gate.arity + i)
        vid += 1

    for q, e in enumerate(c.measurements):
        datas[vid] = measure_tensor(e)
        legs[vid] = [-1]
        labels[vid] = f"m{q}"
        connect(q, vid, 0)
        vid += 1

    for v, d in datas.items():
        tensors[v] = Tensor(d, legs[v])
    tn = TensorNetwork(tensors, edges, labels)
    tn.check_closed()
    return tn


class UndirectedGraph:
    """Vertex set plus an id-keyed edge list; parallel edges are allowed.

    :meth:`adjacency` gives the collapsed simple view used for width
    computations, and :meth:`edge_ids_between` maps a collapsed pair back to
    the original edge ids.
    """

    def __init__(self, vertices, edges: dict[int, tuple[int, int]] | None = None):
        self.vertices = tuple(vertices)
        self.edges = dict(edges or {})
        self._adj: dict[int, set[int]] | None = None

    @classmethod
    def from_pairs(cls, pairs, vertices=None) -> "UndirectedGraph":
        pairs = [tuple(p) for p in pairs]
        if vertices is None:
            vertices = sorted({x for p in pairs for x in p})
        return cls(vertices, dict(enumerate(pairs)))

    def adjacency(self) -> dict[int, set[int]]:
        if self._adj is None:
            adj: dict[int, set[int]] = {v: set() for v in self.vertices}
            for u, v in self.edges.values():
                if u != v:
                    adj[u].add(v)
                    adj[v].add(u)
            self._adj = adj
        return {v: set(ns) for v, ns in self._adj.items()}

    def simple_edges(self) -> set[frozenset]:
        return {frozenset(p) for p in self.edges.values() if p[0] != p[1]}

    def edge_ids_between(self, u: int, v: int) -> list[int]:
        return [eid for eid, p in self.edges.items() if set(p) == {u, v}]

    def without_edges(self, edge_ids) -> "UndirectedGraph":
        drop = set(edge_ids)
        unknown = drop - self.edges.keys()
        if unknown:
            raise KeyError(f"unknown edge ids {sorted(unknown)}")
        return UndirectedGraph(
            self.vertices, {k: p for k, p in self.edges.items() if k not in drop}
        )

    def max_degree(self) -> int:
        deg = dict.fromkeys(self.vertices, 0)
        for u, v in self.edges.values():
            deg[u] += 1
            deg[v] += 1
        return max(deg.values(), default=0)

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"UndirectedGraph({len(self.vertices)} vertices, {len(self.edges)} edges)"


def network_graph(tn: TensorNetwork) -> UndirectedGraph:
    return UndirectedGraph(
        sorted(tn.tensors), {eid: (e.u, e.v) for eid, e in sorted(tn.edges.items())}
    )
