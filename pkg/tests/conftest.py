from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from qcut.circuit import GATE_NAMES, Circuit, custom_gate, standard_gate

TWO_QUBIT = ("cz", "cnot", "zz")
PARAMETRIC = ("rx", "ry", "rz", "zz")


def random_density(rng: np.random.Generator, pure: bool = False) -> np.ndarray:
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    if pure:
        v = a[:, 0]
        rho = np.outer(v, v.conj())
    else:
        rho = a @ a.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_psd(rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    e = a @ a.conj().T
    e = (e + e.conj().T) / 2
    return e / np.linalg.eigvalsh(e).max()


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(
    rng: np.random.Generator,
    n: int,
    depth: int,
    mixed: bool = True,
    custom: bool = True,
) -> Circuit:
    """Random circuit over the whole gate library plus custom unitaries."""
    names = list(GATE_NAMES) + (["gate1", "gate2"] if custom else [])
    if n == 1:
        names = [x for x in names if x not in TWO_QUBIT and x != "gate2"]
    ops = []
    for _ in range(depth):
        name = names[rng.integers(len(names))]
        if name == "gate1":
            gate = custom_gate(random_unitary(rng, 2))
        elif name == "gate2":
            gate = custom_gate(random_unitary(rng, 4))
        elif name in PARAMETRIC:
            gate = standard_gate(name, [float(rng.uniform(-np.pi, np.pi))])
        else:
            gate = standard_gate(name)
        targets = tuple(int(q) for q in rng.choice(n, size=gate.arity, replace=False))
        ops.append((gate, targets))
    if mixed:
        inputs = tuple(random_density(rng) for _ in range(n))
        meas = tuple(random_psd(rng) for _ in range(n))
    else:
        inputs = meas = None
    return Circuit(n, tuple(ops), inputs, meas)


def statevector_probability(c: Circuit, bits: str) -> float:
    """|<bits|U|0...0>|^2 by state-vector evolution (independent of the oracle)."""
    n = c.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    for gate, targets in c.ops:
        k = len(targets)
        u = gate.unitary.reshape((2,) * (2 * k))
        psi = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), list(targets)))
        psi = np.moveaxis(psi, list(range(k)), list(targets))
    return abs(psi[tuple(int(b) for b in bits)]) ** 2


def brute_force_treewidth(adj: dict[int, set[int]]) -> int:
    """Minimum induced width over every elimination order."""
    best = len(adj)
    for order in itertools.permutations(adj):
        work = {v: set(ns) for v, ns in adj.items()}
        width = 0
        for v in order:
            nbrs = work.pop(v)
            width = max(width, len(nbrs))
            if width >= best:
                break
            for a in nbrs:
                work[a] |= nbrs - {a}
                work[a].discard(v)
        best = min(best, width)
    return best


def random_graph(rng: random.Random, n: int, p: float, connected: bool = False):
    while True:
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        adj = {v: set() for v in range(n)}
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        if not connected or _is_connected(adj):
            return edges, adj


def _is_connected(adj) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


@pytest.fixture
def nprng():
    return np.random.default_rng(1234)
