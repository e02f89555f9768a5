"""Dense density-matrix reference simulator (test oracle)."""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from qcut.circuit import Circuit

DEFAULT_QUBIT_CAP = 10


def embed_gate(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift ``u`` acting on ``targets`` to the full ``2**n`` space.

    Qubit 0 is the most significant factor. ``targets[0]`` plays the role of
    the first factor of ``u`` whether or not the targets are adjacent.
    """
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k or any(not 0 <= q < n for q in targets):
        raise ValueError(f"bad targets {targets} for {n} qubits")
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(np.asarray(u, dtype=complex), np.eye(2 ** (n - k)))
    # axes of `full` are ordered (targets + rest) for rows, then for columns
    perm = targets + rest
    inv = np.argsort(perm)
    t = full.reshape((2,) * (2 * n))
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def dm_simulate(c: Circuit, max_qubits: int = DEFAULT_QUBIT_CAP) -> complex:
    """``tr((E_0 ⊗ ... ⊗ E_{n-1}) rho_out)`` by explicit matrix evolution."""
    n = c.n_qubits
    if n > max_qubits:
        raise ValueError(f"dense oracle capped at {max_qubits} qubits, circuit has {n}")
    rho = reduce(np.kron, c.inputs)
    for gate, targets in c.ops:
        u = embed_gate(gate.unitary, targets, n)
        rho = u @ rho @ u.conj().T
    e = reduce(np.kron, c.measurements)
    return complex(np.trace(e @ rho))
