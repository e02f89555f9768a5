"""Circuit model: gates, circuits, the text format, and QAOA instance generation.

Qubit 0 is the most significant tensor factor everywhere in this package, so a
two-qubit gate on ``(a, b)`` acts with ``a`` as the left Kronecker factor.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

UNITARY_TOL = 1e-12
STATE_TOL = 1e-12

KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)


class CircuitError(ValueError):
    """Raised for malformed circuits, circuit text, or graph parameters."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Gate:
    name: str
    arity: int
    unitary: np.ndarray
    params: tuple[float, ...] = ()

    def __post_init__(self):
        u = np.asarray(self.unitary, dtype=complex)
        dim = 2**self.arity
        if self.arity not in (1, 2) or u.shape != (dim, dim):
            raise CircuitError(
                f"gate {self.name!r}: arity {self.arity} does not match matrix shape {u.shape}"
            )
        if not is_unitary(u):
            raise CircuitError(f"gate {self.name!r} is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def is_custom(self) -> bool:
        return self.name in ("gate1", "gate2")

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (
            self.name == other.name
            and self.arity == other.arity
            and self.params == other.params
            and np.array_equal(self.unitary, other.unitary)
        )

    def __hash__(self):
        return hash((self.name, self.arity, self.params))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def _rot(pauli: np.ndarray, theta: float) -> np.ndarray:
    # exp(-i theta P / 2) for an involutory P
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * pauli


_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_FIXED_GATES: dict[str, np.ndarray] = {
    "i": np.eye(2, dtype=complex),
    "x": _PAULI_X,
    "y": _PAULI_Y,
    "z": _PAULI_Z,
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "s": np.diag([1, 1j]),
    "t": np.diag([1, np.exp(1j * np.pi / 4)]),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "cnot": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

_PARAM_GATES = {
    "rx": (1, lambda a: _rot(_PAULI_X, a)),
    "ry": (1, lambda a: _rot(_PAULI_Y, a)),
    "rz": (1, lambda a: _rot(_PAULI_Z, a)),
    "zz": (2, lambda a: np.diag(np.exp(-1j * a * np.array([1, -1, -1, 1])))),
}

GATE_NAMES = tuple(_FIXED_GATES) + tuple(_PARAM_GATES)


def standard_gate(name: str, params: Sequence[float] = ()) -> Gate:
    """Return a library gate by (case-insensitive) name.

    Rotations use ``R_P(theta) = exp(-i theta P / 2)`` while
    ``ZZ(gamma) = exp(-i gamma Z⊗Z)`` carries no factor of one half.
    """
    key = name.lower()
    params = tuple(float(p) for p in params)
    if key in _FIXED_GATES:
        if params:
            raise CircuitError(f"gate {name!r} takes no parameters, got {len(params)}")
        u = _FIXED_GATES[key]
        return Gate(key, 1 if u.shape[0] == 2 else 2, u)
    if key in _PARAM_GATES:
        if len(params) != 1:
            raise CircuitError(f"gate {name!r} takes 1 parameter, got {len(params)}")
        arity, build = _PARAM_GATES[key]
        return Gate(key, arity, build(params[0]), params)
    raise CircuitError(f"unknown gate {name!r}")


def custom_gate(matrix) -> Gate:
    m = np.asarray(matrix, dtype=complex)
    arity = {2: 1, 4: 2}.get(m.shape[0], 0)
    return Gate(f"gate{arity}", arity, m)


def _check_density(rho: np.ndarray, what: str, trace_one: bool) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise CircuitError(f"{what} must be 2x2, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
        raise CircuitError(f"{what} is not Hermitian")
    if np.min(np.linalg.eigvalsh(rho)) < -STATE_TOL:
        raise CircuitError(f"{what} is not positive semidefinite")
    if trace_one and abs(np.trace(rho) - 1) > STATE_TOL:
        raise CircuitError(f"{what} does not have unit trace")
    rho.setflags(write=False)
    return rho


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    ops: tuple[tuple[Gate, tuple[int, ...]], ...] = ()
    inputs: tuple[np.ndarray, ...] | None = None
    measurements: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        n = self.n_qubits
        if not isinstance(n, int) or n < 1:
            raise CircuitError(f"qubit count must be a positive integer, got {n!r}")
        ops = []
        for gate, targets in self.ops:
            targets = tuple(int(q) for q in targets)
            if len(targets) != gate.arity:
                raise CircuitError(
                    f"gate {gate.name!r} needs {gate.arity} targets, got {len(targets)}"
                )
            for q in targets:
                if not 0 <= q < n:
                    raise CircuitError(f"qubit {q} out of range for {n} qubits")
            if len(set(targets)) != len(targets):
                raise CircuitError(f"gate {gate.name!r} has repeated targets {targets}")
            ops.append((gate, targets))
        object.__setattr__(self, "ops", tuple(ops))

        inputs = self.inputs if self.inputs is not None else [KET0] * n
        meas = self.measurements if self.measurements is not None else [KET0] * n
        if len(inputs) != n or len(meas) != n:
            raise CircuitError("need exactly one input and one measurement per qubit")
        object.__setattr__(
            self,
            "inputs",
            tuple(_check_density(r, f"input of qubit {q}", True) for q, r in enumerate(inputs)),
        )
        object.__setattr__(
            self,
            "measurements",
            tuple(
                _check_density(e, f"measurement of qubit {q}", False)
                for q, e in enumerate(meas)
            ),
        )

    @property
    def n_gates(self) -> int:
        return len(self.ops)

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and self.ops == other.ops
            and all(np.array_equal(a, b) for a, b in zip(self.inputs, other.inputs))
            and all(
                np.array_equal(a, b) for a, b in zip(self.measurements, other.measurements)
            )
        )

    __hash__ = None  # type: ignore[assignment]


# --------------------------------------------------------------------------
# Text format

_FLOAT = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?(?:inf|nan)"
_COMPLEX_RE = re.compile(rf"^(?P<re>{_FLOAT})(?:(?P<im>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-](?:inf|nan))i)?$")
_IMAG_ONLY_RE = re.compile(rf"^(?P<im>{_FLOAT})i$")


def parse_complex(token: str) -> complex:
    """Parse ``a+bi``, ``a-bi``, a bare real ``a`` or a bare imaginary ``bi``."""
    m = _COMPLEX_RE.match(token)
    if m:
        im = m.group("im")
        return complex(float(m.group("re")), float(im) if im else 0.0)
    m = _IMAG_ONLY_RE.match(token)
    if m:
        return complex(0.0, float(m.group("im")))
    raise ValueError(f"bad complex literal {token!r}")


def format_complex(z: complex) -> str:
    im = repr(float(z.imag))
    if not im.startswith("-"):
        im = "+" + im
    return f"{float(z.real)!r}{im}i"


def _matrix(tokens: list[str], dim: int, lineno: int) -> np.ndarray:
    if len(tokens) != dim * dim:
        raise CircuitError(f"expected {dim * dim} matrix entries, got {len(tokens)}", lineno)
    try:
        vals = [parse_complex(t) for t in tokens]
    except ValueError as exc:
        raise CircuitError(str(exc), lineno) from None
    return np.array(vals, dtype=complex).reshape(dim, dim)


def parse_circuit(text: str) -> Circuit:
    """Parse the line-oriented circuit format into a :class:`Circuit`."""
    n = None
    ops: list[tuple[Gate, tuple[int, ...]]] = []
    inputs: dict[int, np.ndarray] = {}
    meas: dict[int, np.ndarray] = {}

    def qubit(tok: str, lineno: int) -> int:
        try:
            q = int(tok)
        except ValueError:
            raise CircuitError(f"bad qubit index {tok!r}", lineno) from None
        if not 0 <= q < n:
            raise CircuitError(f"qubit {q} out of range for {n} qubits", lineno)
        return q

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        head = head.lower()
        if head == "qubits":
            if n is not None:
                raise CircuitError("duplicate 'qubits' header", lineno)
            if len(args) != 1 or not args[0].isdigit() or int(args[0]) < 1:
                raise CircuitError("'qubits' takes one positive integer", lineno)
            n = int(args[0])
            continue
        if n is None:
            raise CircuitError("missing 'qubits N' header before first statement", lineno)

        try:
            if head == "input":
                if not args:
                    raise CircuitError("'input' needs a qubit", lineno)
                q = qubit(args[0], lineno)
                inputs[q] = _check_density(_matrix(args[1:], 2, lineno), f"input of qubit {q}", True)
            elif head == "measure":
                if len(args) < 2:
                    raise CircuitError("'measure' needs a qubit and an outcome", lineno)
                q = qubit(args[0], lineno)
                if len(args) == 2 and args[1] in ("0", "1"):
                    meas[q] = KET0 if args[1] == "0" else KET1
                else:
                    meas[q] = _check_density(
                        _matrix(args[1:], 2, lineno), f"measurement of qubit {q}", False
                    )
            elif head in ("gate1", "gate2"):
                arity = int(head[-1])
                if len(args) < arity:
                    raise CircuitError(f"'{head}' needs {arity} qubits", lineno)
                targets = tuple(qubit(a, lineno) for a in args[:arity])
                ops.append((custom_gate(_matrix(args[arity:], 2**arity, lineno)), targets))
            elif head in GATE_NAMES:
                arity = 2 if head in ("cz", "cnot", "zz") else 1
                if len(args) < arity:
                    raise CircuitError(f"'{head}' needs {arity} qubits", lineno)
                targets = tuple(qubit(a, lineno) for a in args[:arity])
                try:
                    params = [float(a) for a in args[arity:]]
                except ValueError:
                    raise CircuitError(f"bad angle in {args[arity:]}", lineno) from None
                ops.append((standard_gate(head, params), targets))
            else:
                raise CircuitError(f"unknown statement {head!r}", lineno)
            if len(ops) and len(set(ops[-1][1])) != len(ops[-1][1]):
                raise CircuitError(f"repeated targets {ops[-1][1]}", lineno)
        except CircuitError as exc:
            if exc.line is None:
                raise CircuitError(str(exc), lineno) from None
            raise

    if n is None:
        raise CircuitError("missing 'qubits N' header")
    return Circuit(
        n,
        tuple(ops),
        tuple(inputs.get(q, KET0) for q in range(n)),
        tuple(meas.get(q, KET0) for q in range(n)),
    )


def emit_circuit(c: Circuit) -> str:
    """Serialize a circuit so that ``parse_circuit(emit_circuit(c)) == c``."""
    lines = [f"qubits {c.n_qubits}"]
    for q, rho in enumerate(c.inputs):
        if not np.array_equal(rho, KET0):
            lines.append(f"input {q} " + " ".join(format_complex(z) for z in rho.ravel()))
    for gate, targets in c.ops:
        qs = " ".join(str(q) for q in targets)
        if gate.is_custom:
            entries = " ".join(format_complex(z) for z in gate.unitary.ravel())
            lines.append(f"{gate.name} {qs} {entries}")
        else:
            params = "".join(f" {p!r}" for p in gate.params)
            lines.append(f"{gate.name} {qs}{params}")
    for q, e in enumerate(c.measurements):
        if np.array_equal(e, KET0):
            continue
        if np.array_equal(e, KET1):
            lines.append(f"measure {q} 1")
        else:
            lines.append(f"measure {q} " + " ".join(format_complex(z) for z in e.ravel()))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Random regular graphs and QAOA


@dataclass(frozen=True)
class RegularGraph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    degree: int = 3
    attempts: int = field(default=1, compare=False)

    def degrees(self) -> list[int]:
        deg = [0] * self.n_vertices
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_connected(self) -> bool:
        return _connected(self.n_vertices, self.edges)

    def to_text(self) -> str:
        body = "".join(f"{u} {v}\n" for u, v in self.edges)
        return f"{self.n_vertices} {len(self.edges)}\n{body}"

    @classmethod
    def from_text(cls, text: str) -> "RegularGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 2:
            raise CircuitError("graph file must start with 'N M'", 1)
        n, m = (int(x) for x in rows[0])
        if len(rows) - 1 != m:
            raise CircuitError(f"graph header says {m} edges, found {len(rows) - 1}")
        edges = []
        for i, row in enumerate(rows[1:], start=2):
            u, v = (int(x) for x in row)
            if not (0 <= u < n and 0 <= v < n):
                raise CircuitError(f"vertex out of range in edge {u} {v}", i)
            edges.append((u, v))
        degs = [0] * n
        for u, v in edges:
            degs[u] += 1
            degs[v] += 1
        return cls(n, tuple(edges), degs[0] if n else 0)


def _connected(n: int, edges) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def random_regular_graph(
    n: int, degree: int = 3, seed: int = 0, max_attempts: int = 100_000
) -> RegularGraph:
    """Sample a connected simple ``degree``-regular graph with the pairing model.

    Whole samples with loops, parallel edges, or more than one component are
    rejected and redrawn. Edges keep the order in which points were paired.
    """
    if (n * degree) % 2:
        raise CircuitError(f"no {degree}-regular graph on {n} vertices: n*degree is odd")
    if n <= degree or degree < 1:
        raise CircuitError(f"need n > degree >= 1, got n={n}, degree={degree}")
    rng = random.Random(seed)
    points = [v for v in range(n) for _ in range(degree)]
    for attempt in range(1, max_attempts + 1):
        rng.shuffle(points)
        edges = []
        seen = set()
        for i in range(0, len(points), 2):
            u, v = sorted((points[i], points[i + 1]))
            if u == v or (u, v) in seen:
                break
            seen.add((u, v))
            edges.append((u, v))
        else:
            if _connected(n, edges):
                return RegularGraph(n, tuple(edges), degree, attempt)
    raise CircuitError(
        f"failed to sample a simple connected {degree}-regular graph on {n} vertices "
        f"after {max_attempts} attempts"
    )


def qaoa_circuit(
    g: RegularGraph,
    gamma: float = 0.5,
    beta: float = 0.5,
    layers: int = 1,
    z: str | None = None,
) -> Circuit:
    """MaxCut QAOA circuit on ``g`` measured against the bitstring ``z``.

    Per layer: ZZ(gamma) on every edge in edge order, then RX(2*beta) on
    every qubit. ``z`` defaults to all zeros.
    """
    n = g.n_vertices
    if layers < 1:
        raise CircuitError(f"layers must be >= 1, got {layers}")
    if z is None:
        z = "0" * n
    if len(z) != n or set(z) - {"0", "1"}:
        raise CircuitError(f"bitstring {z!r} does not match {n} qubits")
    h = standard_gate("h")
    zz = standard_gate("zz", [gamma])
    rx = standard_gate("rx", [2 * beta])
    ops = [(h, (q,)) for q in range(n)]
    for _ in range(layers):
        ops.extend((zz, (u, v)) for u, v in g.edges)
        ops.extend((rx, (q,)) for q in range(n))
    meas = tuple(KET1 if bit == "1" else KET0 for bit in z)
    return Circuit(n, tuple(ops), None, meas)
