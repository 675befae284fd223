"""Benchmark circuit generators, shortest-path SWAP routing and fidelity products.

Gate-list text format (one gate per line)::

    # chipletsim-circuit v1 family=ghz n=4 seed=0
    h 0
    cx 0 1
    rz 1 0.785398163397

Lines are ``opcode operand... [param]``; the parameter, when present, is
the single token containing a decimal point or exponent.  ``#`` starts a
comment.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .hexlattice import Topology
from .rng import stream

FAMILIES = ("bv", "qaoa", "ghz", "adder", "primacy", "bitcode", "hamiltonian")
MIN_QUBITS = {
    "bv": 2,
    "qaoa": 4,
    "ghz": 2,
    "adder": 4,
    "primacy": 2,
    "bitcode": 3,
    "hamiltonian": 2,
}
UTILIZATION = 0.8
PRIMACY_LAYERS = 10


class Gate(NamedTuple):
    op: str
    qubits: tuple[int, ...]
    param: float | None = None


@dataclass(frozen=True)
class Circuit:
    logical_qubit_count: int
    gates: tuple[Gate, ...]
    family: str = "custom"
    seed: int = 0

    def __post_init__(self):
        n = self.logical_qubit_count
        for g in self.gates:
            if any(not 0 <= q < n for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{n - 1}")
            if len(g.qubits) == 2 and g.qubits[0] == g.qubits[1]:
                raise ValueError(f"two-qubit gate {g} repeats an operand")
            if len(g.qubits) not in (1, 2):
                raise ValueError(f"gate {g} must act on one or two qubits")

    @property
    def two_qubit_count(self) -> int:
        return sum(len(g.qubits) == 2 for g in self.gates)

    @property
    def one_qubit_count(self) -> int:
        return sum(len(g.qubits) == 1 for g in self.gates)


# ------------------------------------------------------------------ generators


def bv_hidden_string(n: int, seed: int) -> tuple[int, ...]:
    """Hidden string for an ``n``-qubit BV circuit (``n - 1`` bits, density 0.5)."""
    g = stream(seed, "bv", n)
    return tuple(int(b) for b in g.integers(0, 2, size=n - 1))


def _bv(n, seed):
    anc = n - 1
    gates = [Gate("x", (anc,))]
    gates += [Gate("h", (q,)) for q in range(n)]
    for i, bit in enumerate(bv_hidden_string(n, seed)):
        if bit:
            gates.append(Gate("cx", (i, anc)))
    gates += [Gate("h", (q,)) for q in range(n - 1)]
    return gates


def random_regular_edges(n: int, degree: int, g: np.random.Generator, tries: int = 1000):
    """Simple ``degree``-regular graph on ``n`` nodes by the pairing model."""
    if (n * degree) % 2 or degree >= n:
        raise ValueError(f"no simple {degree}-regular graph on {n} nodes")
    for _ in range(tries):
        stubs = np.repeat(np.arange(n), degree)
        g.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {tuple(sorted(map(int, p))) for p in pairs}
        if len(edges) == len(pairs):
            return sorted(edges)
    raise RuntimeError("pairing model did not produce a simple graph")


def _qaoa(n, seed):
    """p=1 MaxCut on a random 3-regular graph; odd ``n`` leaves the last qubit uncoupled."""
    g = stream(seed, "qaoa", n)
    m = n - (n % 2)
    edges = random_regular_edges(m, 3, g)
    gamma, beta = g.uniform(0, math.pi), g.uniform(0, math.pi / 2)
    gates = [Gate("h", (q,)) for q in range(n)]
    for a, b in edges:
        gates += [Gate("cx", (a, b)), Gate("rz", (b,), 2 * gamma), Gate("cx", (a, b))]
    gates += [Gate("rx", (q,), 2 * beta) for q in range(n)]
    return gates


def _ghz(n, seed):
    return [Gate("h", (0,))] + [Gate("cx", (i, i + 1)) for i in range(n - 1)]


def _ccx(a, b, c):
    return [
        Gate("h", (c,)), Gate("cx", (b, c)), Gate("tdg", (c,)), Gate("cx", (a, c)),
        Gate("t", (c,)), Gate("cx", (b, c)), Gate("tdg", (c,)), Gate("cx", (a, c)),
        Gate("t", (b,)), Gate("t", (c,)), Gate("h", (c,)), Gate("cx", (a, b)),
        Gate("t", (a,)), Gate("tdg", (b,)), Gate("cx", (a, b)),
    ]  # fmt: skip


def _maj(x, y, z):
    return [Gate("cx", (z, y)), Gate("cx", (z, x))] + _ccx(x, y, z)


def _uma(x, y, z):
    return _ccx(x, y, z) + [Gate("cx", (z, x)), Gate("cx", (x, y))]


def _adder(n, seed):
    """Cuccaro ripple-carry adder on ``(n - 2) // 2``-bit operands.

    Layout: carry-in 0, then ``b_i, a_i`` interleaved, carry-out last.
    Operands are seeded and loaded with X gates.
    """
    bits = (n - 2) // 2
    c0, z = 0, 2 * bits + 1
    b = [1 + 2 * i for i in range(bits)]
    a = [2 + 2 * i for i in range(bits)]
    g = stream(seed, "adder", n)
    va, vb = g.integers(0, 2, size=bits), g.integers(0, 2, size=bits)
    gates = [Gate("x", (a[i],)) for i in range(bits) if va[i]]
    gates += [Gate("x", (b[i],)) for i in range(bits) if vb[i]]
    gates += _maj(c0, b[0], a[0])
    for i in range(1, bits):
        gates += _maj(a[i - 1], b[i], a[i])
    gates.append(Gate("cx", (a[-1], z)))
    for i in range(bits - 1, 0, -1):
        gates += _uma(a[i - 1], b[i], a[i])
    gates += _uma(c0, b[0], a[0])
    return gates


def _primacy(n, seed):
    g = stream(seed, "primacy", n)
    ops = ("sx", "sy", "sw")
    gates = []
    for _ in range(PRIMACY_LAYERS):
        choice = g.integers(0, 3, size=n)
        gates += [Gate(ops[c], (q,)) for q, c in enumerate(choice)]
        perm = g.permutation(n)
        for i in range(n // 2):
            gates.append(Gate("cz", (int(perm[2 * i]), int(perm[2 * i + 1]))))
    return gates


def bitcode_layout(n: int) -> tuple[list[int], list[int]]:
    """Data and ancilla qubit ids: data ``ceil((n+1)/2)``, ancilla ``floor((n-1)/2)``."""
    n_anc = (n - 1) // 2
    n_data = n - n_anc
    data = [2 * i for i in range(n_anc + 1)] + list(range(2 * n_anc + 1, n))
    anc = [2 * i + 1 for i in range(n_anc)]
    assert len(data) == n_data
    return data, anc


def _bitcode(n, seed):
    data, anc = bitcode_layout(n)
    gates = []
    for i, a in enumerate(anc):
        gates += [Gate("cx", (data[i], a)), Gate("cx", (data[i + 1], a))]
    return gates


def _hamiltonian(n, seed, dt=0.1, J=1.0, h=1.0):
    """One first-order Trotter step of a 1D transverse-field Ising chain."""
    gates = [Gate("rx", (q,), 2 * h * dt) for q in range(n)]
    for i in range(n - 1):
        gates += [Gate("cx", (i, i + 1)), Gate("rz", (i + 1,), 2 * J * dt), Gate("cx", (i, i + 1))]
    return gates


_GENERATORS = {
    "bv": _bv,
    "qaoa": _qaoa,
    "ghz": _ghz,
    "adder": _adder,
    "primacy": _primacy,
    "bitcode": _bitcode,
    "hamiltonian": _hamiltonian,
}


def generate_circuit(family: str, n_logical: int, seed: int = 0) -> Circuit:
    if family not in _GENERATORS:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if n_logical < MIN_QUBITS[family]:
        raise ValueError(f"{family} needs at least {MIN_QUBITS[family]} qubits, got {n_logical}")
    gates = _GENERATORS[family](n_logical, seed)
    return Circuit(n_logical, tuple(gates), family, seed)


def write_circuit(c: Circuit, path: str | Path) -> None:
    lines = [f"# chipletsim-circuit v1 family={c.family} n={c.logical_qubit_count} seed={c.seed}"]
    for g in c.gates:
        parts = [g.op, *map(str, g.qubits)]
        if g.param is not None:
            parts.append(repr(float(g.param)))
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_circuit(path: str | Path) -> Circuit:
    meta = {"family": "custom", "n": None, "seed": "0"}
    gates = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
            continue
        if not line:
            continue
        op, *rest = line.split()
        qubits = tuple(int(t) for t in rest if t.lstrip("-").isdigit())
        params = [float(t) for t in rest if not t.lstrip("-").isdigit()]
        gates.append(Gate(op, qubits, params[0] if params else None))
    n = int(meta["n"]) if meta["n"] is not None else 1 + max(q for g in gates for q in g.qubits)
    return Circuit(n, tuple(gates), meta["family"], int(meta["seed"]))


# --------------------------------------------------------------------- routing


@dataclass(frozen=True)
class RoutedCircuit:
    layout: tuple[int, ...]
    final_layout: tuple[int, ...]
    physical_gates: tuple[Gate, ...]
    swaps: int
    seed: int = 0
    source: Circuit | None = field(default=None, repr=False)

    @property
    def two_qubit_count(self) -> int:
        return sum(len(g.qubits) == 2 for g in self.physical_gates)

    @property
    def one_qubit_count(self) -> int:
        return sum(len(g.qubits) == 1 for g in self.physical_gates)

    @property
    def critical_path_2q(self) -> int:
        level: dict[int, int] = {}
        depth = 0
        for g in self.physical_gates:
            if len(g.qubits) != 2:
                continue
            a, b = g.qubits
            d = max(level.get(a, 0), level.get(b, 0)) + 1
            level[a] = level[b] = d
            depth = max(depth, d)
        return depth

    def edge_counts(self, t: Topology) -> np.ndarray:
        """Number of physical two-qubit gates on each edge of ``t``."""
        counts = np.zeros(len(t.edges), dtype=np.int64)
        for g in self.physical_gates:
            if len(g.qubits) == 2:
                e = tuple(sorted(g.qubits))
                i = t.edge_index.get(e)
                if i is None:
                    raise ValueError(f"gate {g} acts on {e}, which is not a device edge")
                counts[i] += 1
        return counts


def bfs_order(t: Topology, root: int = 0) -> list[int]:
    seen = {root}
    order = []
    q = deque([root])
    while q:
        v = q.popleft()
        order.append(v)
        for w in t.neighbors[v]:
            if w not in seen:
                seen.add(w)
                q.append(w)
    return order


def _topology(d) -> Topology:
    return d if isinstance(d, Topology) else d.topology


def route_circuit(c: Circuit, d, seed: int = 0) -> RoutedCircuit:
    """Map logical qubit ``i`` to the ``i``-th qubit of a BFS from qubit 0, then
    move the first operand of every non-adjacent pair along the
    lexicographically smallest shortest path until it neighbors the second.

    Fully deterministic; ``seed`` is only recorded.
    """
    t = _topology(d)
    n_phys = t.qubit_count
    if c.logical_qubit_count * 5 > n_phys * 4:
        raise ValueError(
            f"{c.logical_qubit_count}-qubit circuit exceeds {UTILIZATION:.0%} of a "
            f"{n_phys}-qubit device"
        )
    order = bfs_order(t)
    if len(order) < c.logical_qubit_count:
        raise ValueError("device component reachable from qubit 0 is too small")
    dist = t.distance_matrix
    l2p = order[: c.logical_qubit_count]
    p2l = {p: l for l, p in enumerate(l2p)}
    layout = tuple(l2p)
    out: list[Gate] = []
    swaps = 0
    for g in c.gates:
        if len(g.qubits) == 1:
            out.append(Gate(g.op, (l2p[g.qubits[0]],), g.param))
            continue
        la, lb = g.qubits
        pa, pb = l2p[la], l2p[lb]
        while dist[pa, pb] > 1:
            want = dist[pa, pb] - 1
            nxt = min(w for w in t.neighbors[pa] if dist[w, pb] == want)
            out += [Gate("cx", (pa, nxt)), Gate("cx", (nxt, pa)), Gate("cx", (pa, nxt))]
            swaps += 1
            other = p2l.pop(nxt, None)
            p2l.pop(pa, None)
            p2l[nxt] = la
            l2p[la] = nxt
            if other is not None:
                p2l[pa] = other
                l2p[other] = pa
            pa = nxt
        out.append(Gate(g.op, (pa, pb), g.param))
    return RoutedCircuit(layout, tuple(l2p), tuple(out), swaps, seed, c)


def log_fidelity_product(rc: RoutedCircuit, d) -> float:
    if d.edge_infidelity is None:
        raise ValueError("device has no noise assigned")
    counts = rc.edge_counts(d.topology)
    e = np.asarray(d.edge_infidelity, dtype=float)
    used = counts > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(counts[used] * np.log1p(-e[used])))


def fidelity_product(rc: RoutedCircuit, d) -> float:
    """Product of ``1 - e`` over every physical two-qubit gate (SWAPs count thrice)."""
    return math.exp(log_fidelity_product(rc, d))
