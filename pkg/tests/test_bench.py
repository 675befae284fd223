import math

import numpy as np
import pytest

from chipletsim.bench import (
    FAMILIES,
    Circuit,
    Gate,
    bitcode_layout,
    bv_hidden_string,
    fidelity_product,
    generate_circuit,
    read_circuit,
    route_circuit,
    write_circuit,
)
from chipletsim.fabsim import DeviceInstance, FrequencyPlan
from chipletsim.hexlattice import McmSpec, build_chiplet, build_monolithic


@pytest.mark.parametrize("family,n,count", [("ghz", 32, 31), ("hamiltonian", 64, 126), ("bitcode", 32, 30), ("bitcode", 64, 62)])
def test_structural_counts(family, n, count):
    assert generate_circuit(family, n, 0).two_qubit_count == count


def test_bitcode_split():
    for n in (5, 32, 33, 64):
        data, anc = bitcode_layout(n)
        assert len(data) == math.ceil((n + 1) / 2) and len(anc) == (n - 1) // 2
        assert sorted(data + anc) == list(range(n))


@pytest.mark.parametrize("n", [5, 17, 64])
def test_bv_popcount(n):
    for seed in range(5):
        c = generate_circuit("bv", n, seed)
        assert c.two_qubit_count == sum(bv_hidden_string(n, seed))


def test_qaoa_is_three_regular():
    c = generate_circuit("qaoa", 20, 3)
    pairs = [g.qubits for g in c.gates if g.op == "cx"][::2]
    deg = np.bincount(np.array(pairs).ravel(), minlength=20)
    assert np.all(deg == 3) and c.two_qubit_count == 2 * 30


def test_primacy_layers():
    c = generate_circuit("primacy", 11, 1)
    assert c.two_qubit_count == 10 * 5 and c.one_qubit_count == 10 * 11


@pytest.mark.parametrize("family", FAMILIES)
def test_generators_deterministic(family):
    a = generate_circuit(family, 24, 7)
    b = generate_circuit(family, 24, 7)
    assert a == b
    if family in ("bv", "qaoa", "adder", "primacy"):
        assert a != generate_circuit(family, 24, 8)


def test_generator_errors():
    with pytest.raises(ValueError, match="unknown family"):
        generate_circuit("shor", 10)
    with pytest.raises(ValueError, match="at least"):
        generate_circuit("qaoa", 2)


def simulate(c: Circuit) -> np.ndarray:
    """Tiny state-vector simulator for the gates the adder uses."""
    n = c.logical_qubit_count
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    one = {
        "x": np.array([[0, 1], [1, 0]]),
        "h": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
        "t": np.diag([1, np.exp(1j * np.pi / 4)]),
        "tdg": np.diag([1, np.exp(-1j * np.pi / 4)]),
    }
    for g in c.gates:
        if g.op == "cx":
            a, b = g.qubits
            idx = [slice(None)] * n
            idx[a] = 1
            sub = psi[tuple(idx)]
            axis = b - (b > a)
            psi[tuple(idx)] = np.flip(sub, axis=axis)
        else:
            (q,) = g.qubits
            psi = np.moveaxis(np.tensordot(one[g.op], psi, axes=([1], [q])), 0, q)
    return psi


@pytest.mark.parametrize("n,seed", [(6, 0), (8, 1), (8, 5), (9, 2)])
def test_adder_adds(n, seed):
    c = generate_circuit("adder", n, seed)
    bits = (n - 2) // 2
    loaded = {g.qubits[0] for g in c.gates if g.op == "x"}
    a = sum(1 << i for i in range(bits) if 2 + 2 * i in loaded)
    b = sum(1 << i for i in range(bits) if 1 + 2 * i in loaded)
    psi = simulate(c)
    idx = np.unravel_index(np.argmax(np.abs(psi)), psi.shape)
    assert abs(psi[idx]) == pytest.approx(1.0)
    s = a + b
    for i in range(bits):
        assert idx[1 + 2 * i] == (s >> i) & 1       # sum lands in b
        assert idx[2 + 2 * i] == (a >> i) & 1       # a restored
    assert idx[2 * bits + 1] == (s >> bits) & 1     # carry out
    assert idx[0] == 0


def test_gate_list_roundtrip(tmp_path):
    for fam in FAMILIES:
        c = generate_circuit(fam, 16, 2)
        write_circuit(c, tmp_path / f"{fam}.txt")
        assert read_circuit(tmp_path / f"{fam}.txt") == c
    first = (tmp_path / "qaoa.txt").read_text().splitlines()[1]
    assert first == "h 0"


def logical_replay(rc, c):
    """Undo SWAP triples to recover the logical 2q gate stream."""
    p2l = {p: l for l, p in enumerate(rc.layout)}
    gates = list(rc.physical_gates)
    out = []
    i = 0
    while i < len(gates):
        g = gates[i]
        if len(g.qubits) == 2 and i + 2 < len(gates):
            a, b = g.qubits
            if gates[i + 1].qubits == (b, a) and gates[i + 2].qubits == (a, b) and g.op == "cx":
                la, lb = p2l.pop(a, None), p2l.pop(b, None)
                if la is not None:
                    p2l[b] = la
                if lb is not None:
                    p2l[a] = lb
                i += 3
                continue
        if len(g.qubits) == 2:
            out.append((g.op, p2l[g.qubits[0]], p2l[g.qubits[1]]))
        i += 1
    return out


@pytest.mark.parametrize("family", ["ghz", "hamiltonian", "bitcode"])
def test_routing_preserves_logical_gates(family):
    t = build_monolithic(100)
    c = generate_circuit(family, 80, 1)
    rc = route_circuit(c, t)
    want = [(g.op, *g.qubits) for g in c.gates if len(g.qubits) == 2]
    assert logical_replay(rc, c) == want
    counts = rc.edge_counts(t)
    assert counts.sum() == rc.two_qubit_count
    assert rc.two_qubit_count == c.two_qubit_count + 3 * rc.swaps
    assert rc.critical_path_2q <= rc.two_qubit_count


def test_no_swaps_when_adjacent():
    t = build_chiplet(20)
    c = Circuit(2, (Gate("cx", (0, 1)),))
    rc = route_circuit(c, t)
    assert rc.swaps == 0 and rc.two_qubit_count == c.two_qubit_count


def test_routing_deterministic_and_capacity():
    t = build_monolithic(60)
    c = generate_circuit("qaoa", 48, 4)
    assert route_circuit(c, t).physical_gates == route_circuit(c, t).physical_gates
    with pytest.raises(ValueError, match="80%"):
        route_circuit(generate_circuit("ghz", 49), t)


def test_fidelity_products():
    t = build_chiplet(10)
    d = DeviceInstance(t, FrequencyPlan().ideal_frequencies(t))
    empty = route_circuit(Circuit(2, ()), t)
    assert fidelity_product(empty, d.with_noise(np.full(len(t.edges), 0.3))) == 1.0
    two = route_circuit(Circuit(2, (Gate("cx", (0, 1)), Gate("cx", (0, 1)))), t)
    assert two.swaps == 0
    e = np.where(two.edge_counts(t) > 0, 0.01, 0.0)
    assert (e > 0).sum() == 1
    assert fidelity_product(two, d.with_noise(e)) == pytest.approx(0.9801)
    big = build_monolithic(40)
    dz = DeviceInstance(big, FrequencyPlan().ideal_frequencies(big), np.zeros(len(big.edges)))
    assert fidelity_product(route_circuit(generate_circuit("ghz", 32), big), dz) == 1.0


def test_fidelity_strictly_decreasing():
    t = build_monolithic(40)
    d = DeviceInstance(t, FrequencyPlan().ideal_frequencies(t), np.full(len(t.edges), 0.02))
    c = generate_circuit("ghz", 20)
    longer = Circuit(20, c.gates + (Gate("cx", (3, 4)),))
    f1 = fidelity_product(route_circuit(c, t), d)
    f2 = fidelity_product(route_circuit(longer, t), d)
    assert 0 < f2 < f1 <= 1


def test_routed_count_on_mcm_topology():
    from chipletsim.hexlattice import stitch_mcm

    t = stitch_mcm(McmSpec.of(20, 2, 2))
    rc = route_circuit(generate_circuit("hamiltonian", 64), t)
    assert rc.two_qubit_count >= 126
