import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chipletsim.collision import (
    CollisionThresholds,
    check_device,
    check_pair,
    check_spectators,
    collision_free,
    collision_masks,
)
from chipletsim.fabsim import DeviceInstance, FrequencyPlan, sample_frequencies
from chipletsim.hexlattice import FrequencyClass, Topology, build_chiplet

from oracles import device_types

A = -0.33
F0, F1, F2 = FrequencyClass.F0, FrequencyClass.F1, FrequencyClass.F2


def types(events):
    return {e.type for e in events}


def test_ideal_pair_clean():
    assert check_pair(5.12, 5.00, True, A) == []


def test_equal_pair_types_1_and_4():
    assert types(check_pair(5.0, 5.0, True, A)) == {1, 4}


def test_type2_center():
    assert 2 in types(check_pair(5.12, 5.12 + A / 2, True, A))


def test_type2_uses_control_direction():
    # same numbers, roles swapped: the control is now the lower qubit
    assert 2 not in types(check_pair(5.12, 4.955, False, A))


def test_type3_both_orders():
    assert 3 in types(check_pair(5.0, 5.0 - 0.33, True, A))
    assert 3 in types(check_pair(5.0 - 0.33, 5.0, True, A))


def test_type4_straddle_edges():
    # target above the control, and target below f_c + alpha
    assert 4 in types(check_pair(5.0, 5.05, True, A))
    assert 4 in types(check_pair(5.4, 5.0, True, A))
    assert 4 not in types(check_pair(5.12, 5.0, True, A))


def test_thresholds_inclusive():
    assert 1 in types(check_pair(5.017, 5.0, False, A))
    assert 1 not in types(check_pair(5.0171, 5.0, False, A))


def test_spectator_examples():
    assert check_spectators(5.12, 5.00, 5.06, A) == []
    assert types(check_spectators(5.12, 5.03, 5.03, A)) >= {5}
    fj = 5.0
    assert 7 in types(check_spectators(5.12, fj, 2 * 5.12 + A - fj, A))
    assert 6 in types(check_spectators(5.12, 5.0, 5.0 - A, A))


def test_spectator_symmetry():
    a = check_spectators(5.11, 5.01, 4.69, A, qubits=(0, 1, 2))
    b = check_spectators(5.11, 4.69, 5.01, A, qubits=(0, 2, 1))
    assert types(a) == types(b) and types(a)


def test_custom_thresholds():
    th = CollisionThresholds(t1=0.1)
    assert 1 in types(check_pair(5.12, 5.05, True, A, th))
    with pytest.raises(ValueError):
        CollisionThresholds(t2=0.0)


def test_device_report_and_csv(tmp_path):
    t = Topology.from_edges([F2, F0], [(0, 1)])
    rep = check_device(DeviceInstance(t, np.array([5.0, 5.0])))
    assert not rep.collision_free and 1 in rep.types()
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "type,qubits,detuning_ghz,threshold_ghz"
    assert len(lines) == 1 + len(rep.events)


def test_missing_frequency_names_qubit():
    t = build_chiplet(10)
    f = FrequencyPlan().ideal_frequencies(t)
    f[7] = np.nan
    with pytest.raises(ValueError, match="qubit 7"):
        check_device(DeviceInstance(t, f))
    with pytest.raises(ValueError, match="qubit 9"):
        check_device(DeviceInstance(t, f[:9]))


def test_global_shift_invariance():
    t = build_chiplet(20)
    plan = FrequencyPlan()
    for trial in range(50):
        d = sample_frequencies(t, plan, 3, trial)
        shifted = DeviceInstance(t, d.freq + 0.137)
        assert check_device(d).counts() == check_device(shifted).counts()


def test_collision_free_targets_inside_straddle():
    t = build_chiplet(20)
    plan = FrequencyPlan()
    for trial in range(200):
        d = sample_frequencies(t, plan, 5, trial)
        if check_device(d).collision_free:
            fc, ft = d.freq[t.control_array], d.freq[t.target_array]
            assert np.all((fc + A < ft) & (ft < fc))


def test_batch_matches_scalar_reports():
    t = build_chiplet(40)
    plan = FrequencyPlan(sigma=0.02)
    devs = [sample_frequencies(t, plan, 9, i) for i in range(300)]
    F = np.stack([d.freq for d in devs])
    masks = collision_masks(F, t.control_array, t.target_array, t.spectator_triples)
    ok = collision_free(F, t)
    for i, d in enumerate(devs):
        rep = check_device(d)
        assert ok[i] == rep.collision_free
        assert {k for k, m in masks.items() if m[i]} == rep.types()


# three qubits, middle one controls both couplings, frequencies in MHz
EDGES = [(0, 1, 1), (1, 2, 1)]
TOPO = Topology.from_edges([F0, F2, F1], [(0, 1), (1, 2)])


@settings(max_examples=400, deadline=None)
@given(st.lists(st.integers(4700, 5400), min_size=3, max_size=3))
def test_matches_integer_oracle(mhz):
    d = DeviceInstance(TOPO, np.array(mhz) / 1000.0)
    assert check_device(d).types() == device_types(mhz, EDGES)
