import itertools

import numpy as np
import pytest

from chipletsim.collision import check_device
from chipletsim.experiments import good_devices
from chipletsim.fabsim import DeviceInstance, FrequencyPlan, estimate_yield
from chipletsim.hexlattice import McmSpec, build_chiplet, build_monolithic, stitch_mcm
from chipletsim.mcm import (
    BUMP_SUCCESS,
    AssemblyFailure,
    ChipletBin,
    assemble_batch,
    attempt_mcm,
    bond_yield_factor,
    rank_chiplets,
)
from chipletsim.noise import synth_calibration

BINS = synth_calibration(0.012, 0.018, 1000, 1)
PLAN = FrequencyPlan()


def ideal_chiplet(size, trial=0, e=0.01):
    t = build_chiplet(size)
    return DeviceInstance(t, PLAN.ideal_frequencies(t), np.full(len(t.edges), e), trial)


def chiplet_bin(size, batch, seed):
    return rank_chiplets(good_devices(build_chiplet(size), PLAN, BINS, batch, seed, seed + 1))


def test_bond_factor_exact():
    assert bond_yield_factor(1) == 0.99999960642**25
    assert bond_yield_factor(0) == 1.0
    assert bond_yield_factor(1) == pytest.approx(0.99999016, abs=1e-8)
    assert bond_yield_factor(24, failure_scale=100.0) < bond_yield_factor(24)
    with pytest.raises(ValueError):
        bond_yield_factor(-1)


def test_rank_sorts_and_breaks_ties():
    devs = [ideal_chiplet(10, i, e) for i, e in enumerate([0.03, 0.01, 0.02, 0.01])]
    b = rank_chiplets(devs)
    assert b.e_avg.tolist() == pytest.approx([0.01, 0.01, 0.02, 0.03])
    assert [d.trial_index for d in b.devices] == [1, 3, 2, 0]
    assert len(rank_chiplets([])) == 0


def test_rank_rejects_mixed_designs_and_collisions():
    with pytest.raises(ValueError, match="one chiplet design"):
        rank_chiplets([ideal_chiplet(10), ideal_chiplet(20)])
    bad = ideal_chiplet(10)
    f = bad.freq.copy()
    f[0] = f[1]
    with pytest.raises(ValueError, match="collisions"):
        rank_chiplets([DeviceInstance(bad.topology, f, bad.edge_infidelity, 5)])


def test_single_slot_and_ideal_chiplets():
    r = attempt_mcm([ideal_chiplet(20)], McmSpec.of(20, 1, 1))
    assert r.reconfigurations == 0
    spec = McmSpec.of(20, 2, 2)
    r = attempt_mcm([ideal_chiplet(20, i) for i in range(4)], spec)
    assert r.reconfigurations == 0 and r.placement == (0, 1, 2, 3)
    assert check_device(r.device).collision_free


def test_wrong_chiplet_count():
    with pytest.raises(ValueError):
        attempt_mcm([ideal_chiplet(10)], McmSpec.of(10, 1, 2))


def adversarial_pair():
    """Two copies of a chiplet whose row-0 right stub sits at f(F0) - alpha/2."""
    c = ideal_chiplet(10)
    f = c.freq.copy()
    stub = [q for q in c.topology.right_stubs if c.topology.sites[q][1] == 0][0]
    f[stub] = PLAN.f0 - PLAN.alpha / 2
    d = DeviceInstance(c.topology, f, c.edge_infidelity, 0)
    assert check_device(d).collision_free
    return [d, DeviceInstance(c.topology, f, c.edge_infidelity, 1)]


def test_adversarial_pair_fails_after_all_attempts():
    chips = adversarial_pair()
    spec = McmSpec.of(10, 1, 2)
    t = stitch_mcm(spec)
    # exhaustive oracle: every placement collides
    for perm in itertools.permutations(range(2)):
        freq = np.concatenate([chips[p].freq for p in perm])
        sites = _global_sites(spec)
        order = sorted(range(len(sites)), key=lambda q: (sites[q][1], sites[q][0] == "s", sites[q][2]))
        dev = DeviceInstance(t, freq[order])
        assert not check_device(dev).collision_free
    with pytest.raises(AssemblyFailure) as exc:
        attempt_mcm(chips, spec, max_reconfig=100)
    assert exc.value.attempts == 100


def _global_sites(spec):
    """Sites of each cell's chiplet, cell by cell, in global coordinates."""
    chip = build_chiplet(spec.chiplet)
    R, W = chip.block
    out = []
    for i in range(spec.rows):
        for j in range(spec.cols):
            out += [(k, i * R + r, j * W + c) for k, r, c in chip.sites]
    return out


def test_assembled_mcms_are_collision_free_and_deterministic():
    b = chiplet_bin(20, 600, 3)
    spec = McmSpec.of(20, 2, 2)
    r1 = assemble_batch(b, spec, seed=4)
    r2 = assemble_batch(b, spec, seed=4)
    assert len(r1.mcms) > 50
    for a, c in zip(r1.mcms, r2.mcms):
        assert a.placement == c.placement and np.array_equal(a.device.freq, c.device.freq)
    for m in r1.mcms:
        assert check_device(m.device).collision_free
    assert r1.chiplets_used + r1.leftovers == len(b)
    assert sum(r1.reconfig_histogram.values()) == len(r1.mcms)
    onchip = ~r1.mcms[0].device.topology.is_link
    first = r1.mcms[0].device.edge_infidelity[onchip].mean()
    last = r1.mcms[-1].device.edge_infidelity[onchip].mean()
    assert first <= last
    assert 0 <= r1.bond_yield_factor <= 1
    assert r1.post_assembly_yield == pytest.approx(r1.chiplets_used / r1.fabricated * r1.bond_yield_factor)


def test_exact_and_short_bins():
    spec = McmSpec.of(10, 2, 2)
    exact = ChipletBin(tuple((ideal_chiplet(10, i), 0.01) for i in range(4)))
    r = assemble_batch(exact, spec)
    assert len(r.mcms) == 1 and r.leftovers == 0
    short = ChipletBin(exact.entries[:3])
    r = assemble_batch(short, spec)
    assert len(r.mcms) == 0 and r.leftovers == 3


def test_max_mcms_stops_early():
    b = chiplet_bin(10, 300, 2)
    r = assemble_batch(b, McmSpec.of(10, 2, 2), seed=1, max_mcms=5)
    assert len(r.mcms) == 5 and r.chiplets_used == 20


def test_chiplets_used_shrinks_with_grid():
    used = {2: [], 3: []}
    for seed in range(5):
        b = chiplet_bin(10, 400, 10 + seed)
        for n in used:
            used[n].append(assemble_batch(b, McmSpec.of(10, n, n), seed=seed).chiplets_used)
    assert np.mean(used[2]) >= np.mean(used[3])


def test_link_qubit_count_and_bond_factor():
    spec = McmSpec.of(10, 2, 2)
    r = assemble_batch(ChipletBin(tuple((ideal_chiplet(10, i), 0.01) for i in range(4))), spec)
    assert r.link_qubits_per_mcm == len(stitch_mcm(spec).link_qubits)
    assert r.bond_yield_factor == (BUMP_SUCCESS**25) ** r.link_qubits_per_mcm


def test_three_by_three_beats_monolithic_180():
    b = chiplet_bin(20, 10_000, 21)
    r = assemble_batch(b, McmSpec.of(20, 3, 3), seed=22, fabricated=10_000)
    mono = estimate_yield(build_monolithic(180, McmSpec.of(20, 3, 3)), PLAN, 10_000, 23)
    assert r.post_assembly_yield > mono.fraction
