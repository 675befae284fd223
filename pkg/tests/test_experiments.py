import dataclasses

import numpy as np
import pytest

from chipletsim.experiments import (
    build_populations,
    compare_architectures,
    compare_on_populations,
    infidelity_heatmap,
    run_assembly,
)
from chipletsim.fabsim import DeviceInstance, FrequencyPlan
from chipletsim.hexlattice import McmSpec
from chipletsim.noise import synth_calibration

BINS = synth_calibration(0.012, 0.018, 1000, 2)
PLAN = FrequencyPlan()


@pytest.fixture(scope="module")
def pop():
    return build_populations(McmSpec.of(20, 2, 2), PLAN, BINS, 400, 3)


def test_population_sizes(pop):
    assert len(pop.mono) > 0
    assert len(pop.assembly.mcms) == len(pop.mono)        # matched counts
    assert pop.link_base.shape == (len(pop.mono), int(pop.link_mask.sum()))
    assert pop.assembly.fabricated == 400 * 4


def test_ratio_monotone_in_link_ratio(pop):
    vals = [pop.e_avg_ratio(r) for r in (1.0, 2.0, 3.0, 4.17)]
    assert vals == sorted(vals)


def test_identical_devices_give_unit_ratio(pop):
    E = pop.mcm_infidelity(1.0)
    mono = [DeviceInstance(pop.topology, d.freq, E[i], i) for i, d in enumerate(pop.mcm_devices)]
    twin = dataclasses.replace(pop, mono=mono)
    cmp = compare_on_populations(twin, "ghz", 1.0, 0)
    assert cmp.fidelity_ratio == pytest.approx(1.0)
    assert cmp.e_avg_ratio == pytest.approx(1.0)


def test_infeasible_when_monolithic_yield_is_zero():
    cmp = compare_architectures("ghz", McmSpec.of(90, 2, 2), 4.17, 30, 1, BINS)
    assert cmp.infeasible and cmp.n_mono == 0


def test_heatmap_cells_and_cap():
    h = infidelity_heatmap([10, 250], [2, 3], [4.17, 1.0], 200, 5, BINS)
    assert h.cell(250, 2) is None                     # 1000 qubits, beyond the cap
    c = h.cell(10, 2)
    assert c.feasible and c.values[1.0] < c.values[4.17]
    m = h.matrix(1.0)
    assert m.shape == (2, 2) and np.isnan(m[1]).all()


def test_seed_pooling_is_deterministic():
    a = infidelity_heatmap([20], [2], [2.0], 150, [1, 2], BINS)
    b = infidelity_heatmap([20], [2], [2.0], 150, [1, 2], BINS)
    assert a == b
    assert a.cell(20, 2).n_mono > infidelity_heatmap([20], [2], [2.0], 150, 1, BINS).cell(20, 2).n_mono


def test_run_assembly_bond_modes():
    r = run_assembly(McmSpec.of(20, 2, 3), 2000, 7, BINS)
    assert r.post_assembly_yield(100.0) < r.post_assembly_yield(1.0) <= r.chiplet_yield
    assert r.post_assembly_yield(1.0) > r.mono_yield.fraction
