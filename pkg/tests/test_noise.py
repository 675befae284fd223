import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chipletsim.fabsim import DeviceInstance, FrequencyPlan, sample_frequencies
from chipletsim.hexlattice import McmSpec, build_chiplet, build_monolithic, stitch_mcm
from chipletsim.noise import (
    CalibrationError,
    CalibrationSnapshot,
    DetuningBins,
    LinkNoiseConfig,
    assign_device_noise,
    avg_infidelity,
    bin_index,
    ingest_calibration,
    sample_edge_infidelity,
    synth_calibration,
)


def snapshot(gates, freqs):
    return {
        "format": "chipletsim-calibration",
        "version": 1,
        "qubits": [{"id": i, "frequency_ghz": f} for i, f in enumerate(freqs)],
        "gates": [{"pair": list(p), "infidelity": v} for p, v in gates],
    }


def test_single_edge_single_cycle():
    b = ingest_calibration(snapshot([((0, 1), [0.013])], [5.0, 5.06]))
    assert list(b.bins) == [0] and b.bins[0].tolist() == [0.013]


def test_cycles_are_averaged():
    b = ingest_calibration(snapshot([((0, 1), [0.01, 0.03])], [5.0, 5.16]))
    assert list(b.bins) == [1] and b.bins[1][0] == pytest.approx(0.02)


@pytest.mark.parametrize(
    "doc, msg",
    [
        (snapshot([], [5.0]), "no gates"),
        (snapshot([((0, 2), [0.01])], [5.0, 5.1]), "undeclared qubit 2"),
        (snapshot([((0, 1), [1.5])], [5.0, 5.1]), "outside"),
        ({"format": "other"}, "not a chipletsim-calibration"),
        ({**snapshot([((0, 1), [0.1])], [5.0, 5.1]), "version": 9}, "version"),
    ],
)
def test_malformed_snapshots(doc, msg):
    with pytest.raises(CalibrationError, match=msg):
        ingest_calibration(doc)


def test_bad_json_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(CalibrationError, match="not valid JSON"):
        ingest_calibration(p)


def test_file_roundtrip_is_lossless(tmp_path):
    b = synth_calibration(0.012, 0.018, 300, 4)
    snap = b.to_snapshot()
    snap.write(tmp_path / "cal.json")
    again = ingest_calibration(tmp_path / "cal.json")
    assert again.bins.keys() == b.bins.keys()
    for k in b.bins:
        assert np.array_equal(again.bins[k], b.bins[k])
    assert json.loads((tmp_path / "cal.json").read_text())["format"] == "chipletsim-calibration"


def test_bin_index_floor():
    assert bin_index(0.0999) == 0 and bin_index(0.1) == 1 and bin_index(-0.25) == 2


def test_synth_targets_and_seeds():
    a = synth_calibration(0.012, 0.018, 2000, 1)
    b = synth_calibration(0.012, 0.018, 2000, 2)
    for x in (a, b):
        assert abs(x.median / 0.012 - 1) < 0.05
        assert abs(x.mean / 0.018 - 1) < 0.05
        assert set(x.bins) == {0, 1, 2, 3}
    assert not np.array_equal(a.samples, b.samples)


def test_synth_degenerate_and_infeasible():
    b = synth_calibration(0.02, 0.02, 50, 0)
    assert np.all(b.samples == 0.02)
    with pytest.raises(ValueError):
        synth_calibration(0.02, 0.01, 50, 0)


def test_one_sample_bin_and_fallback():
    b = DetuningBins(((0.05, 0.011), (0.25, 0.04)))
    assert sample_edge_infidelity(b, 0.07, 1) == 0.011
    assert sample_edge_infidelity(b, 0.9, 1) == 0.04      # beyond last bin
    assert sample_edge_infidelity(b, 0.15, 1) == 0.011    # tie between bins 0 and 2 -> lower


def test_empty_bins_error():
    with pytest.raises(CalibrationError):
        DetuningBins(()).resolve(np.array([0]))


def test_two_sample_bin_mean():
    b = DetuningBins(((0.01, 0.01), (0.02, 0.03)))
    draws = b.draw(np.full(10_000, 0.05), np.random.default_rng(5))
    assert abs(draws.mean() - 0.02) <= 0.001


def test_draws_deterministic_per_seed_path():
    b = synth_calibration(0.012, 0.018, 500, 3)
    assert sample_edge_infidelity(b, 0.1, 9, 4) == sample_edge_infidelity(b, 0.1, 9, 4)


def test_monolithic_has_no_link_scaling():
    t = build_monolithic(40)
    b = synth_calibration(0.012, 0.018, 500, 3)
    d = sample_frequencies(t, FrequencyPlan(), 1, 0)
    x = assign_device_noise(d, b, LinkNoiseConfig(1.0), 5)
    y = assign_device_noise(d, b, LinkNoiseConfig(100.0), 5)
    assert np.array_equal(x.edge_infidelity, y.edge_infidelity)


def test_link_ratio_scales_and_clips():
    t = stitch_mcm(McmSpec.of(10, 2, 2))
    b = synth_calibration(0.012, 0.018, 2000, 3)
    means = []
    for i in range(400):
        d = assign_device_noise(sample_frequencies(t, FrequencyPlan(), 2, i), b, LinkNoiseConfig(4.17), 8)
        means.append(d.edge_infidelity[t.is_link].mean())
        assert np.all(d.edge_infidelity <= 1)
    assert 0.075 * 0.85 < np.mean(means) < 0.075 * 1.15
    big = assign_device_noise(sample_frequencies(t, FrequencyPlan(), 2, 0), b, LinkNoiseConfig(500.0), 8)
    assert big.edge_infidelity[t.is_link].max() == 1.0


def test_ratio_one_links_match_onchip_in_distribution():
    t = stitch_mcm(McmSpec.of(10, 2, 2))
    b = synth_calibration(0.012, 0.018, 2000, 3)
    plan = FrequencyPlan(sigma=0.0)
    as_link, as_chip = [], []
    for i in range(10_000 // len(t.edges) + 1):
        d = sample_frequencies(t, plan, 1, i)
        as_link.append(avg_infidelity(assign_device_noise(d, b, LinkNoiseConfig(1.0), 11)))
        mono = DeviceInstance(build_monolithic(40, McmSpec.of(10, 2, 2)), d.freq, trial_index=i)
        as_chip.append(avg_infidelity(assign_device_noise(mono, b, LinkNoiseConfig(1.0), 12)))
    a, c = np.array(as_link), np.array(as_chip)
    tol = 3 * np.sqrt(a.var() / len(a) + c.var() / len(c))
    assert abs(a.mean() - c.mean()) <= tol


def test_avg_infidelity():
    t = build_chiplet(10)
    d = DeviceInstance(t, FrequencyPlan().ideal_frequencies(t))
    assert avg_infidelity(d.with_noise(np.full(len(t.edges), 0.02))) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        avg_infidelity(d)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.05), st.floats(1.0, 3.0), st.integers(0, 2**31))
def test_assigned_values_in_unit_interval(median, spread, seed):
    b = synth_calibration(median, min(median * spread, 0.9), 200, seed)
    t = stitch_mcm(McmSpec.of(10, 1, 2))
    d = assign_device_noise(sample_frequencies(t, FrequencyPlan(), seed, 0), b, LinkNoiseConfig(30.0), seed)
    assert np.all((d.edge_infidelity >= 0) & (d.edge_infidelity <= 1))
