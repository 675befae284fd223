"""Paired MCM and monolithic populations and the comparisons built on them.

For a chiplet size ``q_c`` and a ``k x m`` grid (``q_m = k m q_c`` qubits):

* ``batch`` monolithic dies are fabricated; the collision-free ones get
  empirical noise.
* The same wafer area yields ``batch * q_m / q_c`` chiplets.  Collision-free
  chiplets get noise, are ranked, and assembled best-first.
* The comparison uses as many MCMs as there are collision-free monolithic
  devices (or every MCM, if fewer were built), so both sides represent
  the good parts of equal wafer area.  Link noise is kept unscaled so any
  ``e_link / e_chip`` ratio can be applied to the same draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .bench import Circuit, generate_circuit, route_circuit
from .collision import collision_free
from .fabsim import DeviceInstance, FrequencyPlan, YieldEstimate, estimate_yield, frequency_matrix
from .hexlattice import McmSpec, Topology, build_chiplet, build_monolithic
from .mcm import DEFAULT_MAX_RECONFIG, AssemblyResult, assemble_batch, bond_yield_factor, rank_chiplets
from .noise import DetuningBins, link_base_draws, onchip_draws
from .parallel import run_chunks, trial_chunks
from .rng import child_seed


def _good_devices_chunk(t: Topology, plan: FrequencyPlan, bins, fseed: int, nseed: int, start: int, stop: int):
    f = frequency_matrix(t, plan, fseed, range(start, stop))
    ok = collision_free(f, t, plan.alpha, plan.thresholds)
    trials = np.arange(start, stop)[ok]
    freqs = f[ok]
    noise = np.empty((len(trials), len(t.edges)))
    for i, (tr, fr) in enumerate(zip(trials, freqs)):
        noise[i] = onchip_draws(DeviceInstance(t, fr, trial_index=int(tr)), bins, nseed)
    return trials, freqs, noise


def good_devices(
    t: Topology,
    plan: FrequencyPlan,
    bins: DetuningBins,
    count: int,
    freq_seed: int,
    noise_seed: int,
    workers: int = 1,
) -> list[DeviceInstance]:
    """Collision-free devices among trials ``0..count-1``, with on-chip noise."""
    jobs = [(t, plan, bins, freq_seed, noise_seed, a, b) for a, b in trial_chunks(0, count)]
    out = []
    for trials, freqs, noise in run_chunks(_good_devices_chunk, jobs, workers):
        for tr, fr, e in zip(trials, freqs, noise):
            out.append(
                DeviceInstance(
                    t, fr, e, int(tr), (("freq", freq_seed, int(tr)), ("noise", noise_seed, int(tr)))
                )
            )
    return out


@dataclass(frozen=True, eq=False)
class Populations:
    spec: McmSpec
    batch: int
    topology: Topology
    mono: list[DeviceInstance]
    assembly: AssemblyResult
    link_mask: np.ndarray
    link_base: np.ndarray            # (n_mcm, n_links) unscaled link draws
    mono_yield: float
    chiplet_yield: float

    @property
    def mcm_devices(self) -> list[DeviceInstance]:
        return [a.device for a in self.assembly.mcms]

    @property
    def feasible(self) -> bool:
        return bool(self.mono) and bool(self.assembly.mcms)

    def mcm_infidelity(self, ratio: float) -> np.ndarray:
        """``(n_mcm, n_edges)`` infidelities with links at ``ratio`` x base, clipped to 1."""
        E = np.stack([d.edge_infidelity for d in self.mcm_devices])
        E[:, self.link_mask] = np.minimum(1.0, ratio * self.link_base)
        return E

    def mono_infidelity(self) -> np.ndarray:
        return np.stack([d.edge_infidelity for d in self.mono])

    def e_avg_ratio(self, ratio: float) -> float:
        return pooled_e_avg_ratio([self], ratio)


def _seed_list(seeds) -> list[int]:
    out = [int(seeds)] if isinstance(seeds, (int, np.integer)) else [int(x) for x in seeds]
    if not out:
        raise ValueError("at least one seed is required")
    return out


def pooled_e_avg_ratio(pops: Sequence[Populations], ratio: float) -> float:
    """Mean E_avg over all MCMs divided by mean E_avg over all monolithic devices.

    NaN when either side is empty.
    """
    mcm = [p.mcm_infidelity(ratio).mean(axis=1) for p in pops if p.assembly.mcms]
    mono = [p.mono_infidelity().mean(axis=1) for p in pops if p.mono]
    if not mcm or not mono:
        return math.nan
    return float(np.concatenate(mcm).mean() / np.concatenate(mono).mean())


def build_populations(
    spec: McmSpec,
    plan: FrequencyPlan,
    bins: DetuningBins,
    batch: int,
    seed: int,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    workers: int = 1,
    match_count: bool = True,
) -> Populations:
    q_c, q_m = spec.chiplet.size, spec.total_qubits
    mono_t = build_monolithic(q_m, spec)
    tag = f"{mono_t.block[0]}x{mono_t.block[1]}"
    mono = good_devices(
        mono_t, plan, bins, batch,
        child_seed(seed, f"mono-freq:{tag}"), child_seed(seed, f"mono-noise:{tag}"), workers,
    )  # fmt: skip

    fabricated = batch * q_m // q_c
    chip_t = build_chiplet(spec.chiplet)
    # chiplet streams depend only on the chiplet design, so grids of the
    # same chiplet draw from one shared, prefix-consistent batch
    chips = good_devices(
        chip_t, plan, bins, fabricated,
        child_seed(seed, f"chip-freq:{q_c}"), child_seed(seed, f"chip-noise:{q_c}"), workers,
    )  # fmt: skip
    cap = len(mono) if match_count else None
    if match_count and not mono:
        cap = 0
    ranked = rank_chiplets(chips, plan.alpha, plan.thresholds)
    assembly = assemble_batch(
        ranked, spec, max_reconfig, child_seed(seed, f"assembly:{spec.rows}x{spec.cols}:{q_c}"),
        fabricated=fabricated, max_mcms=cap, alpha=plan.alpha, th=plan.thresholds,
    )  # fmt: skip
    link_seed = child_seed(seed, f"link:{spec.rows}x{spec.cols}:{q_c}")
    mask = assembly.mcms[0].device.topology.is_link if assembly.mcms else mono_t.is_link
    base = np.array([link_base_draws(a.device, bins, link_seed) for a in assembly.mcms]).reshape(
        len(assembly.mcms), int(mask.sum())
    )
    return Populations(
        spec, batch, mono_t, mono, assembly, mask, base,
        len(mono) / batch, len(chips) / fabricated if fabricated else 0.0,
    )  # fmt: skip


@dataclass(frozen=True)
class HeatmapCell:
    chiplet: int
    dim: int
    total_qubits: int
    feasible: bool
    values: dict[float, float]
    n_mono: int
    n_mcm: int


@dataclass(frozen=True)
class HeatmapResult:
    chiplet_sizes: tuple[int, ...]
    dims: tuple[int, ...]
    ratios: tuple[float, ...]
    cells: tuple[HeatmapCell, ...]

    def cell(self, chiplet: int, dim: int) -> HeatmapCell | None:
        for c in self.cells:
            if c.chiplet == chiplet and c.dim == dim:
                return c
        return None

    def matrix(self, ratio: float) -> np.ndarray:
        """Rows: chiplet size; columns: n for n x n.  NaN where out of envelope or infeasible."""
        m = np.full((len(self.chiplet_sizes), len(self.dims)), np.nan)
        for c in self.cells:
            if c.feasible:
                m[self.chiplet_sizes.index(c.chiplet), self.dims.index(c.dim)] = c.values[ratio]
        return m


def infidelity_heatmap(
    chiplet_sizes: Sequence[int],
    square_dims: Sequence[int],
    ratios: Sequence[float],
    batch: int,
    seeds: int | Sequence[int],
    bins: DetuningBins,
    plan: FrequencyPlan | None = None,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    workers: int = 1,
    qubit_cap: int = 500,
) -> HeatmapResult:
    """``E_avg(MCM) / E_avg(mono)`` for each chiplet size, ``n x n`` grid and link ratio.

    Devices from all seeds are pooled.  Cells above ``qubit_cap`` are
    skipped; cells with no collision-free monolithic device are flagged
    infeasible.
    """
    plan = plan or FrequencyPlan()
    seeds = _seed_list(seeds)
    cells = []
    for c in chiplet_sizes:
        for n in square_dims:
            if n * n * c > qubit_cap:
                continue
            spec = McmSpec.of(c, n, n, qubit_cap)
            pops = [build_populations(spec, plan, bins, batch, s, max_reconfig, workers) for s in seeds]
            vals = {r: pooled_e_avg_ratio(pops, r) for r in ratios}
            n_mono = sum(len(p.mono) for p in pops)
            n_mcm = sum(len(p.assembly.mcms) for p in pops)
            cells.append(HeatmapCell(c, n, spec.total_qubits, n_mono > 0 and n_mcm > 0, vals, n_mono, n_mcm))
    return HeatmapResult(tuple(chiplet_sizes), tuple(square_dims), tuple(ratios), tuple(cells))


@dataclass(frozen=True)
class Comparison:
    family: str
    chiplet: int
    rows: int
    cols: int
    ratio: float
    fidelity_ratio: float | None      # None: monolithic infeasible
    e_avg_ratio: float | None
    n_mono: int
    n_mcm: int
    two_qubit_gates: int
    swaps: int

    @property
    def infeasible(self) -> bool:
        return self.fidelity_ratio is None


def benchmark_circuit(family: str, total_qubits: int, seed: int) -> Circuit:
    """Circuit of ``family`` using 80% of the device's qubits."""
    return generate_circuit(family, int(total_qubits * 4 // 5), seed)


def _log_fidelities(E: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Per-device log fidelity product for gate ``counts`` per edge."""
    used = counts > 0
    with np.errstate(divide="ignore"):
        return (np.log1p(-E[:, used]) * counts[used]).sum(axis=1)


def _log_mean_exp(x: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        return float(logsumexp(x) - math.log(len(x)))


def compare_on_populations(
    pops: Populations | Sequence[Populations], family: str, ratio: float, circuit_seed: int
) -> Comparison:
    """Route one circuit on the monolithic lattice and score it on both populations.

    MCMs and the monolithic device share one lattice, so the same routed
    gate counts per edge apply to both; only the noise differs.
    """
    pops = [pops] if isinstance(pops, Populations) else list(pops)
    spec, topo = pops[0].spec, pops[0].topology
    circ = benchmark_circuit(family, spec.total_qubits, circuit_seed)
    rc = route_circuit(circ, topo, circuit_seed)
    n_mono = sum(len(p.mono) for p in pops)
    n_mcm = sum(len(p.assembly.mcms) for p in pops)
    common = dict(
        family=family, chiplet=spec.chiplet.size, rows=spec.rows, cols=spec.cols, ratio=ratio,
        n_mono=n_mono, n_mcm=n_mcm, two_qubit_gates=rc.two_qubit_count, swaps=rc.swaps,
    )  # fmt: skip
    if not n_mono or not n_mcm:
        return Comparison(fidelity_ratio=None, e_avg_ratio=None, **common)
    counts = rc.edge_counts(topo)
    lm = np.concatenate([_log_fidelities(p.mcm_infidelity(ratio), counts) for p in pops if p.assembly.mcms])
    lo = np.concatenate([_log_fidelities(p.mono_infidelity(), counts) for p in pops if p.mono])
    # overflow to inf is the right answer when every monolithic product underflows
    with np.errstate(over="ignore", invalid="ignore"):
        fr = float(np.exp(np.float64(_log_mean_exp(lm) - _log_mean_exp(lo))))
    return Comparison(
        fidelity_ratio=fr,
        e_avg_ratio=pooled_e_avg_ratio(pops, ratio),
        **common,
    )


def compare_architectures(
    family: str,
    spec: McmSpec,
    ratio: float,
    batch: int,
    seeds: int | Sequence[int],
    bins: DetuningBins,
    plan: FrequencyPlan | None = None,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    workers: int = 1,
) -> Comparison:
    """Mean fidelity product of MCMs over that of collision-free monolithic dies.

    Devices from all seeds are pooled; the circuit and its routing use the
    first seed.
    """
    plan = plan or FrequencyPlan()
    seeds = _seed_list(seeds)
    pops = [build_populations(spec, plan, bins, batch, s, max_reconfig, workers) for s in seeds]
    return compare_on_populations(pops, family, ratio, seeds[0])


@dataclass(frozen=True, eq=False)
class AssemblyRun:
    """Chiplet batch -> known-good bin -> MCMs, next to the equal-size monolithic yield."""

    spec: McmSpec
    batch: int
    chiplet_yield: float
    assembly: AssemblyResult
    mono_yield: YieldEstimate
    bond_factors: dict[float, float]      # failure scale -> factor

    def post_assembly_yield(self, failure_scale: float = 1.0) -> float:
        a = self.assembly
        return a.chiplets_used / a.fabricated * self.bond_factors[failure_scale] if a.fabricated else 0.0


def run_assembly(
    spec: McmSpec,
    batch: int,
    seed: int,
    bins: DetuningBins,
    plan: FrequencyPlan | None = None,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    failure_scales: Sequence[float] = (1.0, 100.0),
    workers: int = 1,
) -> AssemblyRun:
    """Assemble MCMs from ``batch`` fabricated chiplets; compare with ``batch`` monolithic dies."""
    plan = plan or FrequencyPlan()
    q_c = spec.chiplet.size
    chip_t = build_chiplet(spec.chiplet)
    chips = good_devices(
        chip_t, plan, bins, batch,
        child_seed(seed, f"chip-freq:{q_c}"), child_seed(seed, f"chip-noise:{q_c}"), workers,
    )  # fmt: skip
    ranked = rank_chiplets(chips, plan.alpha, plan.thresholds)
    assembly = assemble_batch(
        ranked, spec, max_reconfig, child_seed(seed, f"assembly:{spec.rows}x{spec.cols}:{q_c}"),
        fabricated=batch, alpha=plan.alpha, th=plan.thresholds,
    )  # fmt: skip
    mono_t = build_monolithic(spec.total_qubits, spec)
    tag = f"{mono_t.block[0]}x{mono_t.block[1]}"
    mono = estimate_yield(mono_t, plan, batch, child_seed(seed, f"mono-freq:{tag}"), workers)
    L = assembly.link_qubits_per_mcm
    factors = {float(s): bond_yield_factor(L, failure_scale=s) for s in failure_scales}
    return AssemblyRun(spec, batch, len(chips) / batch, assembly, mono, factors)
