"""Known-good-die binning, sort/shuffle MCM assembly and bump-bond yield."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .collision import DEFAULT_ALPHA, DEFAULT_THRESHOLDS, CollisionThresholds, collision_free, collision_masks
from .fabsim import DeviceInstance
from .hexlattice import McmSpec, Topology, build_chiplet, stitch_mcm
from .noise import avg_infidelity
from .rng import stream

BUMP_SUCCESS = 0.99999960642
BUMPS_PER_LINK_QUBIT = 25
DEFAULT_MAX_RECONFIG = 100


class AssemblyFailure(RuntimeError):
    def __init__(self, attempts: int):
        super().__init__(f"no collision-free placement after {attempts} reconfigurations")
        self.attempts = attempts


@dataclass(frozen=True, eq=False)
class ChipletBin:
    entries: tuple[tuple[DeviceInstance, float], ...] = ()

    def __len__(self):
        return len(self.entries)

    @property
    def devices(self) -> list[DeviceInstance]:
        return [d for d, _ in self.entries]

    @property
    def e_avg(self) -> np.ndarray:
        return np.array([e for _, e in self.entries])


@dataclass(frozen=True, eq=False)
class AssembledMcm:
    device: DeviceInstance
    placement: tuple[int, ...]
    reconfigurations: int
    chiplet_trials: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class AssemblyResult:
    mcms: tuple[AssembledMcm, ...]
    chiplets_used: int
    leftovers: int
    fabricated: int
    reconfig_histogram: dict[int, int]
    failed_windows: int
    link_qubits_per_mcm: int
    link_qubit_total: int
    bond_yield_factor: float
    post_assembly_yield: float
    spec: McmSpec = field(repr=False, default=None)


def bond_yield_factor(
    L: int,
    s_l: float = BUMP_SUCCESS,
    bumps_per_link_qubit: int = BUMPS_PER_LINK_QUBIT,
    failure_scale: float = 1.0,
) -> float:
    """``(s_l ** bumps) ** L``; ``failure_scale`` multiplies the per-bump failure rate."""
    if L < 0:
        raise ValueError(f"L must be >= 0, got {L}")
    if failure_scale != 1.0:
        s_l = 1.0 - failure_scale * (1.0 - s_l)
        if s_l < 0:
            raise ValueError("scaled bump failure probability exceeds 1")
    return (s_l**bumps_per_link_qubit) ** L


def rank_chiplets(
    devices: Sequence[DeviceInstance],
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
) -> ChipletBin:
    """Sort collision-free, noise-characterized chiplets by mean infidelity."""
    if not devices:
        return ChipletBin()
    ref = devices[0].topology
    for d in devices:
        if d.topology is not ref and (
            d.topology.block != ref.block or d.topology.edges != ref.edges
        ):
            raise ValueError("all chiplets in a bin must share one chiplet design")
    freqs = np.stack([d.freq for d in devices])
    ok = collision_free(freqs, ref, alpha, th)
    if not ok.all():
        bad = devices[int(np.flatnonzero(~ok)[0])].trial_index
        raise ValueError(f"chiplet from trial {bad} has frequency collisions")
    scored = [(d, avg_infidelity(d)) for d in devices]
    scored.sort(key=lambda x: (x[1], x[0].trial_index))
    return ChipletBin(tuple(scored))


@dataclass(frozen=True, eq=False)
class _Stitching:
    """Index maps from an MCM topology back to chiplet-local ids."""

    topology: Topology
    cell_of: np.ndarray          # per global qubit
    local_of: np.ndarray         # per global qubit
    edge_cell: np.ndarray        # per global edge (-1 for links)
    edge_local: np.ndarray       # per global edge (-1 for links)
    link_controls: np.ndarray
    link_targets: np.ndarray
    link_triples: np.ndarray


@lru_cache(maxsize=64)
def _stitching(spec: McmSpec) -> _Stitching:
    chip = build_chiplet(spec.chiplet)
    t = stitch_mcm(spec)
    R, W = chip.block
    local_id = {s: q for q, s in enumerate(chip.sites)}
    cell_of = np.empty(t.qubit_count, dtype=np.intp)
    local_of = np.empty(t.qubit_count, dtype=np.intp)
    for q, (kind, r, c) in enumerate(t.sites):
        cell_of[q] = (r // R) * spec.cols + c // W
        local_of[q] = local_id[(kind, r % R, c % W)]
    edge_cell = np.full(len(t.edges), -1, dtype=np.intp)
    edge_local = np.full(len(t.edges), -1, dtype=np.intp)
    for i, (a, b) in enumerate(t.edges):
        if cell_of[a] == cell_of[b]:
            edge_cell[i] = cell_of[a]
            edge_local[i] = chip.edge_index[tuple(sorted((int(local_of[a]), int(local_of[b]))))]
    link = t.is_link
    links = set(t.link_edges)
    tri = [
        row
        for row in t.spectator_triples
        if tuple(sorted((row[0], row[1]))) in links or tuple(sorted((row[0], row[2]))) in links
    ]
    return _Stitching(
        t,
        cell_of,
        local_of,
        edge_cell,
        edge_local,
        t.control_array[link],
        t.target_array[link],
        np.array(tri, dtype=np.intp).reshape(-1, 3),
    )


def _links_clean(freqs: np.ndarray, st: _Stitching, alpha, th) -> np.ndarray:
    masks = collision_masks(freqs, st.link_controls, st.link_targets, st.link_triples, alpha, th)
    bad = np.zeros(freqs.shape[0], dtype=bool)
    for m in masks.values():
        bad |= m
    return ~bad


def attempt_mcm(
    chiplets: Sequence[DeviceInstance],
    spec: McmSpec,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    seed: int = 0,
    path: tuple[int, ...] = (),
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
    index: int = 0,
) -> AssembledMcm:
    """Place chiplets in a grid so that no inter-chip coupling collides.

    Attempt 0 is the given order (chiplet ``i`` in cell ``i``, row-major);
    reconfigurations 1..``max_reconfig`` are seeded uniform shuffles.  All
    shuffles are drawn up front and checked as one batch; the first
    collision-free one in draw order wins.  Raises ``AssemblyFailure``.
    """
    if len(chiplets) != spec.slots:
        raise ValueError(f"{spec.rows}x{spec.cols} MCM needs {spec.slots} chiplets, got {len(chiplets)}")
    st = _stitching(spec)
    F = np.stack([c.freq for c in chiplets])
    ident = np.arange(spec.slots)
    perm = None
    used = 0
    if _links_clean(F[st.cell_of, st.local_of][None, :], st, alpha, th)[0]:
        perm = ident
    elif max_reconfig > 0 and spec.slots > 1:
        g = stream(seed, "shuffle", *path)
        perms = np.stack([g.permutation(spec.slots) for _ in range(max_reconfig)])
        freqs = F[perms[:, st.cell_of], st.local_of]
        ok = np.flatnonzero(_links_clean(freqs, st, alpha, th))
        if ok.size:
            used = int(ok[0]) + 1
            perm = perms[ok[0]]
    if perm is None:
        raise AssemblyFailure(max_reconfig)

    freq = F[perm[st.cell_of], st.local_of]
    inf = None
    if all(c.edge_infidelity is not None for c in chiplets):
        E = np.stack([c.edge_infidelity for c in chiplets])
        inf = np.full(len(st.topology.edges), np.nan)
        onchip = st.edge_cell >= 0
        inf[onchip] = E[perm[st.edge_cell[onchip]], st.edge_local[onchip]]
    trials = tuple(chiplets[i].trial_index for i in perm)
    dev = DeviceInstance(
        st.topology,
        freq,
        inf,
        trial_index=index,
        seed_lineage=(("assembly", seed, *path), ("chiplets", trials)),
    )
    return AssembledMcm(dev, tuple(int(p) for p in perm), used, trials)


def assemble_batch(
    bin: ChipletBin,
    spec: McmSpec,
    max_reconfig: int = DEFAULT_MAX_RECONFIG,
    seed: int = 0,
    fabricated: int | None = None,
    max_mcms: int | None = None,
    bond_failure_scale: float = 1.0,
    s_l: float = BUMP_SUCCESS,
    bumps_per_link_qubit: int = BUMPS_PER_LINK_QUBIT,
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
) -> AssemblyResult:
    """Best-first assembly over a sliding window of the sorted bin.

    The window holds the ``k*m`` lowest-ranked chiplets not yet consumed,
    starting at ``start``.  Success removes them; failure advances ``start``
    by one, stranding the first chiplet of the window.  ``max_mcms`` stops
    early once that many modules are built.
    """
    slots = spec.slots
    remaining = list(bin.devices)
    mcms: list[AssembledMcm] = []
    hist: Counter[int] = Counter()
    failed = 0
    start = 0
    attempt = 0
    while start + slots <= len(remaining):
        if max_mcms is not None and len(mcms) >= max_mcms:
            break
        window = remaining[start : start + slots]
        try:
            res = attempt_mcm(
                window, spec, max_reconfig, seed, (attempt,), alpha, th, index=len(mcms)
            )
        except AssemblyFailure:
            failed += 1
            start += 1
        else:
            mcms.append(res)
            hist[res.reconfigurations] += 1
            del remaining[start : start + slots]
        attempt += 1

    used = slots * len(mcms)
    fabricated = len(bin) if fabricated is None else fabricated
    L = len(_stitching(spec).topology.link_qubits)
    factor = bond_yield_factor(L, s_l, bumps_per_link_qubit, bond_failure_scale)
    return AssemblyResult(
        mcms=tuple(mcms),
        chiplets_used=used,
        leftovers=len(bin) - used,
        fabricated=fabricated,
        reconfig_histogram=dict(sorted(hist.items())),
        failed_windows=failed,
        link_qubits_per_mcm=L,
        link_qubit_total=L * len(mcms),
        bond_yield_factor=factor,
        post_assembly_yield=(used / fabricated * factor) if fabricated else 0.0,
        spec=spec,
    )
