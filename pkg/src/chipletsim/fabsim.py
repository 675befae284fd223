"""Fabrication variation sampling and Monte Carlo collision-free yield."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Sequence

import numpy as np

from .collision import DEFAULT_ALPHA, DEFAULT_THRESHOLDS, CollisionThresholds, collision_free
from .hexlattice import Edge, FrequencyClass, Topology, build_monolithic
from .parallel import run_chunks, trial_chunks
from .rng import stream

FREQ_STREAM = "freq"


@dataclass(frozen=True)
class FrequencyPlan:
    f0: float = 5.00
    f1: float = 5.06
    f2: float = 5.12
    sigma: float = 0.014
    alpha: float = DEFAULT_ALPHA
    thresholds: CollisionThresholds = DEFAULT_THRESHOLDS

    def __post_init__(self):
        if not self.f0 < self.f1 < self.f2:
            raise ValueError(f"need F0 < F1 < F2, got {self.f0}, {self.f1}, {self.f2}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.alpha >= 0:
            raise ValueError(f"anharmonicity must be negative, got {self.alpha}")

    @classmethod
    def from_step(cls, step: float, sigma: float = 0.014, f0: float = 5.0, **kw) -> "FrequencyPlan":
        """Equally spaced targets ``F1 = F0 + step``, ``F2 = F0 + 2 step``."""
        return cls(f0, f0 + step, f0 + 2 * step, sigma, **kw)

    @property
    def step(self) -> float:
        return self.f1 - self.f0

    def ideal(self, cls: FrequencyClass) -> float:
        return (self.f0, self.f1, self.f2)[int(cls)]

    def ideal_frequencies(self, t: Topology) -> np.ndarray:
        table = np.array([self.f0, self.f1, self.f2])
        return table[np.asarray(t.class_of, dtype=np.intp)]


@dataclass(frozen=True, eq=False)
class DeviceInstance:
    """A topology with realized frequencies and, later, per-edge infidelity.

    ``edge_infidelity`` is aligned with ``topology.edges``.
    """

    topology: Topology
    freq: np.ndarray
    edge_infidelity: np.ndarray | None = None
    trial_index: int = 0
    seed_lineage: tuple = field(default=())

    def __post_init__(self):
        if self.edge_infidelity is not None:
            e = np.asarray(self.edge_infidelity, dtype=float)
            if e.shape != (len(self.topology.edges),):
                raise ValueError("edge_infidelity must align with topology.edges")
            if np.any((e < 0) | (e > 1)):
                raise ValueError("edge infidelities must lie in [0, 1]")

    def infidelity_of(self, edge: Edge) -> float:
        if self.edge_infidelity is None:
            raise ValueError("device has no noise assigned")
        return float(self.edge_infidelity[self.topology.edge_index[tuple(sorted(edge))]])

    def with_noise(self, edge_infidelity: np.ndarray, *lineage) -> "DeviceInstance":
        return replace(
            self,
            edge_infidelity=np.asarray(edge_infidelity, dtype=float),
            seed_lineage=self.seed_lineage + tuple(lineage),
        )


@dataclass(frozen=True)
class YieldEstimate:
    size: int
    fraction: float
    batch: int
    ci95: float
    count: int
    step_ghz: float = float("nan")
    sigma_ghz: float = float("nan")

    @classmethod
    def from_count(cls, size: int, count: int, batch: int, **kw) -> "YieldEstimate":
        p = count / batch
        # normal approximation to the binomial
        ci = 1.96 * math.sqrt(p * (1 - p) / batch)
        return cls(size, p, batch, ci, count, **kw)


def standard_normals(n: int, seed: int, trials: Sequence[int] | range) -> np.ndarray:
    """``(len(trials), n)`` standard normals; row ``i`` keyed by ``(seed, trials[i])``."""
    out = np.empty((len(trials), n))
    for i, trial in enumerate(trials):
        out[i] = stream(seed, FREQ_STREAM, trial).standard_normal(n)
    return out


def frequency_matrix(t: Topology, plan: FrequencyPlan, seed: int, trials) -> np.ndarray:
    return plan.ideal_frequencies(t) + plan.sigma * standard_normals(t.qubit_count, seed, trials)


def sample_frequencies(t: Topology, plan: FrequencyPlan, master_seed: int, trial: int) -> DeviceInstance:
    """Each qubit drawn from Normal(ideal(class), sigma), keyed by (seed, trial, qubit)."""
    freq = frequency_matrix(t, plan, master_seed, [trial])[0]
    return DeviceInstance(t, freq, trial_index=trial, seed_lineage=(("freq", master_seed, trial),))


def _count_chunk(t: Topology, plan: FrequencyPlan, seed: int, start: int, stop: int) -> int:
    f = frequency_matrix(t, plan, seed, range(start, stop))
    return int(collision_free(f, t, plan.alpha, plan.thresholds).sum())


def collision_free_trials(
    t: Topology, plan: FrequencyPlan, seed: int, start: int, stop: int, workers: int = 1
) -> np.ndarray:
    """Trial indices in ``[start, stop)`` whose device is collision-free."""
    chunks = trial_chunks(start, stop)
    masks = run_chunks(_mask_chunk, [(t, plan, seed, a, b) for a, b in chunks], workers)
    return np.concatenate([np.arange(a, b)[m] for (a, b), m in zip(chunks, masks)]) if chunks else np.array([], int)


def _mask_chunk(t, plan, seed, start, stop):
    f = frequency_matrix(t, plan, seed, range(start, stop))
    return collision_free(f, t, plan.alpha, plan.thresholds)


def estimate_yield(
    t: Topology, plan: FrequencyPlan, batch: int, seed: int, workers: int = 1
) -> YieldEstimate:
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    jobs = [(t, plan, seed, a, b) for a, b in trial_chunks(0, batch)]
    count = sum(run_chunks(_count_chunk, jobs, workers))
    return YieldEstimate.from_count(
        t.qubit_count, count, batch, step_ghz=plan.step, sigma_ghz=plan.sigma
    )


def _sweep_chunk(t: Topology, plans: list[FrequencyPlan], seed: int, start: int, stop: int) -> list[int]:
    # one set of normals shared by every plan (common random numbers)
    z = standard_normals(t.qubit_count, seed, range(start, stop))
    out = []
    for p in plans:
        f = p.ideal_frequencies(t) + p.sigma * z
        out.append(int(collision_free(f, t, p.alpha, p.thresholds).sum()))
    return out


def detuning_sweep(
    sizes: Sequence[int],
    steps: Sequence[float],
    sigmas: Sequence[float],
    batch: int,
    seed: int,
    workers: int = 1,
    base: FrequencyPlan | None = None,
) -> list[YieldEstimate]:
    """Yield for every (size, step, sigma) on squarest monolithic lattices.

    All cells at one size reuse the same normal draws, so differences
    between steps or sigmas are not blurred by sampling noise.
    """
    if not steps or not sigmas:
        raise ValueError("steps and sigmas must be nonempty")
    base = base or FrequencyPlan()
    plans = [
        FrequencyPlan.from_step(s, g, f0=base.f0, alpha=base.alpha, thresholds=base.thresholds)
        for s in steps
        for g in sigmas
    ]
    rows: list[YieldEstimate] = []
    for size in sizes:
        t = build_monolithic(size)
        jobs = [(t, plans, seed, a, b) for a, b in trial_chunks(0, batch)]
        counts = np.sum(run_chunks(_sweep_chunk, jobs, workers), axis=0)
        for p, c in zip(plans, counts):
            rows.append(
                YieldEstimate.from_count(size, int(c), batch, step_ghz=p.step, sigma_ghz=p.sigma)
            )
    return rows


def mcm_output_upper_bound(Y_c: float, B: int, q_m: int, q_c: int, k: int, m: int) -> int:
    """floor(Y_c * B * (q_m / q_c) / (k * m)).

    ``Y_c`` is read through its decimal repr so that 0.85 * 1000 * 10 / 10
    floors to 850, not 849.
    """
    if q_c == 0 or k * m == 0:
        raise ValueError("q_c and k*m must be nonzero")
    n = Decimal(repr(float(Y_c))) * B * q_m / (q_c * k * m)
    return int(math.floor(n))


def config_count(available: int, slots: int) -> tuple[int, float]:
    """Ordered placements of ``slots`` chiplets from ``available``, and log10 of it."""
    if available < 0 or slots < 1:
        raise ValueError("need available >= 0 and slots >= 1")
    if slots > available:
        return 0, float("-inf")
    n = math.perm(available, slots)
    return n, math.log10(n)
