"""Frequency-collision criteria for cross-resonance coupled transmons.

Types 1-4 concern a coupled control/target pair, types 5-7 a control qubit
and two of its neighbors.  Every width comparison is inclusive; type 4 is
the closed complement of the straddling interval ``(f_c + alpha, f_c)``.

Two entry points share one set of formulas: scalar ``check_*`` functions
that produce ``CollisionEvent`` records, and ``collision_masks`` /
``collision_free`` that evaluate whole batches of devices as numpy arrays.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_ALPHA = -0.330

# Absorbs float rounding at exact threshold boundaries (1 Hz, in GHz).
BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class CollisionThresholds:
    t1: float = 0.017
    t2: float = 0.004
    t3: float = 0.030
    t5: float = 0.017
    t6: float = 0.025
    t7: float = 0.017

    def __post_init__(self):
        for name in ("t1", "t2", "t3", "t5", "t6", "t7"):
            if not getattr(self, name) > 0:
                raise ValueError(f"threshold {name} must be > 0, got {getattr(self, name)}")

    def width(self, kind: int) -> float | None:
        return None if kind == 4 else getattr(self, f"t{kind}")


DEFAULT_THRESHOLDS = CollisionThresholds()


@dataclass(frozen=True)
class CollisionEvent:
    type: int
    qubits: tuple[int, ...]
    detuning_value: float
    threshold: float | None


# ------------------------------------------------------------ formulas
# Each returns the signed quantity compared against the threshold; they
# work on python floats and on broadcast numpy arrays alike.


def _q1(fc, ft, alpha):
    return fc - ft


def _q2(fc, ft, alpha):
    return fc + alpha / 2 - ft


def _q3(fc, ft, alpha):
    a = fc - (ft + alpha)
    b = ft - (fc + alpha)
    return np.where(np.abs(a) <= np.abs(b), a, b)


def _q5(fc, fj, fk, alpha):
    return fj - fk


def _q6(fc, fj, fk, alpha):
    a = fj - (fk + alpha)
    b = fk - (fj + alpha)
    return np.where(np.abs(a) <= np.abs(b), a, b)


def _q7(fc, fj, fk, alpha):
    return 2 * fc + alpha - (fj + fk)


def _outside_straddle(fc, ft, alpha):
    return (ft <= fc + alpha + BOUNDARY_EPS) | (ft >= fc - BOUNDARY_EPS)


def pair_masks(fc, ft, alpha: float, th: CollisionThresholds) -> dict[int, np.ndarray]:
    """Boolean collision masks of types 1-4 for control ``fc`` / target ``ft``."""
    return {
        1: np.abs(_q1(fc, ft, alpha)) <= th.t1 + BOUNDARY_EPS,
        2: np.abs(_q2(fc, ft, alpha)) <= th.t2 + BOUNDARY_EPS,
        3: np.abs(_q3(fc, ft, alpha)) <= th.t3 + BOUNDARY_EPS,
        4: _outside_straddle(fc, ft, alpha),
    }


def spectator_masks(fc, fj, fk, alpha: float, th: CollisionThresholds) -> dict[int, np.ndarray]:
    """Boolean collision masks of types 5-7 for control ``fc`` with neighbors ``fj``, ``fk``."""
    return {
        5: np.abs(_q5(fc, fj, fk, alpha)) <= th.t5 + BOUNDARY_EPS,
        6: np.abs(_q6(fc, fj, fk, alpha)) <= th.t6 + BOUNDARY_EPS,
        7: np.abs(_q7(fc, fj, fk, alpha)) <= th.t7 + BOUNDARY_EPS,
    }


_PAIR_Q = {1: _q1, 2: _q2, 3: _q3, 4: lambda fc, ft, alpha: fc - ft}
_SPEC_Q = {5: _q5, 6: _q6, 7: _q7}


def check_pair(
    f_i: float,
    f_j: float,
    control_is_i: bool,
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
    qubits: tuple[int, int] = (0, 1),
) -> list[CollisionEvent]:
    """Pair criteria 1-4 on a coupled pair; ``qubits`` are (i, j) labels."""
    fc, ft = (f_i, f_j) if control_is_i else (f_j, f_i)
    masks = pair_masks(fc, ft, alpha, th)
    return [
        CollisionEvent(k, qubits, float(_PAIR_Q[k](fc, ft, alpha)), th.width(k))
        for k in (1, 2, 3, 4)
        if bool(masks[k])
    ]


def check_spectators(
    f_c: float,
    f_j: float,
    f_k: float,
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
    qubits: tuple[int, int, int] = (0, 1, 2),
) -> list[CollisionEvent]:
    """Spectator criteria 5-7; ``qubits`` are (control, j, k) labels."""
    masks = spectator_masks(f_c, f_j, f_k, alpha, th)
    return [
        CollisionEvent(k, qubits, float(_SPEC_Q[k](f_c, f_j, f_k, alpha)), th.width(k))
        for k in (5, 6, 7)
        if bool(masks[k])
    ]


@dataclass(frozen=True)
class CollisionReport:
    events: tuple[CollisionEvent, ...]

    @property
    def collision_free(self) -> bool:
        return not self.events

    def counts(self) -> dict[int, int]:
        return dict(sorted(Counter(e.type for e in self.events).items()))

    def types(self) -> set[int]:
        return {e.type for e in self.events}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["type", "qubits", "detuning_ghz", "threshold_ghz"])
            for e in self.events:
                w.writerow(
                    [
                        e.type,
                        " ".join(map(str, e.qubits)),
                        f"{e.detuning_value:.9f}",
                        "" if e.threshold is None else f"{e.threshold:.6f}",
                    ]
                )


def _device_freqs(d) -> np.ndarray:
    t = d.topology
    f = np.asarray(d.freq, dtype=float)
    if f.shape != (t.qubit_count,):
        raise ValueError(
            f"device has {f.size} frequencies for {t.qubit_count} qubits; "
            f"missing frequency for qubit {min(f.size, t.qubit_count)}"
        )
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise ValueError(f"missing frequency for qubit {int(bad[0])}")
    return f


def check_device(
    d, th: CollisionThresholds = DEFAULT_THRESHOLDS, alpha: float = DEFAULT_ALPHA
) -> CollisionReport:
    """Every edge (designed control direction) and every spectator triple."""
    t = d.topology
    f = _device_freqs(d)
    events: list[CollisionEvent] = []
    for (a, b), c in zip(t.edges, t.controls):
        events.extend(check_pair(f[a], f[b], c == a, alpha, th, qubits=(a, b)))
    for c, j, k in t.spectator_triples:
        events.extend(check_spectators(f[c], f[j], f[k], alpha, th, qubits=(int(c), int(j), int(k))))
    return CollisionReport(tuple(events))


def collision_masks(
    freqs: np.ndarray,
    controls: np.ndarray,
    targets: np.ndarray,
    triples: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
) -> dict[int, np.ndarray]:
    """Per-type ``(batch,)`` masks: device has at least one event of that type."""
    freqs = np.atleast_2d(freqs)
    out = {}
    fc, ft = freqs[:, controls], freqs[:, targets]
    for k, m in pair_masks(fc, ft, alpha, th).items():
        out[k] = m.any(axis=1)
    if len(triples):
        sc, sj, sk = (freqs[:, triples[:, i]] for i in range(3))
        for k, m in spectator_masks(sc, sj, sk, alpha, th).items():
            out[k] = m.any(axis=1)
    else:
        for k in (5, 6, 7):
            out[k] = np.zeros(freqs.shape[0], dtype=bool)
    return out


def collision_free(
    freqs: np.ndarray,
    topology,
    alpha: float = DEFAULT_ALPHA,
    th: CollisionThresholds = DEFAULT_THRESHOLDS,
    chunk: int = 4096,
) -> np.ndarray:
    """``(batch,)`` mask of collision-free rows of a ``(batch, n)`` frequency matrix."""
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    ok = np.empty(freqs.shape[0], dtype=bool)
    ctl, tgt, tri = topology.control_array, topology.target_array, topology.spectator_triples
    for s in range(0, freqs.shape[0], chunk):
        masks = collision_masks(freqs[s : s + chunk], ctl, tgt, tri, alpha, th)
        bad = np.zeros(min(chunk, freqs.shape[0] - s), dtype=bool)
        for m in masks.values():
            bad |= m
        ok[s : s + chunk] = ~bad
    return ok
