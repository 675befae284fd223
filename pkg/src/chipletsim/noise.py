"""Empirical detuning -> two-qubit infidelity model and noise assignment.

Calibration snapshot file (JSON, ``format: chipletsim-calibration``,
``version: 1``)::

    {
      "format": "chipletsim-calibration", "version": 1,
      "cycles": ["2022-01-01T00:00Z", ...],          # optional labels
      "qubits": [{"id": 0, "frequency_ghz": 5.01}, ...],
      "gates":  [{"pair": [0, 1], "infidelity": [0.011, 0.013, ...]}, ...]
    }

Each gate's per-cycle infidelities are averaged into one sample, filed
under the bin ``floor(|f_a - f_b| / bin_width)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fabsim import DeviceInstance
from .rng import stream

CALIBRATION_FORMAT = "chipletsim-calibration"
CALIBRATION_VERSION = 1
DEFAULT_BIN_WIDTH = 0.1
DEFAULT_LINK_RATIO = 4.17

# bin boundaries are nudged up by this fraction of a bin so that
# re-ingesting exported frequencies lands every sample in its original bin
_BIN_EPS = 1e-9


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSnapshot:
    qubits: dict[int, float]
    gates: tuple[tuple[tuple[int, int], tuple[float, ...]], ...]
    cycles: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.gates:
            raise CalibrationError("calibration snapshot has no gates")
        for (a, b), vals in self.gates:
            for q in (a, b):
                if q not in self.qubits:
                    raise CalibrationError(f"gate {(a, b)} references undeclared qubit {q}")
            if a == b:
                raise CalibrationError(f"gate {(a, b)} couples a qubit to itself")
            if not vals:
                raise CalibrationError(f"gate {(a, b)} has no infidelity values")
            for v in vals:
                if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                    raise CalibrationError(f"gate {(a, b)} infidelity {v!r} outside [0, 1]")
        for q, f in self.qubits.items():
            if not (isinstance(f, (int, float)) and math.isfinite(f)):
                raise CalibrationError(f"qubit {q} has non-finite frequency {f!r}")

    def to_dict(self) -> dict:
        return {
            "format": CALIBRATION_FORMAT,
            "version": CALIBRATION_VERSION,
            "cycles": list(self.cycles),
            "qubits": [{"id": q, "frequency_ghz": f} for q, f in sorted(self.qubits.items())],
            "gates": [{"pair": list(p), "infidelity": list(v)} for p, v in self.gates],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationSnapshot":
        if not isinstance(data, dict) or data.get("format") != CALIBRATION_FORMAT:
            raise CalibrationError(f"not a {CALIBRATION_FORMAT} document")
        if data.get("version") != CALIBRATION_VERSION:
            raise CalibrationError(f"unsupported calibration version {data.get('version')!r}")
        try:
            qubits = {int(r["id"]): r["frequency_ghz"] for r in data["qubits"]}
            gates = tuple(
                ((int(g["pair"][0]), int(g["pair"][1])), tuple(g["infidelity"]))
                for g in data["gates"]
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise CalibrationError(f"malformed calibration snapshot: {exc!r}") from exc
        return cls(qubits, gates, tuple(data.get("cycles", ())))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "CalibrationSnapshot":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise CalibrationError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


def bin_index(detuning, bin_width: float = DEFAULT_BIN_WIDTH):
    return np.floor(np.abs(detuning) / bin_width + _BIN_EPS).astype(np.int64)


@dataclass(frozen=True, eq=False)
class DetuningBins:
    """Infidelity samples grouped by ``|detuning|`` bin.

    ``records`` keeps every ``(|detuning|, infidelity)`` pair so the bins can
    be exported back to a snapshot.
    """

    records: tuple[tuple[float, float], ...]
    bin_width: float = DEFAULT_BIN_WIDTH
    bins: dict[int, np.ndarray] = field(init=False)

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        grouped: dict[int, list[float]] = {}
        for d, e in self.records:
            if not 0.0 <= e <= 1.0:
                raise CalibrationError(f"infidelity {e} outside [0, 1]")
            grouped.setdefault(int(bin_index(d, self.bin_width)), []).append(e)
        object.__setattr__(
            self, "bins", {k: np.array(v) for k, v in sorted(grouped.items())}
        )

    @property
    def samples(self) -> np.ndarray:
        return np.array([e for _, e in self.records])

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def summary(self) -> dict[str, float]:
        return {"median": self.median, "mean": self.mean, "count": len(self.records)}

    def resolve(self, idx: np.ndarray) -> np.ndarray:
        """Map bin indices to the nearest populated bin (ties -> lower)."""
        populated = np.array(sorted(self.bins), dtype=np.int64)
        if populated.size == 0:
            raise CalibrationError("all detuning bins are empty")
        idx = np.asarray(idx, dtype=np.int64)
        pos = np.searchsorted(populated, idx)
        lo = populated[np.clip(pos - 1, 0, populated.size - 1)]
        hi = populated[np.clip(pos, 0, populated.size - 1)]
        return np.where(np.abs(idx - lo) <= np.abs(hi - idx), lo, hi)

    def draw(self, detunings, g: np.random.Generator) -> np.ndarray:
        """One uniform draw per detuning from its (resolved) bin."""
        det = np.atleast_1d(np.asarray(detunings, dtype=float))
        keys = self.resolve(bin_index(det, self.bin_width))
        u = g.random(det.shape)
        out = np.empty(det.shape)
        for k in np.unique(keys):
            sel = keys == k
            pool = self.bins[int(k)]
            out[sel] = pool[np.minimum((u[sel] * pool.size).astype(np.int64), pool.size - 1)]
        return out

    def to_snapshot(self, base_frequency: float = 5.0) -> CalibrationSnapshot:
        """One synthetic qubit pair per record, single calibration cycle."""
        qubits: dict[int, float] = {}
        gates = []
        for i, (d, e) in enumerate(self.records):
            qubits[2 * i] = base_frequency
            qubits[2 * i + 1] = base_frequency + d
            gates.append(((2 * i, 2 * i + 1), (e,)))
        return CalibrationSnapshot(qubits, tuple(gates), ("export",))


def ingest_calibration(source, bin_width: float = DEFAULT_BIN_WIDTH) -> DetuningBins:
    """Build bins from a snapshot object, a parsed dict, or a JSON file path."""
    if isinstance(source, CalibrationSnapshot):
        snap = source
    elif isinstance(source, dict):
        snap = CalibrationSnapshot.from_dict(source)
    else:
        snap = CalibrationSnapshot.read(source)
    records = []
    for (a, b), vals in snap.gates:
        records.append((abs(snap.qubits[a] - snap.qubits[b]), float(np.mean(vals))))
    return DetuningBins(tuple(records), bin_width)


def synth_calibration(
    target_median: float,
    target_mean: float,
    edges: int,
    seed: int,
    max_detuning: float = 0.4,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> DetuningBins:
    """Right-skewed stand-in for a real calibration snapshot.

    Log-normal with median ``m`` and mean ``mu`` (``sigma**2 = 2 ln(mu/m)``),
    drawn by stratified sampling so the realized median and mean sit close
    to the targets.  Detunings are stratified over ``[0, max_detuning)``.
    """
    if not 0 < target_median <= target_mean < 1:
        raise ValueError(
            f"need 0 < median <= mean < 1, got median={target_median}, mean={target_mean}"
        )
    if edges < 1:
        raise ValueError("edges must be >= 1")
    from scipy.special import ndtri

    g = stream(seed, "synth-calibration")
    s = math.sqrt(2 * math.log(target_mean / target_median))
    u = (np.arange(edges) + g.random(edges)) / edges
    values = np.clip(target_median * np.exp(s * ndtri(u)), 0.0, 1.0)
    values = values[g.permutation(edges)]
    det = (np.arange(edges) + g.random(edges)) / edges * max_detuning
    det = det[g.permutation(edges)]
    return DetuningBins(tuple(zip(det.tolist(), values.tolist())), bin_width)


def sample_edge_infidelity(bins: DetuningBins, detuning: float, seed: int, *path: int) -> float:
    return float(bins.draw([detuning], stream(seed, "edge-infidelity", *path))[0])


@dataclass(frozen=True)
class LinkNoiseConfig:
    ratio: float = DEFAULT_LINK_RATIO

    def __post_init__(self):
        if not self.ratio > 0:
            raise ValueError(f"link ratio must be > 0, got {self.ratio}")


def _abs_detunings(d: DeviceInstance) -> np.ndarray:
    t = d.topology
    if not t.edges:
        return np.empty(0)
    a, b = np.array(t.edges).T
    return np.abs(d.freq[a] - d.freq[b])


def onchip_draws(d: DeviceInstance, bins: DetuningBins, seed: int) -> np.ndarray:
    """Empirical draw for every edge at its realized detuning (links included)."""
    return bins.draw(_abs_detunings(d), stream(seed, "noise", d.trial_index))


def link_base_draws(d: DeviceInstance, bins: DetuningBins, seed: int) -> np.ndarray:
    """Unscaled on-chip-model draws for the link edges, in edge order."""
    mask = d.topology.is_link
    if not mask.any():
        return np.empty(0)
    return bins.draw(_abs_detunings(d)[mask], stream(seed, "link-noise", d.trial_index))


def assign_device_noise(
    d: DeviceInstance,
    bins: DetuningBins,
    link: LinkNoiseConfig = LinkNoiseConfig(),
    seed: int = 0,
) -> DeviceInstance:
    """On-chip edges: empirical draw; link edges: ratio x fresh draw, clipped to 1."""
    e = onchip_draws(d, bins, seed)
    mask = d.topology.is_link
    if mask.any():
        e[mask] = np.minimum(1.0, link.ratio * link_base_draws(d, bins, seed))
    return d.with_noise(e, ("noise", seed, d.trial_index, link.ratio))


def assign_link_noise(
    d: DeviceInstance, bins: DetuningBins, link: LinkNoiseConfig, seed: int
) -> DeviceInstance:
    """Fill link edges of an assembled MCM whose on-chip edges are already characterized."""
    if d.edge_infidelity is None:
        raise ValueError("on-chip noise must be assigned before link noise")
    e = np.array(d.edge_infidelity, dtype=float)
    mask = d.topology.is_link
    if mask.any():
        e[mask] = np.minimum(1.0, link.ratio * link_base_draws(d, bins, seed))
    return d.with_noise(e, ("link-noise", seed, d.trial_index, link.ratio))


def avg_infidelity(d: DeviceInstance) -> float:
    """Mean two-qubit infidelity over coupled pairs (edges)."""
    if not d.topology.edges:
        raise ValueError("device has no coupled pairs")
    if d.edge_infidelity is None:
        raise ValueError("device has no noise assigned")
    return float(np.mean(d.edge_infidelity))
