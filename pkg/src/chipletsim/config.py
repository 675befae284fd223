"""Experiment configuration: defaults, YAML file, flag overrides, validation.

Config files are flat YAML mappings whose keys are the field names of
``ExperimentConfig``.  A run manifest is also accepted as a config; its
``config`` section is used, so any run can be repeated from its manifest.
"""

from __future__ import annotations

import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .bench import FAMILIES
from .hexlattice import SUPPORTED_CHIPLET_SIZES, McmSpec, squarest_layout

SUBCOMMANDS = ("sweep", "configs", "assemble", "heatmap", "bench", "ingest-calib", "synth-calib")
OUT_ENV = "CHIPLETSIM_OUT"
DEFAULT_OUT = "chipletsim-out"
MANIFEST_FORMAT = "chipletsim-manifest"

# keys that never reach the manifest: they cannot change any output byte
RUNTIME_ONLY = ("workers", "out_dir")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds one message per bad field."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class ExperimentConfig:
    subcommand: str = ""
    seed: int | None = None
    batch: int = 1000
    workers: int = 1
    out_dir: str | None = None

    # frequency plan
    f0: float = 5.0
    step: float = 0.06
    sigma: float = 0.014
    alpha: float = -0.33

    # sweep
    sizes: list[int] = field(default_factory=lambda: [10, 20, 50, 100, 150, 200, 250, 300])
    steps: list[float] = field(default_factory=lambda: [0.04, 0.05, 0.06, 0.07])
    sigmas: list[float] = field(default_factory=lambda: [0.1323, 0.014, 0.006])

    # chiplets / MCMs
    chiplets: list[int] = field(default_factory=lambda: [10, 20, 40, 60, 90, 120])
    dims: list[str] = field(default_factory=lambda: ["2x2", "3x3", "4x4", "5x5", "6x6", "7x7"])
    qubit_cap: int = 500
    max_reconfig: int = 100
    bond_scales: list[float] = field(default_factory=lambda: [1.0, 100.0])
    device_files: bool = True

    # noise and benchmarks
    ratios: list[float] = field(default_factory=lambda: [4.17, 3.0, 2.0, 1.0])
    families: list[str] = field(default_factory=lambda: list(FAMILIES))
    repeats: int = 1
    calibration: str | None = None
    synth_median: float = 0.012
    synth_mean: float = 0.018
    synth_edges: int = 2000
    max_detuning: float = 0.4
    bin_width: float = 0.1

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)

    def manifest_view(self) -> dict:
        d = asdict(self)
        for k in RUNTIME_ONLY:
            d.pop(k)
        return d

    def grid_dims(self) -> list[tuple[int, int]]:
        return [parse_dims(d) for d in self.dims]


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def parse_dims(text) -> tuple[int, int]:
    """``"3x4"`` -> (3, 4); a bare ``n`` means ``n x n``."""
    if isinstance(text, int) and not isinstance(text, bool):
        return text, text
    m = re.fullmatch(r"\s*(\d+)\s*(?:[xX]\s*(\d+))?\s*", str(text))
    if not m:
        raise ValueError(f"bad grid {text!r}; expected KxM or N")
    k = int(m.group(1))
    return k, int(m.group(2)) if m.group(2) else k


def load_file(path: str | Path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: {path} is not valid YAML: {exc}"]) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError([f"config: {path} must hold a mapping"])
    if data.get("format") == MANIFEST_FORMAT:
        data = dict(data.get("config") or {})
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError([f"{k}: unknown config key" for k in unknown])
    return data


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(cfg: ExperimentConfig, problems: list[str]) -> None:
    """Type checks; YAML gives ints where floats are meant, which is fine."""
    defaults = ExperimentConfig()
    for f in fields(cfg):
        v, d = getattr(cfg, f.name), getattr(defaults, f.name)
        if v is None:
            continue
        name = f.name
        if isinstance(d, bool):
            if not isinstance(v, bool):
                problems.append(f"{name}: expected true/false, got {v!r}")
        elif isinstance(d, float):
            if not _is_num(v):
                problems.append(f"{name}: expected a number, got {v!r}")
            else:
                setattr(cfg, name, float(v))
        elif isinstance(d, int) or name == "seed":
            if not _is_int(v):
                problems.append(f"{name}: expected an integer, got {v!r}")
        elif isinstance(d, list):
            if not isinstance(v, list):
                problems.append(f"{name}: expected a list, got {v!r}")
                continue
            kind = type(d[0])
            if kind is float:
                if not all(_is_num(x) for x in v):
                    problems.append(f"{name}: expected numbers, got {v!r}")
                else:
                    setattr(cfg, name, [float(x) for x in v])
            elif kind is int and not all(_is_int(x) for x in v):
                problems.append(f"{name}: expected integers, got {v!r}")
            elif kind is str:
                setattr(cfg, name, [str(x) for x in v])


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    problems: list[str] = []
    _coerce(cfg, problems)
    if problems:
        raise ConfigError(problems)

    sub = cfg.subcommand
    if sub not in SUBCOMMANDS:
        problems.append(f"subcommand: must be one of {', '.join(SUBCOMMANDS)}, got {sub!r}")
    if cfg.seed is None:
        problems.append("seed: required (there is no clock-based default)")
    elif cfg.seed < 0:
        problems.append(f"seed: must be >= 0, got {cfg.seed}")
    if cfg.batch < 1:
        problems.append(f"batch: must be >= 1, got {cfg.batch}")
    if cfg.workers < 1:
        problems.append(f"workers: must be >= 1, got {cfg.workers}")
    if not cfg.step > 0:
        problems.append(f"step: must be > 0, got {cfg.step}")
    if cfg.sigma < 0:
        problems.append(f"sigma: must be >= 0, got {cfg.sigma}")
    if not cfg.alpha < 0:
        problems.append(f"alpha: must be < 0, got {cfg.alpha}")
    if not cfg.f0 > 0:
        problems.append(f"f0: must be > 0, got {cfg.f0}")
    if cfg.max_reconfig < 0:
        problems.append(f"max_reconfig: must be >= 0, got {cfg.max_reconfig}")
    if cfg.repeats < 1:
        problems.append(f"repeats: must be >= 1, got {cfg.repeats}")
    if cfg.qubit_cap < 1:
        problems.append(f"qubit_cap: must be >= 1, got {cfg.qubit_cap}")

    if sub == "sweep":
        if not cfg.steps or any(s <= 0 for s in cfg.steps):
            problems.append(f"steps: need a nonempty list of positive values, got {cfg.steps}")
        if not cfg.sigmas or any(s < 0 for s in cfg.sigmas):
            problems.append(f"sigmas: need a nonempty list of values >= 0, got {cfg.sigmas}")
        for s in cfg.sizes:
            if s > cfg.qubit_cap:
                problems.append(f"sizes: {s} exceeds qubit_cap {cfg.qubit_cap}")
                continue
            try:
                squarest_layout(s)
            except ValueError as exc:
                problems.append(f"sizes: {exc}")

    if sub in ("configs", "assemble", "heatmap", "bench"):
        if not cfg.chiplets:
            problems.append("chiplets: need at least one chiplet size")
        for c in cfg.chiplets:
            if c not in SUPPORTED_CHIPLET_SIZES:
                sup = ", ".join(map(str, SUPPORTED_CHIPLET_SIZES))
                problems.append(f"chiplets: unsupported size {c}; supported: {sup}")
        if not cfg.dims:
            problems.append("dims: need at least one grid")
        for d in cfg.dims:
            try:
                k, m = parse_dims(d)
            except ValueError as exc:
                problems.append(f"dims: {exc}")
                continue
            if k < 1 or m < 1:
                problems.append(f"dims: {d!r} must be at least 1x1")
            elif sub in ("heatmap", "bench") and k != m:
                problems.append(f"dims: {sub} uses square grids, got {d!r}")
        if sub == "assemble" and not problems:
            for c in cfg.chiplets:
                for k, m in cfg.grid_dims():
                    try:
                        McmSpec.of(c, k, m, cfg.qubit_cap)
                    except ValueError as exc:
                        problems.append(f"dims: {exc}")

    if sub in ("assemble", "heatmap", "bench", "ingest-calib", "synth-calib"):
        if sub in ("heatmap", "bench") and not cfg.ratios:
            problems.append("ratios: need at least one link ratio")
        if any(r <= 0 for r in cfg.ratios):
            problems.append(f"ratios: must all be > 0, got {cfg.ratios}")
        if not cfg.bin_width > 0:
            problems.append(f"bin_width: must be > 0, got {cfg.bin_width}")
        if cfg.calibration is None:
            if not 0 < cfg.synth_median <= cfg.synth_mean < 1:
                problems.append(
                    f"synth_median/synth_mean: need 0 < median <= mean < 1, "
                    f"got {cfg.synth_median}/{cfg.synth_mean}"
                )
            if cfg.synth_edges < 1:
                problems.append(f"synth_edges: must be >= 1, got {cfg.synth_edges}")
            if not cfg.max_detuning > 0:
                problems.append(f"max_detuning: must be > 0, got {cfg.max_detuning}")
        elif not Path(cfg.calibration).is_file():
            problems.append(f"calibration: no such file {cfg.calibration}")
    if sub == "ingest-calib" and cfg.calibration is None:
        problems.append("calibration: ingest-calib needs a calibration file")
    if sub == "assemble" and any(s <= 0 for s in cfg.bond_scales):
        problems.append(f"bond_scales: must all be > 0, got {cfg.bond_scales}")
    if sub == "bench":
        bad = [f for f in cfg.families if f not in FAMILIES]
        if bad or not cfg.families:
            problems.append(f"families: choose from {', '.join(FAMILIES)}, got {cfg.families}")

    if problems:
        raise ConfigError(problems)
    return cfg


def build_config(file_values: dict, overrides: dict) -> ExperimentConfig:
    """Defaults, then file values, then non-None overrides (flags win)."""
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    return validate(ExperimentConfig(**merged))
