"""Command-line entry point: ``chipletsim <subcommand> [--config FILE] [flags]``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 infeasible
experiment (every requested comparison lacks a collision-free monolithic
device).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    MANIFEST_FORMAT,
    OUT_ENV,
    SUBCOMMANDS,
    ConfigError,
    ExperimentConfig,
    build_config,
    load_file,
)
from .experiments import build_populations, compare_on_populations, infidelity_heatmap, run_assembly
from .fabsim import FrequencyPlan, config_count, detuning_sweep, estimate_yield
from .hexlattice import McmSpec, build_chiplet, topology_to_dict
from .noise import DetuningBins, LinkNoiseConfig, assign_link_noise, ingest_calibration, synth_calibration
from .report import Report, Series, emit_report, fmt
from .rng import child_seed

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INFEASIBLE = 0, 1, 2, 3


# --- helpers -------------------------------------------------------------


def plan_of(cfg: ExperimentConfig) -> FrequencyPlan:
    return FrequencyPlan.from_step(cfg.step, cfg.sigma, f0=cfg.f0, alpha=cfg.alpha)


def seeds_of(cfg: ExperimentConfig) -> list[int]:
    return [cfg.seed] + [child_seed(cfg.seed, f"repeat:{i}") for i in range(1, cfg.repeats)]


def bins_of(cfg: ExperimentConfig) -> DetuningBins:
    if cfg.calibration:
        return ingest_calibration(cfg.calibration, cfg.bin_width)
    return synth_calibration(
        cfg.synth_median, cfg.synth_mean, cfg.synth_edges,
        child_seed(cfg.seed, "calibration"), cfg.max_detuning, cfg.bin_width,
    )  # fmt: skip


def _num(x: float) -> str:
    return fmt(float(x))


def _bins_tables(rep: Report, bins: DetuningBins) -> None:
    t = rep.table("bins", ["bin", "lo_ghz", "hi_ghz", "count", "median", "mean", "min", "max"])
    w = bins.bin_width
    for k, v in bins.bins.items():
        t.rows.append([k, k * w, (k + 1) * w, len(v), float(np.median(v)), float(v.mean()), float(v.min()), float(v.max())])
    rep.series.append(
        Series("calibration_records", "abs_detuning_ghz", "infidelity", [tuple(r) for r in bins.records])
    )
    s = bins.summary()
    rep.summary.append(
        f"calibration: {s['count']} gates, median {s['median']:.5f}, mean {s['mean']:.5f}, "
        f"{len(bins.bins)} populated bins of width {w:g} GHz"
    )


# --- subcommands ---------------------------------------------------------


def run_sweep(cfg: ExperimentConfig) -> Report:
    rep = Report()
    base = FrequencyPlan(f0=cfg.f0, alpha=cfg.alpha)
    rows = detuning_sweep(cfg.sizes, cfg.steps, cfg.sigmas, cfg.batch, cfg.seed, cfg.workers, base)
    t = rep.table("sweep", ["size", "step_ghz", "sigma_ghz", "batch", "yield", "ci95"])
    curves: dict[tuple, Series] = {}
    for y in rows:
        step, sigma = _num(round(y.step_ghz, 12)), _num(y.sigma_ghz)
        t.rows.append([y.size, float(step), y.sigma_ghz, y.batch, y.fraction, y.ci95])
        key = (step, sigma)
        if key not in curves:
            curves[key] = Series(f"sweep_step{step}_sigma{sigma}", "size", "yield")
        curves[key].points.append((y.size, y.fraction))
    rep.series.extend(curves.values())
    rep.summary.append(f"detuning sweep: {len(rows)} cells, batch {cfg.batch}, seed {cfg.seed}")
    for sigma in cfg.sigmas:
        for size in cfg.sizes:
            cell = [y for y in rows if y.size == size and y.sigma_ghz == sigma]
            best = max(cell, key=lambda y: y.fraction)
            rep.summary.append(
                f"  sigma {sigma:g} GHz, {size} qubits: best step {best.step_ghz:.3f} GHz "
                f"(yield {best.fraction:.4f})"
            )
    return rep


def run_configs(cfg: ExperimentConfig) -> Report:
    rep = Report()
    plan = plan_of(cfg)
    t = rep.table(
        "configs",
        ["chiplet", "batch", "available", "chiplet_yield", "rows", "cols", "slots",
         "total_qubits", "log10_configs", "configs", "mcm_upper_bound"],
    )  # fmt: skip
    for c in cfg.chiplets:
        y = estimate_yield(build_chiplet(c), plan, cfg.batch, child_seed(cfg.seed, f"chip-freq:{c}"), cfg.workers)
        s = Series(f"configs_c{c}", "slots", "log10_configs")
        for k, m in cfg.grid_dims():
            slots = k * m
            n, lg = config_count(y.count, slots)
            t.rows.append([c, cfg.batch, y.count, y.fraction, k, m, slots, slots * c, lg, n, y.count // slots])
            s.points.append((slots, lg))
        rep.series.append(s)
        rep.summary.append(f"{c}-qubit chiplets: {y.count}/{cfg.batch} collision-free ({y.fraction:.4f})")
    return rep


def _device_json(dev, placement, trials, reconfigs) -> str:
    doc = {
        "placement": list(placement),
        "chiplet_trials": list(trials),
        "reconfigurations": reconfigs,
        "frequency_ghz": [float(f) for f in dev.freq],
        "edges": [list(e) for e in dev.topology.edges],
        "edge_infidelity": [float(e) for e in dev.edge_infidelity],
    }
    return json.dumps(doc) + "\n"


def run_assemble(cfg: ExperimentConfig) -> Report:
    rep = Report()
    plan, bins = plan_of(cfg), bins_of(cfg)
    ratio = cfg.ratios[0] if cfg.ratios else 4.17
    t = rep.table(
        "assembly",
        ["chiplet", "rows", "cols", "total_qubits", "batch", "chiplet_yield", "mcms", "chiplets_used",
         "leftovers", "failed_windows", "link_qubits", "bond_failure_scale", "bond_factor",
         "post_assembly_yield", "mono_yield", "mono_ci95"],
    )  # fmt: skip
    h = rep.table("reconfigurations", ["chiplet", "rows", "cols", "reconfigurations", "count"])
    curves: dict[str, Series] = {}
    for c in cfg.chiplets:
        for k, m in cfg.grid_dims():
            spec = McmSpec.of(c, k, m, cfg.qubit_cap)
            run = run_assembly(spec, cfg.batch, cfg.seed, bins, plan, cfg.max_reconfig, cfg.bond_scales, cfg.workers)
            a = run.assembly
            for s in cfg.bond_scales:
                t.rows.append([
                    c, k, m, spec.total_qubits, cfg.batch, run.chiplet_yield, len(a.mcms), a.chiplets_used,
                    a.leftovers, a.failed_windows, a.link_qubits_per_mcm, s, run.bond_factors[s],
                    run.post_assembly_yield(s), run.mono_yield.fraction, run.mono_yield.ci95,
                ])  # fmt: skip
                key = f"assembly_c{c}_bond{_num(s)}"
                curves.setdefault(key, Series(key, "total_qubits", "post_assembly_yield"))
                curves[key].points.append((spec.total_qubits, run.post_assembly_yield(s)))
            mono = curves.setdefault(f"mono_c{c}", Series(f"mono_c{c}", "total_qubits", "yield"))
            mono.points.append((spec.total_qubits, run.mono_yield.fraction))
            for r, n in a.reconfig_histogram.items():
                h.rows.append([c, k, m, r, n])
            gain = run.post_assembly_yield(1.0) / run.mono_yield.fraction if run.mono_yield.fraction else float("inf")
            rep.summary.append(
                f"{k}x{m} of {c}q ({spec.total_qubits}q): {len(a.mcms)} MCMs, "
                f"post-assembly yield {run.post_assembly_yield(1.0):.4f} vs monolithic "
                f"{run.mono_yield.fraction:.4f} ({gain:.3g}x)"
            )
            if cfg.device_files and a.mcms:
                d = f"mcms/c{c}_{k}x{m}"
                topo = a.mcms[0].device.topology
                rep.files[f"{d}/topology.json"] = json.dumps(topology_to_dict(topo)) + "\n"
                link = LinkNoiseConfig(ratio)
                lseed = child_seed(cfg.seed, f"link:{k}x{m}:{c}")
                for i, mc in enumerate(a.mcms):
                    dev = assign_link_noise(mc.device, bins, link, lseed)
                    rep.files[f"{d}/mcm_{i:05d}.json"] = _device_json(
                        dev, mc.placement, mc.chiplet_trials, mc.reconfigurations
                    )
    rep.series.extend(curves.values())
    return rep


def _cells_label(k: int) -> str:
    return f"{k}x{k}"


def run_heatmap(cfg: ExperimentConfig) -> Report:
    rep = Report()
    plan, bins = plan_of(cfg), bins_of(cfg)
    dims = sorted({k for k, _ in cfg.grid_dims()})
    res = infidelity_heatmap(
        cfg.chiplets, dims, cfg.ratios, cfg.batch, seeds_of(cfg), bins, plan,
        cfg.max_reconfig, cfg.workers, cfg.qubit_cap,
    )  # fmt: skip
    cells = rep.table(
        "heatmap_cells",
        ["chiplet", "dims", "total_qubits", "ratio", "e_avg_ratio", "feasible", "n_mono", "n_mcm"],
    )
    for r in cfg.ratios:
        t = rep.table(f"heatmap_r{_num(r)}", ["chiplet"] + [_cells_label(n) for n in dims])
        for c in cfg.chiplets:
            row: list = [c]
            s = Series(f"heatmap_r{_num(r)}_c{c}", "dim", "e_avg_ratio")
            for n in dims:
                cell = res.cell(c, n)
                if cell is None:
                    row.append("")
                elif not cell.feasible:
                    row.append("INFEASIBLE")
                else:
                    row.append(cell.values[r])
                    s.points.append((n, cell.values[r]))
            t.rows.append(row)
            rep.series.append(s)
        for cell in res.cells:
            v = cell.values[r] if cell.feasible else None
            cells.rows.append(
                [cell.chiplet, _cells_label(cell.dim), cell.total_qubits, r, v, cell.feasible, cell.n_mono, cell.n_mcm]
            )
    feasible = [c for c in res.cells if c.feasible]
    rep.summary.append(
        f"heatmap: {len(res.cells)} cells within {cfg.qubit_cap} qubits, {len(feasible)} feasible, "
        f"batch {cfg.batch}, {cfg.repeats} seed(s)"
    )
    for r in cfg.ratios:
        vals = [c.values[r] for c in feasible]
        if vals:
            below = sum(v < 1 for v in vals)
            rep.summary.append(f"  r={r:g}: {below}/{len(vals)} cells favor the MCM, range {min(vals):.4f}..{max(vals):.4f}")
    _bins_tables(rep, bins)
    if res.cells and not feasible:
        rep.status = EXIT_INFEASIBLE
        rep.summary.append("infeasible: no cell has a collision-free monolithic device")
    return rep


def run_bench(cfg: ExperimentConfig) -> Report:
    rep = Report()
    plan, bins = plan_of(cfg), bins_of(cfg)
    seeds = seeds_of(cfg)
    t = rep.table(
        "bench",
        ["family", "chiplet", "dims", "total_qubits", "ratio", "fidelity_ratio", "e_avg_ratio",
         "n_mono", "n_mcm", "two_qubit_gates", "swaps"],
    )  # fmt: skip
    curves: dict[str, Series] = {}
    n_total = n_infeasible = 0
    for c in cfg.chiplets:
        for n in sorted({k for k, _ in cfg.grid_dims()}):
            if n * n * c > cfg.qubit_cap:
                continue
            spec = McmSpec.of(c, n, n, cfg.qubit_cap)
            pops = [build_populations(spec, plan, bins, cfg.batch, s, cfg.max_reconfig, cfg.workers) for s in seeds]
            for fam in cfg.families:
                for r in cfg.ratios:
                    cmp = compare_on_populations(pops, fam, r, cfg.seed)
                    n_total += 1
                    n_infeasible += cmp.infeasible
                    fr = "INFEASIBLE" if cmp.infeasible else cmp.fidelity_ratio
                    t.rows.append([
                        fam, c, _cells_label(n), spec.total_qubits, r, fr, cmp.e_avg_ratio,
                        cmp.n_mono, cmp.n_mcm, cmp.two_qubit_gates, cmp.swaps,
                    ])  # fmt: skip
                    if not cmp.infeasible:
                        key = f"bench_{fam}_r{_num(r)}_c{c}"
                        curves.setdefault(key, Series(key, "dim", "fidelity_ratio")).points.append(
                            (n, cmp.fidelity_ratio)
                        )
    rep.series.extend(curves.values())
    rep.summary.append(
        f"benchmarks: {n_total} comparisons, {n_infeasible} without a collision-free monolithic device"
    )
    _bins_tables(rep, bins)
    if n_total and n_infeasible == n_total:
        rep.status = EXIT_INFEASIBLE
    return rep


def run_ingest(cfg: ExperimentConfig) -> Report:
    rep = Report()
    _bins_tables(rep, bins_of(cfg))
    return rep


def run_synth(cfg: ExperimentConfig) -> Report:
    rep = Report()
    bins = bins_of(cfg)
    rep.files["calibration.json"] = json.dumps(bins.to_snapshot().to_dict(), indent=1) + "\n"
    _bins_tables(rep, bins)
    return rep


RUNNERS = {
    "sweep": run_sweep,
    "configs": run_configs,
    "assemble": run_assemble,
    "heatmap": run_heatmap,
    "bench": run_bench,
    "ingest-calib": run_ingest,
    "synth-calib": run_synth,
}


def manifest_of(cfg: ExperimentConfig) -> dict:
    m = {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "software": {
            "chipletsim": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "config": cfg.manifest_view(),
    }
    if cfg.calibration:
        m["calibration_sha256"] = hashlib.sha256(Path(cfg.calibration).read_bytes()).hexdigest()
    return m


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one validated config and write its artifacts; returns the exit status."""
    rep = RUNNERS[cfg.subcommand](cfg)
    out = cfg.resolved_out_dir()
    emit_report(rep, out, manifest_of(cfg))
    for line in rep.summary:
        print(line)
    print(f"wrote {out}")
    return rep.status


# --- argument parsing ----------------------------------------------------


def _flags(p: argparse.ArgumentParser, names: list[str]) -> None:
    spec = {
        "seed": dict(type=int, help="master seed (required)"),
        "batch": dict(type=int, help="devices fabricated per experiment cell"),
        "workers": dict(type=int, help="worker processes (does not change results)"),
        "out_dir": dict(flags=("--out", "-o"), help=f"output directory (default ${OUT_ENV} or ./chipletsim-out)"),
        "f0": dict(type=float, help="F0 target frequency, GHz"),
        "step": dict(type=float, help="F1-F0 = F2-F1 spacing, GHz"),
        "sigma": dict(type=float, help="fabrication spread, GHz"),
        "alpha": dict(type=float, help="anharmonicity, GHz"),
        "sizes": dict(type=int, nargs="+", help="monolithic sizes (multiples of 10)"),
        "steps": dict(type=float, nargs="+", help="detuning steps, GHz"),
        "sigmas": dict(type=float, nargs="+", help="fabrication spreads, GHz"),
        "chiplets": dict(type=int, nargs="+", help="chiplet sizes"),
        "dims": dict(nargs="+", help="MCM grids, e.g. 2x3 3x3 (heatmap/bench: N or NxN)"),
        "qubit_cap": dict(type=int, help="largest total qubit count considered"),
        "max_reconfig": dict(type=int, help="shuffles tried per chiplet window"),
        "bond_scales": dict(type=float, nargs="+", help="bump failure-rate multipliers"),
        "device_files": dict(action=argparse.BooleanOptionalAction, help="write one file per MCM"),
        "ratios": dict(type=float, nargs="+", help="link/on-chip infidelity ratios"),
        "families": dict(nargs="+", help="benchmark families"),
        "repeats": dict(type=int, help="independent seeds pooled per cell"),
        "calibration": dict(help="calibration snapshot (JSON); default is synthetic"),
        "synth_median": dict(type=float, help="synthetic calibration median infidelity"),
        "synth_mean": dict(type=float, help="synthetic calibration mean infidelity"),
        "synth_edges": dict(type=int, help="synthetic calibration gate count"),
        "max_detuning": dict(type=float, help="synthetic calibration detuning range, GHz"),
        "bin_width": dict(type=float, help="detuning bin width, GHz"),
    }
    for name in ["seed", "batch", "workers", "out_dir"] + names:
        kw = dict(spec[name])
        flags = kw.pop("flags", ("--" + name.replace("_", "-"),))
        p.add_argument(*flags, dest=name, default=None, **kw)


PLAN = ["f0", "step", "sigma", "alpha"]
CALIB = ["calibration", "synth_median", "synth_mean", "synth_edges", "max_detuning", "bin_width"]
MCM = ["chiplets", "dims", "qubit_cap", "max_reconfig"]

SUBCOMMAND_FLAGS = {
    "sweep": ["f0", "alpha", "sizes", "steps", "sigmas", "qubit_cap"],
    "configs": PLAN + ["chiplets", "dims", "qubit_cap"],
    "assemble": PLAN + MCM + ["bond_scales", "device_files", "ratios"] + CALIB,
    "heatmap": PLAN + MCM + ["ratios", "repeats"] + CALIB,
    "bench": PLAN + MCM + ["ratios", "repeats", "families"] + CALIB,
    "ingest-calib": ["calibration", "bin_width"],
    "synth-calib": CALIB[1:],
}

HELP = {
    "sweep": "collision-free yield over sizes, detuning steps and spreads",
    "configs": "chiplet yield and MCM placement counts",
    "assemble": "known-good-die MCM assembly versus monolithic yield",
    "heatmap": "MCM / monolithic average infidelity per chiplet size, grid and link ratio",
    "bench": "benchmark fidelity-product ratio, MCM versus monolithic",
    "ingest-calib": "bin a calibration snapshot by detuning",
    "synth-calib": "write a synthetic calibration snapshot",
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chipletsim", description="Chiplet vs monolithic superconducting QC simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", "-c", help="YAML config or a previous run's manifest.json")
        _flags(p, SUBCOMMAND_FLAGS[name])
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a config error here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    flags = vars(args)
    conf_path = flags.pop("config")
    try:
        file_values = load_file(conf_path) if conf_path else {}
        file_values.pop("subcommand", None)
        cfg = build_config(file_values, flags)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_experiment(cfg)
    except KeyboardInterrupt:
        raise
    except Exception as exc:  # noqa: BLE001 - report, then map to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
