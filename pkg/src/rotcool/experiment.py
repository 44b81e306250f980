"""Experiment orchestration: config parsing, single runs, seed/size sweeps.

A single run is: build the thermally weighted random-phase ensemble, optimize
the pulse on it, validate the pulse on the full classical ensemble, build the
cooling-cycle map, extract its steady state, and report the cooling metrics.
A sweep crosses ensemble sizes with seeds, never drops failed runs silently,
and emits one CSV per figure-style quantity plus a run-level summary.

All CSV output uses 17-significant-digit floats, so identical configs and
seeds reproduce byte-identical files on one platform.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .basis import MolecularParams, RotorModel, build_model, thermal_populations
from .cycle import (
    CycleMap,
    SteadyState,
    branching_matrix,
    cycle_map,
    decay_rates,
    steady_state,
    write_cycle_map_csv,
)
from .fields import ControlField
from .krotov import KrotovConfig, KrotovRun, build_target_operator, optimize, write_run_csv
from .metrics import (
    CoolingReport,
    fit_exponential_extrapolate,
    numerical_effort,
    sample_std,
)
from .typicality import build_ensemble, embed_ground, full_space_validation

log = logging.getLogger("rotcool")

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "SweepSummary",
    "load_config",
    "run_single",
    "sweep",
    "emit_csv",
    "summary_row",
    "REPORT_HEADER",
]


class ConfigError(ValueError):
    """Invalid or missing experiment configuration."""


@dataclass(eq=False)
class ExperimentConfig:
    params: MolecularParams
    n_samples: int
    dt: float
    guess_amplitude: float
    guess_phase: float
    alpha: float
    max_iters: int
    fitness_target: float
    alpha_scale: float
    stagnation_window: int
    stagnation_rtol: float
    j_cut_g: int | None
    j_cut_e: int | None
    weight_mode: str
    l_list: list[int]
    seeds: list[int]
    out_dir: Path
    extrapolation_threshold: float
    threads: int = 1
    snapshot_every: int = 0

    def guess_field(self) -> ControlField:
        amp = self.guess_amplitude * np.exp(1j * self.guess_phase)
        return ControlField.sine_squared_pulse(amp, self.n_samples, self.dt)

    def krotov_config(self) -> KrotovConfig:
        return KrotovConfig(
            alpha=self.alpha,
            max_iters=self.max_iters,
            fitness_target=self.fitness_target,
            guess_field=self.guess_field(),
            alpha_scale=self.alpha_scale,
            stagnation_window=self.stagnation_window,
            stagnation_rtol=self.stagnation_rtol,
            snapshot_every=self.snapshot_every,
        )


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing '{key}' in [{where}]")
    return section[key]


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc

    try:
        mol = doc.get("molecule", {})
        params = MolecularParams(
            b_g=float(mol.get("b_g", 0.5524)),
            b_e=float(mol.get("b_e", 0.5565)),
            mu0=float(mol.get("mu0", 1.0)),
            gamma0=float(mol.get("gamma0", 1.0e6)),
            j_max_g=int(_require(mol, "j_max_g", "molecule")),
            j_max_e=int(_require(mol, "j_max_e", "molecule")),
            temperature=float(_require(mol, "temperature", "molecule")),
        )
        pulse = doc.get("pulse", {})
        krotov = doc.get("krotov", {})
        target = doc.get("target", {})
        sampling = doc.get("sampling", {})
        output = doc.get("output", {})
        weight_mode = str(sampling.get("weight_mode", "thermal"))
        if weight_mode not in ("thermal", "uniform"):
            raise ConfigError(f"unknown weight_mode '{weight_mode}'")
        l_list = [int(x) for x in _require(sampling, "l_list", "sampling")]
        seeds = [int(x) for x in _require(sampling, "seeds", "sampling")]
        if not l_list:
            raise ConfigError("l_list must not be empty")
        if not seeds:
            raise ConfigError("seeds must not be empty")
        cfg = ExperimentConfig(
            params=params,
            n_samples=int(_require(pulse, "n_samples", "pulse")),
            dt=float(_require(pulse, "dt", "pulse")),
            guess_amplitude=float(pulse.get("guess_amplitude", 0.3)),
            guess_phase=float(pulse.get("guess_phase", 0.0)),
            alpha=float(krotov.get("alpha", 0.5)),
            max_iters=int(krotov.get("max_iters", 300)),
            fitness_target=float(krotov.get("fitness_target", 0.99)),
            alpha_scale=float(krotov.get("alpha_scale", 1.0)),
            stagnation_window=int(krotov.get("stagnation_window", 10)),
            stagnation_rtol=float(krotov.get("stagnation_rtol", 1e-8)),
            j_cut_g=int(target["j_cut_g"]) if "j_cut_g" in target else None,
            j_cut_e=int(target["j_cut_e"]) if "j_cut_e" in target else None,
            weight_mode=weight_mode,
            l_list=l_list,
            seeds=seeds,
            out_dir=Path(output.get("directory", "out")),
            extrapolation_threshold=float(output.get("extrapolation_threshold", 0.01)),
            snapshot_every=int(output.get("snapshot_every", 0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration in {path}: {exc}") from exc
    # fail fast on a guess field that cannot couple the surfaces
    if cfg.guess_amplitude == 0.0:
        raise ConfigError("guess_amplitude must be nonzero: a zero field is a "
                          "stationary point of the update")
    return cfg


@dataclass(eq=False)
class RunResult:
    l: int
    seed: int
    status: str = "ok"
    error: str = ""
    krotov_run: KrotovRun | None = None
    control: ControlField | None = None
    infidelity: float = math.nan
    cycle: CycleMap | None = None
    steady: SteadyState | None = None
    report: CoolingReport | None = None

    @property
    def n_effort(self) -> float:
        if self.krotov_run is None or self.krotov_run.n_iterations < 1:
            return math.nan
        return numerical_effort(self.krotov_run.n_iterations, self.l)


def sampling_weights(config: ExperimentConfig) -> np.ndarray:
    n_ground = (config.params.j_max_g + 1) ** 2
    if config.weight_mode == "uniform":
        return np.full(n_ground, 1.0 / n_ground)
    return thermal_populations(config.params)


def run_single(
    config: ExperimentConfig,
    ell: int,
    seed: int,
    out_dir: Path | None = None,
    model: RotorModel | None = None,
) -> RunResult:
    """One full experiment: sample, optimize, validate, cycle, report."""
    result = RunResult(l=ell, seed=seed)
    try:
        model = model if model is not None else build_model(config.params)
        weights = sampling_weights(config)
        target = build_target_operator(
            config.params, config.j_cut_g, config.j_cut_e, model.basis
        )
        ensemble = build_ensemble(ell, weights, seed, config.weight_mode)
        states = [embed_ground(member.amplitudes, model.dim) for member in ensemble.members]
        member_weights = np.full(ell, 1.0 / ell)

        control, run = optimize(
            states, member_weights, target, config.krotov_config(), model.h0, model.mu_raise
        )
        result.krotov_run = run
        result.control = control
        thermal = thermal_populations(config.params)
        result.infidelity = full_space_validation(
            control, target, thermal, model.h0, model.mu_raise, model.n_ground
        )

        rates = decay_rates(config.params, model.basis)
        branching = branching_matrix(
            rates, [s.label for s in model.basis[model.n_ground:]]
        )
        result.cycle = cycle_map(control, model, branching=branching, rates=rates)
        result.steady = steady_state(result.cycle)
        if result.steady.reducible:
            result.status = "reducible"
            return result
        leak_per_cycle = float(
            np.dot(result.cycle.leaked_per_column, result.steady.populations)
        )
        result.report = CoolingReport.from_populations(
            result.steady.populations,
            config.params,
            leaked_probability=leak_per_cycle,
        )
    except Exception as exc:
        log.warning("run L=%d seed=%d failed: %s", ell, seed, exc)
        result.status = "failed"
        result.error = f"{type(exc).__name__}: {exc}"
        return result

    if out_dir is not None:
        _write_run_artifacts(result, out_dir)
    return result


def _write_run_artifacts(result: RunResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.control.to_csv(out_dir / "field.csv")
    result.control.to_binary(out_dir / "field.qoc")
    write_run_csv(result.krotov_run, out_dir / "krotov.csv")
    write_cycle_map_csv(result.cycle, out_dir / "cycle_map.csv")
    emit_csv(
        out_dir / "report.csv",
        REPORT_HEADER,
        [summary_row(result)],
    )


REPORT_HEADER = [
    "L",
    "seed",
    "status",
    "iterations",
    "stop_reason",
    "fitness",
    "infidelity",
    "entropy",
    "purity",
    "t_eff",
    "delta_s_eff",
    "leaked_probability",
    "spectral_gap",
    "n_effort",
    "error",
]


def summary_row(r: RunResult) -> list:
    run = r.krotov_run
    rep = r.report
    return [
        r.l,
        r.seed,
        r.status,
        run.n_iterations if run else 0,
        run.stop_reason.value if run else "",
        run.fitness[-1] if run else math.nan,
        r.infidelity,
        rep.entropy if rep else math.nan,
        rep.purity if rep else math.nan,
        rep.t_eff if rep else math.nan,
        rep.delta_s_eff if rep else math.nan,
        rep.leaked_probability if rep else math.nan,
        r.steady.gap if r.steady is not None and not r.steady.reducible else math.nan,
        r.n_effort,
        r.error,
    ]


def emit_csv(path, header, rows) -> None:
    """Deterministic CSV: UTF-8, '.' decimals, floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [format(x, ".17g") if isinstance(x, float) else x for x in row]
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc}") from exc


@dataclass(eq=False)
class SweepSummary:
    results: list[RunResult]
    any_failed: bool
    medians: list[tuple[int, float]] = field(default_factory=list)


def sweep(config: ExperimentConfig, threads: int | None = None) -> SweepSummary:
    """Cross product of l_list x seeds; failures become rows, not aborts."""
    threads = threads if threads is not None else config.threads
    model = build_model(config.params)
    jobs = [(ell, seed) for ell in config.l_list for seed in config.seeds]
    out_root = Path(config.out_dir)

    def job(args):
        ell, seed = args
        run_dir = out_root / f"run_L{ell}_seed{seed}"
        return run_single(config, ell, seed, out_dir=run_dir, model=model)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(j) for j in jobs]

    by_key = {(r.l, r.seed): r for r in results}
    ordered = [by_key[(ell, seed)] for ell in config.l_list for seed in config.seeds]

    emit_csv(out_root / "summary.csv", REPORT_HEADER, [summary_row(r) for r in ordered])
    emit_csv(
        out_root / "iterations.csv",
        ["L", "seed", "iterations_to_target", "n_effort"],
        [
            [r.l, r.seed, r.krotov_run.n_iterations if r.krotov_run else 0, r.n_effort]
            for r in ordered
        ],
    )
    emit_csv(
        out_root / "infidelity.csv",
        ["L", "seed", "infidelity"],
        [[r.l, r.seed, r.infidelity] for r in ordered],
    )
    emit_csv(
        out_root / "entropy.csv",
        ["L", "seed", "delta_s_eff"],
        [[r.l, r.seed, r.report.delta_s_eff if r.report else math.nan] for r in ordered],
    )

    # relative STD of the full-space infidelity over growing seed prefixes
    std_rows = []
    for ell in config.l_list:
        vals = [by_key[(ell, s)].infidelity for s in config.seeds]
        for n in range(2, len(vals) + 1):
            prefix = [v for v in vals[:n] if not math.isnan(v)]
            if len(prefix) >= 2 and np.mean(prefix) != 0.0:
                std_rows.append([ell, n, sample_std(prefix)])
    emit_csv(out_root / "std.csv", ["L", "n", "std"], std_rows)

    medians = []
    for ell in config.l_list:
        vals = [
            by_key[(ell, s)].infidelity
            for s in config.seeds
            if not math.isnan(by_key[(ell, s)].infidelity)
        ]
        if vals:
            medians.append((ell, float(np.median(vals))))
    fit_rows = []
    if len(medians) >= 3 and all(v > 0 for _, v in medians):
        fit = fit_exponential_extrapolate(medians, config.extrapolation_threshold)
        fit_rows.append(
            [
                config.extrapolation_threshold,
                fit.a,
                fit.b,
                fit.crossing,
                "yes" if fit.converging else "no",
            ]
        )
    emit_csv(
        out_root / "extrapolation.csv",
        ["threshold", "a", "b", "crossing_L", "converging"],
        fit_rows,
    )

    any_failed = any(r.status != "ok" for r in ordered)
    return SweepSummary(results=ordered, any_failed=any_failed, medians=medians)
