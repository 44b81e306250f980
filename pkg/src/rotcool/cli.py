"""Command-line driver.

Subcommands:
  run             one optimization run (first L and seed from the config
                  unless overridden)
  sweep           full l_list x seeds sweep with per-figure CSV output
  steady-state    cycle map and steady state of a saved field
  validate-field  full-space infidelity of a saved field

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .basis import build_model, thermal_populations
from .cycle import branching_matrix, cycle_map, decay_rates, steady_state, write_cycle_map_csv
from .experiment import (
    ConfigError,
    emit_csv,
    load_config,
    run_single,
    summary_row,
    sweep,
    REPORT_HEADER,
)
from .fields import ControlField
from .krotov import build_target_operator
from .typicality import full_space_validation

log = logging.getLogger("rotcool")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotcool",
        description="Shaped-pulse rotational cooling with random-phase sampling",
    )
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_field=False):
        p.add_argument("--config", required=True, help="TOML experiment configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if needs_field:
            p.add_argument("--field", required=True,
                           help="saved control field (.csv or binary)")

    p_run = sub.add_parser("run", help="single optimization run")
    common(p_run)
    p_run.add_argument("--seed", type=int, default=None, help="RNG seed (default: first in config)")
    p_run.add_argument("--ensemble-size", type=int, default=None,
                       help="number of random-phase states (default: first in config)")
    p_run.add_argument("--threads", type=int, default=1)

    p_sweep = sub.add_parser("sweep", help="full L x seed sweep")
    common(p_sweep)
    p_sweep.add_argument("--threads", type=int, default=1)

    p_ss = sub.add_parser("steady-state", help="steady state of a saved field")
    common(p_ss, needs_field=True)

    p_val = sub.add_parser("validate-field", help="full-space infidelity of a saved field")
    common(p_val, needs_field=True)
    return parser


def _load_field(path: str) -> ControlField:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"field file not found: {p}")
    if p.suffix == ".csv":
        return ControlField.from_csv(p)
    return ControlField.from_binary(p)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        if args.out is not None:
            config.out_dir = Path(args.out)
    except ConfigError as exc:
        log.error("%s", exc)
        return 1

    try:
        if args.command == "run":
            seed = args.seed if args.seed is not None else config.seeds[0]
            ell = args.ensemble_size if args.ensemble_size is not None else config.l_list[0]
            out_dir = Path(config.out_dir) / f"run_L{ell}_seed{seed}"
            result = run_single(config, ell, seed, out_dir=out_dir)
            if result.status == "failed":
                log.error("run failed: %s", result.error)
                return 2
            log.info(
                "L=%d seed=%d: fitness %.6f in %d iterations, full-space infidelity %.6f",
                ell, seed, result.krotov_run.fitness[-1],
                result.krotov_run.n_iterations, result.infidelity,
            )
            return 0

        if args.command == "sweep":
            summary = sweep(config, threads=args.threads)
            n_ok = sum(1 for r in summary.results if r.status == "ok")
            log.info("sweep finished: %d/%d runs ok, outputs in %s",
                     n_ok, len(summary.results), config.out_dir)
            return 3 if summary.any_failed else 0

        # the remaining commands analyze an existing field
        control = _load_field(args.field)
        model = build_model(config.params)
        target = build_target_operator(
            config.params, config.j_cut_g, config.j_cut_e, model.basis
        )
        out_root = Path(config.out_dir)

        if args.command == "steady-state":
            rates = decay_rates(config.params, model.basis)
            branching = branching_matrix(
                rates, [s.label for s in model.basis[model.n_ground:]]
            )
            cm = cycle_map(control, model, branching=branching, rates=rates)
            ss = steady_state(cm)
            out_root.mkdir(parents=True, exist_ok=True)
            write_cycle_map_csv(cm, out_root / "cycle_map.csv")
            if ss.reducible:
                log.error("reducible cycle map: %d unit eigenvectors",
                          ss.unit_eigenvectors.shape[1])
                return 2
            emit_csv(
                out_root / "steady_state.csv",
                ["label", "population"],
                [[lab, float(p)] for lab, p in zip(cm.labels, ss.populations)],
            )
            log.info("steady state written; spectral gap %.3e, residual %.2e, max leak %.3e",
                     ss.gap, ss.residual, cm.max_leak())
            return 0

        if args.command == "validate-field":
            weights = thermal_populations(config.params)
            infid = full_space_validation(
                control, target, weights, model.h0, model.mu_raise, model.n_ground
            )
            out_root.mkdir(parents=True, exist_ok=True)
            emit_csv(out_root / "validation.csv", ["infidelity"], [[float(infid)]])
            log.info("full-space infidelity %.8f", infid)
            return 0

        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:
        log.error("runtime failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
