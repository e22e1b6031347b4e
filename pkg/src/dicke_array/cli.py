"""Command line: ``dicke-array {dynamics,dos,lg,pipeline} --config run.yaml``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import OUT_DIR_ENV, dump_default_config, load_config
from .errors import ConfigError, ConvergenceError
from .pipeline import (
    Recorder,
    resolve_model,
    run_dos,
    run_dynamics,
    run_lg,
    run_pipeline,
    stage,
    upstream_products,
    write_manifest,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dicke-array", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")
    common.add_argument("--config", help="YAML run configuration (defaults apply to missing keys)")
    common.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or ./out)")
    common.add_argument("--n", type=int, nargs="+", help="emitter numbers (dynamics) or the DOS N (dos)")
    common.add_argument("--dt", type=float, help="time step of the stage's time grid")
    common.add_argument("--t-max", type=float, help="end time of the stage's time grid")
    common.add_argument("--g-mev", type=float, help="explicit coupling g in meV")
    common.add_argument("--kappa-mev", type=float, help="explicit photon loss kappa in meV")
    common.add_argument("--gamma-per-ns", type=float, help="polarization decay gamma in 1/ns")
    common.add_argument("--variant", action="append", help="LG variant (repeatable)")
    for name, help_ in (
        ("dynamics", "retarded decay of the Dicke state for each N"),
        ("dos", "density of states and its Lorentzian fit"),
        ("lg", "Leggett-Garg scans of the effective model"),
        ("pipeline", "dynamics -> dos -> effective model -> LG, with manifest"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    sub.add_parser("show-config", help="print the default configuration")
    return parser


def overrides_from(args) -> dict:
    out = {}
    if args.out_dir is not None:
        out["output.directory"] = args.out_dir
    if args.n is not None:
        if args.command == "dos":
            out["spectral.n"] = args.n[0]
        else:
            out["dynamics.n"] = list(args.n)
    stage_key = "lg" if args.command == "lg" else "dynamics"
    if args.dt is not None:
        out[f"{stage_key}.dt"] = args.dt
    if args.t_max is not None:
        out[f"{stage_key}.t_max"] = args.t_max
    if args.g_mev is not None:
        out["effective.g_mev"] = args.g_mev
        out["effective.g_source"] = "explicit"
    if args.kappa_mev is not None:
        out["effective.kappa_mev"] = args.kappa_mev
        out["effective.kappa_source"] = "explicit"
    if args.gamma_per_ns is not None:
        out["effective.gamma_per_ns"] = args.gamma_per_ns
    if args.variant is not None:
        out["lg.variants"] = list(args.variant)
    return out


def run(args) -> None:
    cfg = load_config(args.config, overrides_from(args))
    rec = Recorder(cfg.out_dir)
    if args.command == "dynamics":
        with stage("dynamics"):
            summary = run_dynamics(cfg, rec)
        write_manifest(cfg, rec, {"dynamics": summary["runs"]}, "dynamics")
    elif args.command == "dos":
        with stage("dos"):
            result = run_dos(cfg, rec)
        write_manifest(cfg, rec, {"fit": result["sidecar"]}, "dos")
    elif args.command == "lg":
        period, fwhm = upstream_products(cfg)
        model, sources = resolve_model(cfg, period=period, fit_fwhm=fwhm)
        with stage("lg"):
            result = run_lg(cfg, rec, model, sources)
        write_manifest(cfg, rec, result, "lg")
    else:
        run_pipeline(cfg, rec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "show-config":
        sys.stdout.write(dump_default_config())
        return EXIT_OK
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
