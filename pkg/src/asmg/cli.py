"""Command line front end.

Only stdlib imports may appear at module level: ASMG_THREADS has to be
turned into BLAS thread caps before numpy is first imported.
"""

import argparse
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _configure_threads():
    cap = os.environ.get("ASMG_THREADS")
    if not cap:
        return
    for var in _THREAD_VARS:
        os.environ.setdefault(var, cap)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit code 3 for bad usage, not argparse's default 2
    def error(self, message):
        raise _UsageError(message)


def _add_common(p):
    p.add_argument("config", nargs="?", default=None,
                   help="optional key=value config file; flags override it")
    p.add_argument("--case", choices=["a", "b", "c"], default=None)
    p.add_argument("--n", type=int, default=None, help="cells per side")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--q", type=int, default=None, help="contrast exponent")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cycle", choices=["V", "W"], default=None)
    p.add_argument("--m", type=int, default=None, help="smoothing sweeps")
    p.add_argument("--nu", type=int, default=None,
                   help="stabilization iterations (0 picks the cycle default)")
    p.add_argument("--varpi", type=float, default=None,
                   help="inner velocity-solve reduction factor")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--coeff-file", default=None, help="permeability raster")
    p.add_argument("--rhs-c", type=float, default=None,
                   help="source/sink strength of the two-box right-hand side")
    p.add_argument("--out", default=None, help="CSV report path (raster for gen)")
    p.add_argument("--sub-cells", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=None)


def _build_parser():
    parser = _Parser(prog="asmg",
                     description="auxiliary space multigrid benchmarks")
    sub = parser.add_subparsers(dest="study", required=True)
    doc = {
        "run": "standalone velocity-block solve (zero rhs, random start)",
        "minres": "block-preconditioned MinRes on the saddle-point system",
        "diag": "condition and complexity diagnostics",
        "gen": "generate a permeability raster",
    }
    for name in ("run", "minres", "diag", "gen"):
        p = sub.add_parser(name, help=doc[name])
        _add_common(p)
        if name == "diag":
            p.add_argument("--cpi", action="store_true",
                           help="projection norm of the two-level split")
            p.add_argument("--rhoe", action="store_true",
                           help="error-propagation norm of the linear cycle")
            p.add_argument("--complexity", action="store_true",
                           help="operator complexity across levels")
    return parser


_FLAG_TO_FIELD = {
    "case": "case", "n": "n", "levels": "levels", "q": "q", "seed": "seed",
    "cycle": "cycle", "m": "m", "nu": "nu", "varpi": "varpi", "tol": "tol",
    "tau": "tau", "coeff_file": "coeff_file", "rhs_c": "rhs_c", "out": "out",
    "sub_cells": "sub_cells", "stride": "stride", "max_iter": "max_iter",
}


def _config_from_args(diag_mod, args):
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = diag_mod.ExperimentConfig.from_text(fh.read())
    else:
        cfg = diag_mod.ExperimentConfig()
    cfg.study = args.study
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, name, value)
    for flag in ("cpi", "rhoe", "complexity"):
        if getattr(args, flag, False):
            setattr(cfg, flag, True)
    return cfg


def _print_row(row):
    study = row.get("study")
    if study == "gen":
        print("raster written")
        return
    if study == "diag":
        for key in ("c_pi", "rho_e", "complexity"):
            if key in row:
                print(f"{key} = {row[key]:.6g}")
        if "nnz_levels" in row:
            print(f"nnz per level: {row['nnz_levels']}")
        return
    it = row.get("iterations", "-")
    ok = "converged" if row.get("converged") else "did not converge"
    line = f"{study}: {ok} in {it} iterations"
    if "rho_r" in row:
        line += f", rho_r = {row['rho_r']:.4f}"
    if row.get("n_asmg_max"):
        line += f", inner multigrid iterations <= {row['n_asmg_max']}"
    if row.get("n_i_max"):
        line += f", inner diagonal-block iterations <= {row['n_i_max']}"
    print(line)


def main(argv=None) -> int:
    _configure_threads()
    from . import diag as diag_mod
    from .errors import (
        BreakdownError,
        CoefficientError,
        ConfigurationError,
        DimensionError,
        FactorizationError,
        RasterError,
        SolverStallError,
    )

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    try:
        cfg = _config_from_args(diag_mod, args)
        report = diag_mod.run_experiment(cfg)
    except (ConfigurationError, CoefficientError, DimensionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except (RasterError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except (SolverStallError, BreakdownError, FactorizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2

    row = report.rows[0]
    _print_row(row)
    if row.get("converged") is False:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
