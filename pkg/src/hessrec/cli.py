"""Command-line interface.

Subcommands: ``recover`` (single solve, from a measurement CSV or a
synthetic instance), ``sweep`` (phase-transition grid), ``estimate-hessian``
(zeroth-order pipeline on a builtin function), ``verify-theory`` (the check
battery), and ``plot`` (CSV to SVG).

Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import constants as C
from .bench import (
    CsvSchemaError,
    config_to_experiment,
    emit_plot,
    estimate_hessian,
    load_config,
    phase_sweep,
    summarize,
    verify_theory,
)
from .matcore import numerical_rank
from .recovery import recovery_error, solve_nuclear_min
from .sampling import (
    MeasurementError,
    MeasurementSet,
    build_measurement_set,
    builtin_function,
    make_instance,
    splitmix64,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _shared_flags(parser):
    parser.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    parser.add_argument("--seed", type=int, help="base seed (64-bit)")
    parser.add_argument("--out", metavar="PATH", help="output file path")
    parser.add_argument("--workers", type=int, help="parallel trial workers")
    parser.add_argument("--success-tol", type=float, dest="success_tol",
                        help="relative error counted as success")
    parser.add_argument("--delta", type=float, help="finite-difference step")
    parser.add_argument("--mode", choices=("exact", "fd"), help="measurement mode")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hessrec",
        description="Low-rank Hessian recovery from bilinear sphere probes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rec = sub.add_parser("recover", help="solve one trace-norm recovery")
    _shared_flags(p_rec)
    p_rec.add_argument("--measurements", metavar="PATH",
                       help="measurement CSV (i,b,u_*,v_*); otherwise synthesize")
    p_rec.add_argument("--n", type=int, help="dimension for a synthetic instance")
    p_rec.add_argument("--r", type=int, help="rank for a synthetic instance")
    p_rec.add_argument("--M", type=int, help="measurement count for synthesis")

    p_swp = sub.add_parser("sweep", help="phase-transition sweep over (n, r, M)")
    _shared_flags(p_swp)
    p_swp.add_argument("--n-list", dest="n_list", help="comma-separated dimensions")
    p_swp.add_argument("--r-list", dest="r_list", help="comma-separated ranks")
    p_swp.add_argument("--m-list", dest="m_list", help="explicit measurement counts")
    p_swp.add_argument("--m-mults", dest="m_mults",
                       help="measurement grid as multiples of dim(T)")
    p_swp.add_argument("--trials", type=int, help="trials per cell")

    p_est = sub.add_parser("estimate-hessian", help="zeroth-order pipeline end to end")
    _shared_flags(p_est)
    p_est.add_argument("--builtin", default="quadratic_lowrank",
                       choices=("quadratic_lowrank", "ridge_composite",
                                "logistic_composite"))
    p_est.add_argument("--n", type=int, default=12)
    p_est.add_argument("--r", type=int, default=2)
    p_est.add_argument("--M", type=int, help="measurement count (default 3 dim T)")
    p_est.add_argument("--at-origin", action="store_true",
                       help="evaluate at x = 0 instead of a seeded random point")

    p_ver = sub.add_parser("verify-theory", help="run the theory-check battery")
    _shared_flags(p_ver)
    p_ver.add_argument("--checks", help="comma-separated subset "
                       "(moments,factorial,concentration,leakage,golfing,minimizer)")
    p_ver.add_argument("--trials", type=int, help="seeded trials per check")
    p_ver.add_argument("--moment-samples", type=int, dest="moment_samples",
                       help="Monte-Carlo draws per moment row")

    p_plt = sub.add_parser("plot", help="render a CSV as a deterministic SVG")
    _shared_flags(p_plt)
    p_plt.add_argument("csv", help="input CSV (trial or theory schema)")
    p_plt.add_argument("--kind", choices=("phase", "decay"), default="phase")
    return parser


def _settings(args):
    """Merge config file values with explicit CLI flags (flags win)."""
    raw = {}
    if args.config:
        raw.update(load_config(args.config))
    for key in ("seed", "out", "workers", "success_tol", "delta", "mode",
                "n_list", "r_list", "m_list", "m_mults", "trials",
                "moment_samples"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    return raw


def _cmd_recover(args):
    raw = _settings(args)
    seed = int(raw.get("seed", C.DEFAULT_BASE_SEED))
    inst = None
    if args.measurements:
        ms = MeasurementSet.from_csv(args.measurements)
    else:
        n = args.n or 10
        r = args.r or 1
        M = args.M
        if M is None:
            M = C.recovery_m(n, r) if (n, r) in C.RECOVERY_C else 3 * C.dim_tangent(n, r)
        rng = np.random.default_rng(splitmix64(seed))
        inst = make_instance(n, r, rng)
        ms = build_measurement_set(inst, M, rng)
    sol = solve_nuclear_min(ms)
    print(f"status            {sol.status}")
    print(f"iterations        {sol.iterations}")
    print(f"primal residual   {sol.primal_residual:.3e}")
    print(f"nuclear norm      {sol.nuclear_norm:.6f}")
    print(f"numerical rank    {numerical_rank(sol.H_hat)}")
    if inst is not None:
        print(f"relative error    {recovery_error(sol.H_hat, inst.H):.3e}")
    if raw.get("out"):
        np.savetxt(raw["out"], sol.H_hat, delimiter=",")
        print(f"wrote {raw['out']}")
    return EXIT_OK if sol.status == "converged" else EXIT_CHECK_FAILED


def _cmd_sweep(args):
    raw = _settings(args)
    cfg = config_to_experiment(raw, command="sweep")
    records = phase_sweep(cfg)
    for row in summarize(records):
        print(f"n={row['n']:>3} r={row['r']} M={row['M']:>5}  "
              f"success {row['successes']:>2}/{row['trials']}  "
              f"median rel_error {row['median_rel_error']:.3e}")
    if cfg.output_path:
        print(f"wrote {cfg.output_path}")
    return EXIT_OK


def _cmd_estimate(args):
    raw = _settings(args)
    seed = int(raw.get("seed", C.DEFAULT_BASE_SEED))
    n, r = args.n, args.r
    M = args.M or 3 * C.dim_tangent(n, r)
    delta = float(raw.get("delta", C.FD_DELTA_QUADRATIC
                           if args.builtin == "quadratic_lowrank"
                           else C.FD_DELTA_LOGISTIC))
    rng = np.random.default_rng(splitmix64(seed))
    oracle = builtin_function(args.builtin, n, r=r, rng=rng)
    x = np.zeros(n) if args.at_origin else rng.standard_normal(n)
    H_hat, diag = estimate_hessian(oracle, x, r, M, delta, rng=rng)
    print(f"builtin           {args.builtin} (n={n}, r={r})")
    print(f"measurements      {M} (fd evals {diag['fd_evals']})")
    print(f"status            {diag['status']} after {diag['iterations']} iters")
    print(f"numerical rank    {numerical_rank(H_hat)} (guess {r})")
    if "rel_op_error" in diag:
        print(f"op-norm error     {diag['op_error']:.3e} "
              f"({diag['rel_op_error']:.3e} relative)")
    if raw.get("out"):
        np.savetxt(raw["out"], H_hat, delimiter=",")
        print(f"wrote {raw['out']}")
    return EXIT_OK


def _cmd_verify(args):
    raw = _settings(args)
    checks = None
    if args.checks:
        checks = tuple(s.strip() for s in args.checks.split(",") if s.strip())
    rows, all_pass = verify_theory(
        out_path=raw.get("out"),
        base_seed=int(raw.get("seed", C.DEFAULT_BASE_SEED)),
        trials=int(raw.get("trials", C.N_TRIALS)),
        moment_samples=int(raw.get("moment_samples", C.MOMENT_SAMPLES)),
        checks=checks,
    )
    gating = [row for row in rows if row.bound != ""]
    for row in gating:
        mark = "pass" if row.passed else "FAIL"
        print(f"[{mark}] {row.check:<24} {row.params:<40} "
              f"value {row.value:.4g}  bound {row.bound}")
    print(f"{sum(r.passed for r in gating)}/{len(gating)} checks passed")
    if raw.get("out"):
        print(f"wrote {raw['out']}")
    return EXIT_OK if all_pass else EXIT_CHECK_FAILED


def _cmd_plot(args):
    raw = _settings(args)
    out = raw.get("out") or f"{args.csv.rsplit('.', 1)[0]}.svg"
    emit_plot(args.csv, args.kind, out)
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "recover": _cmd_recover,
        "sweep": _cmd_sweep,
        "estimate-hessian": _cmd_estimate,
        "verify-theory": _cmd_verify,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except (OSError, CsvSchemaError, MeasurementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
