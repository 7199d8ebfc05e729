"""Experiment harness: seeded recovery trials, phase-transition sweeps,
end-to-end black-box Hessian estimation, the theory-check battery, and
CSV/SVG reporting.

Every run is a pure function of (configuration, base seed): trial seeds
come from SplitMix64, results are collected in a fixed order regardless of
worker count, and files are written atomically.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .certify import (
    apply_sampler,
    cone_condition,
    golfing_certificate,
    composition_factorial_bound,
    composition_factorial_max,
    moment_closed_form,
    moment_monte_carlo,
    operator_concentration,
    minimizer_inequality,
    tangent_leakage,
)
from .matcore import matrix_sign, schatten_norm, tangent_project
from .recovery import (
    SolverConfig,
    recovery_error,
    solve_min_frobenius,
    solve_nuclear_min,
)
from .sampling import (
    FunctionOracle,
    build_measurement_set,
    make_instance,
    splitmix64,
)

__all__ = [
    "CsvSchemaError",
    "ExperimentConfig",
    "TheoryRow",
    "TrialRecord",
    "emit_plot",
    "estimate_hessian",
    "load_config",
    "m_grid",
    "phase_sweep",
    "read_trial_csv",
    "run_trial",
    "summarize",
    "verify_theory",
    "write_trial_csv",
]

TRIAL_HEADER = [
    "n", "r", "M", "trial", "seed", "rel_error", "success",
    "iterations", "primal_residual", "wall_ms", "fd_evals",
]
THEORY_HEADER = ["check", "params", "value", "bound", "pass"]


class CsvSchemaError(ValueError):
    """A CSV file does not match the expected schema."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass
class TrialRecord:
    """One experiment outcome row."""

    n: int
    r: int
    M: int
    trial: int
    seed: int
    rel_error: float
    success: bool
    iterations: int
    primal_residual: float
    wall_ms: int
    fd_evals: int


@dataclass
class ExperimentConfig:
    """Settings for the harness.

    ``command`` is the subcommand being run; ``mode`` selects exact or
    finite-difference measurements (the ``--mode`` flag).  ``m_list`` is
    an explicit measurement grid; when absent the sweep uses
    ``m_mults`` x dim(T), clamped to n**2.
    """

    command: str = "sweep"
    n_list: tuple = (10, 20)
    r_list: tuple = (1, 2)
    m_list: tuple | None = None
    m_mults: tuple = C.SWEEP_M_MULTIPLES
    trials: int = 20
    base_seed: int = C.DEFAULT_BASE_SEED
    delta: float = 1e-4
    mode: str = "exact"
    success_tol: float = C.SUCCESS_TOL
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.n_list or not self.r_list:
            raise ValueError("n and r grids must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("exact", "fd"):
            raise ValueError("mode must be 'exact' or 'fd'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def m_grid(n, r, m_mults=C.SWEEP_M_MULTIPLES):
    """Measurement grid as multiples of dim(T), clamped to n**2."""
    dim_t = C.dim_tangent(n, r)
    vals = sorted({min(math.ceil(k * dim_t), n * n) for k in m_mults})
    return vals


def run_trial(n, r, M, trial, base_seed=C.DEFAULT_BASE_SEED, mode="exact",
              delta=1e-4, success_tol=C.SUCCESS_TOL, solver=None):
    """One seeded recovery trial; never raises on solver failure.

    The trial seed is ``splitmix64(base_seed ^ trial)``; the instance and
    the measurement directions are drawn from that single stream, so the
    record is a pure function of (base_seed, n, r, M, trial, mode, delta)
    up to timing.
    """
    seed = splitmix64(base_seed ^ trial)
    rng = np.random.default_rng(seed)
    inst = make_instance(n, r, rng)
    fd_evals = 0
    t0 = time.perf_counter()
    if mode == "fd":
        H = inst.H
        oracle = FunctionOracle(n, lambda x: 0.5 * float(x @ (H @ x)))
        ms = build_measurement_set(oracle, M, rng, x=np.zeros(n), delta=delta)
        fd_evals = oracle.eval_count
    else:
        ms = build_measurement_set(inst, M, rng)
    sol = solve_nuclear_min(ms, solver)
    wall_ms = int(round(1000.0 * (time.perf_counter() - t0)))
    rel = recovery_error(sol.H_hat, inst.H)
    return TrialRecord(
        n=n, r=r, M=M, trial=trial, seed=seed,
        rel_error=rel, success=bool(rel <= success_tol),
        iterations=sol.iterations, primal_residual=sol.primal_residual,
        wall_ms=wall_ms, fd_evals=fd_evals,
    )


def _sweep_cells(cfg):
    cells = []
    for n in cfg.n_list:
        for r in cfg.r_list:
            if r > n:
                continue
            ms = list(cfg.m_list) if cfg.m_list else m_grid(n, r, cfg.m_mults)
            for M in ms:
                for t in range(cfg.trials):
                    cells.append((n, r, M, t))
    if not cells:
        raise ValueError("sweep grid is empty (is r <= n for some pair?)")
    return cells


def phase_sweep(cfg):
    """Run the full trial grid and return records in deterministic order.

    Writes the trial CSV (plus a ``.summary.csv`` sibling with per-cell
    success rates) when ``cfg.output_path`` is set.
    """
    cells = _sweep_cells(cfg)

    def work(cell):
        n, r, M, t = cell
        return run_trial(
            n, r, M, t, base_seed=cfg.base_seed, mode=cfg.mode,
            delta=cfg.delta, success_tol=cfg.success_tol, solver=cfg.solver,
        )

    if cfg.workers == 1:
        records = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(work, cells))
    records.sort(key=lambda rec: (rec.n, rec.r, rec.M, rec.trial))
    if cfg.output_path:
        write_trial_csv(cfg.output_path, records)
        write_summary_csv(_summary_path(cfg.output_path), summarize(records))
    return records


def summarize(records):
    """Per-cell success rates, ordered by (n, r, M)."""
    cells = {}
    for rec in records:
        cells.setdefault((rec.n, rec.r, rec.M), []).append(rec)
    rows = []
    for (n, r, M), recs in sorted(cells.items()):
        successes = sum(rec.success for rec in recs)
        rows.append({
            "n": n, "r": r, "M": M, "trials": len(recs),
            "successes": successes, "success_rate": successes / len(recs),
            "median_rel_error": float(np.median([rec.rel_error for rec in recs])),
        })
    return rows


def _summary_path(path):
    root, ext = os.path.splitext(path)
    return f"{root}.summary{ext or '.csv'}"


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_trial_csv(path, records):
    lines = [",".join(TRIAL_HEADER)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, k)) for k in TRIAL_HEADER))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_summary_csv(path, rows):
    header = ["n", "r", "M", "trials", "successes", "success_rate", "median_rel_error"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in header))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_trial_csv(path):
    """Exact inverse of :func:`write_trial_csv`."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIAL_HEADER:
            raise CsvSchemaError(path, 1, f"expected header {','.join(TRIAL_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRIAL_HEADER):
                raise CsvSchemaError(path, lineno, f"expected {len(TRIAL_HEADER)} fields")
            try:
                records.append(TrialRecord(
                    n=int(row[0]), r=int(row[1]), M=int(row[2]),
                    trial=int(row[3]), seed=int(row[4]),
                    rel_error=float(row[5]), success={"true": True, "false": False}[row[6]],
                    iterations=int(row[7]), primal_residual=float(row[8]),
                    wall_ms=int(row[9]), fd_evals=int(row[10]),
                ))
            except (ValueError, KeyError) as exc:
                raise CsvSchemaError(path, lineno, f"bad field: {exc}") from exc
    return records


def estimate_hessian(oracle, x, r_guess, M, delta, solver=None, rng=None):
    """Full zeroth-order pipeline: stencil probes, then trace-norm recovery.

    Returns ``(H_hat, diagnostics)``; diagnostics include the exact
    function-evaluation budget (4 per measurement) and, when the oracle
    carries an analytic Hessian, the operator-norm estimation error.
    """
    if M < 1:
        raise ValueError("measurement count M must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    x = np.asarray(x, dtype=float)
    evals_before = oracle.eval_count
    ms = build_measurement_set(oracle, M, rng, x=x, delta=delta)
    sol = solve_nuclear_min(ms, solver)
    diagnostics = {
        "fd_evals": oracle.eval_count - evals_before,
        "iterations": sol.iterations,
        "status": sol.status,
        "primal_residual": sol.primal_residual,
        "nuclear_norm": sol.nuclear_norm,
        "r_guess": r_guess,
    }
    if oracle.hessian is not None:
        H = np.asarray(oracle.hessian(x), dtype=float)
        h_norm = schatten_norm(H, "operator")
        diagnostics["hessian_norm"] = h_norm
        diagnostics["op_error"] = schatten_norm(sol.H_hat - H, "operator")
        diagnostics["rel_op_error"] = diagnostics["op_error"] / max(h_norm, 1e-300)
    return sol.H_hat, diagnostics


@dataclass
class TheoryRow:
    """One line of the theory-check table."""

    check: str
    params: str
    value: float
    bound: str
    passed: bool


def _row(check, params, value, bound, passed):
    return TheoryRow(check=check, params=params, value=float(value),
                     bound=bound, passed=bool(passed))


def _moment_rows(base_seed, samples):
    rows = []
    for n in C.MOMENT_NS:
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_MOMENT, n))
        for p in C.MOMENT_PS_EVEN + C.MOMENT_PS_ODD:
            mean, se = moment_monte_carlo(n, p, samples, rng)
            target = moment_closed_form(n, p) if p % 2 == 0 else 0.0
            sigmas = abs(mean - target) / se
            kind = "moment_even" if p % 2 == 0 else "moment_odd"
            rows.append(_row(kind, f"n={n};p={p};samples={samples}", sigmas,
                             repr(C.MOMENT_SIGMA), sigmas <= C.MOMENT_SIGMA))
    return rows


def _factorial_rows():
    rows = []
    for r in C.FACTORIAL_R_RANGE:
        for p in C.FACTORIAL_P_RANGE:
            best, _ = composition_factorial_max(r, p)
            bound = composition_factorial_bound(r, p)
            rows.append(_row("factorial_bound", f"r={r};p={p}", float(best),
                             repr(float(bound)), best <= bound))
    return rows


def _concentration_rows(base_seed, trials):
    rows = []
    n, r, M = C.CONC_N, C.CONC_R, C.CONC_M
    hits = 0
    for t in range(trials):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_CONC, t))
        inst = make_instance(n, r, rng)
        ms = build_measurement_set(inst, M, rng)
        rep = operator_concentration(inst.T, ms, method="power_iteration")
        hits += rep.event_holds
        rows.append(_row("concentration_profile", f"n={n};r={r};M={M};seed={t}",
                         rep.deviation_norm, "", True))
    rate = hits / trials
    rows.append(_row("concentration_event", f"n={n};r={r};M={M};trials={trials}",
                     rate, "0.9", rate >= 0.9))

    ratios = []
    for t in range(trials):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_CONC_RATIO, t))
        inst = make_instance(n, r, rng)
        d1 = operator_concentration(
            inst.T, build_measurement_set(inst, M, rng), method="power_iteration"
        ).deviation_norm
        d4 = operator_concentration(
            inst.T, build_measurement_set(inst, 4 * M, rng), method="power_iteration"
        ).deviation_norm
        ratios.append(d1 / d4)
        rows.append(_row("concentration_profile", f"n={n};r={r};M={4 * M};seed={t}",
                         d4, "", True))
    med = float(np.median(ratios))
    lo, hi = C.CONC_RATIO_RANGE
    rows.append(_row("concentration_ratio", f"n={n};r={r};M={M};trials={trials}",
                     med, f"{lo}..{hi}", lo <= med <= hi))

    diffs = []
    na, ra, Ma = C.CONC_AGREE_N, C.CONC_AGREE_R, C.CONC_AGREE_M
    for t in range(10):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_CONC_AGREE, t))
        inst = make_instance(na, ra, rng)
        ms = build_measurement_set(inst, Ma, rng)
        dense = operator_concentration(inst.T, ms, method="dense_kron").deviation_norm
        power = operator_concentration(inst.T, ms, method="power_iteration").deviation_norm
        diffs.append(abs(dense - power))
    rows.append(_row("concentration_agree", f"n={na};r={ra};M={Ma};trials=10",
                     max(diffs), repr(C.CONC_AGREE_TOL), max(diffs) <= C.CONC_AGREE_TOL))
    return rows


def _leakage_rows(base_seed, trials):
    rows = []
    n, r, M = C.LEAK_N, C.LEAK_R, C.LEAK_M
    hits = 0
    for t in range(trials):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_LEAK, t))
        inst = make_instance(n, r, rng)
        G = tangent_project(inst.T, rng.standard_normal((n, n)))
        ms = build_measurement_set(inst, M, rng)
        leak = tangent_leakage(inst.T, G, ms)
        hits += leak <= schatten_norm(G, "operator") / (4.0 * math.sqrt(r))
    rate = hits / trials
    rows.append(_row("leakage_rate", f"n={n};r={r};M={M};trials={trials}",
                     rate, "0.9", rate >= 0.9))

    medians = []
    for M_dec in (1000, 4000):
        leaks = []
        for t in range(trials):
            rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_LEAK_DECAY, t))
            inst = make_instance(10, 2, rng)
            G = tangent_project(inst.T, rng.standard_normal((10, 10)))
            ms = build_measurement_set(inst, M_dec, rng)
            leaks.append(tangent_leakage(inst.T, G, ms))
        medians.append(float(np.median(leaks)))
    rows.append(_row("leakage_decay", f"n=10;r=2;M=4000-vs-1000;trials={trials}",
                     medians[1], f"<{medians[0]!r}", medians[1] < medians[0]))

    meds = []
    for M_u in (100, 1000, 10000):
        gaps = []
        for t in range(trials):
            rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_UNBIASED, t))
            inst = make_instance(10, 2, rng)
            G = tangent_project(inst.T, rng.standard_normal((10, 10)))
            ms = build_measurement_set(inst, M_u, rng)
            SG = apply_sampler(ms.U, ms.V, G)
            gaps.append(float(np.linalg.norm(SG - G)))
        med = float(np.median(gaps))
        meds.append(med)
        rows.append(_row("sampler_unbiased_profile", f"n=10;r=2;M={M_u};trials={trials}",
                         med, "", True))
    decreasing = meds[0] > meds[1] > meds[2]
    rows.append(_row("sampler_unbiased_decay", "n=10;r=2;M=100-1000-10000",
                     meds[2], f"<{meds[0]!r}", decreasing))
    return rows


def _golfing_rows(base_seed, trials):
    rows = []
    n, r, m, L = C.GOLF_N, C.GOLF_R, C.GOLF_M, C.GOLF_L
    hits = 0
    worst_x0 = 0.0
    worst_gap = 0.0
    worst_triangle = -math.inf
    for t in range(trials):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_GOLF, t))
        inst = make_instance(n, r, rng)
        rep = golfing_certificate(inst, m, rng, L=L)
        hits += rep.success
        worst_x0 = max(worst_x0, abs(rep.x_norms[0] - math.sqrt(r)))
        sign_h = matrix_sign(inst.H)
        gap = np.linalg.norm(
            tangent_project(inst.T, rep.certificate) + rep.tangent_residual - sign_h
        )
        worst_gap = max(worst_gap, float(gap))
        worst_triangle = max(worst_triangle,
                             rep.perp_norm - float(rep.batch_perp_terms.sum()))
    rate = hits / trials
    params = f"n={n};r={r};m={m};L={L};trials={trials}"
    rows.append(_row("golfing_rate", params, rate, "0.9", rate >= 0.9))
    rows.append(_row("golfing_x0", params, worst_x0, "1e-10", worst_x0 <= 1e-10))
    rows.append(_row("golfing_telescope", params, worst_gap, "1e-10", worst_gap <= 1e-10))
    rows.append(_row("golfing_triangle", params, worst_triangle, "1e-08",
                     worst_triangle <= 1e-8))
    return rows


def _minimizer_rows(base_seed, solver):
    rows = []
    n, r = 10, 1
    M = C.recovery_m(n, r)
    worst_nuc = -math.inf
    worst_prep = -math.inf
    cone_all = True
    diag = None
    for t in range(5):
        rng = np.random.default_rng(C.check_seed(base_seed, C.OFF_MINIMIZER, t))
        inst = make_instance(n, r, rng)
        ms = build_measurement_set(inst, M, rng)
        sol = solve_nuclear_min(ms, solver)
        if sol.status != "converged":
            continue
        worst_nuc = max(worst_nuc,
                        sol.nuclear_norm - schatten_norm(inst.H, "nuclear"))
        worst_prep = max(worst_prep,
                         minimizer_inequality(inst.H, inst.T, sol.H_hat))
        cone = cone_condition(inst.T, sol.H_hat - inst.H)
        cone_all = cone_all and cone.holds
        # feasible non-minimizer: the least-norm point has a larger trace norm
        base = solve_min_frobenius(ms)
        diag = minimizer_inequality(inst.H, inst.T, base.H_hat)
    params = f"n={n};r={r};M={M};runs=5"
    rows.append(_row("minimizer_nuclear", params, worst_nuc, "1e-06", worst_nuc <= 1e-6))
    rows.append(_row("minimizer_pinching", params, worst_prep, "1e-06", worst_prep <= 1e-6))
    rows.append(_row("cone_holds", params, float(cone_all), "1.0", cone_all))
    if diag is not None:
        rows.append(_row("pinching_nonminimizer", params, diag, "", True))
    undersampled = run_trial(n, r, 10, 0, base_seed=base_seed, solver=solver)
    rows.append(_row("cone_diag_undersampled", f"n={n};r={r};M=10",
                     undersampled.rel_error, "", True))
    return rows


def verify_theory(out_path=None, base_seed=C.DEFAULT_BASE_SEED,
                  trials=C.N_TRIALS, moment_samples=C.MOMENT_SAMPLES,
                  solver=None, checks=None):
    """Run the full battery of theory checks.

    Returns ``(rows, all_pass)``; informational rows carry an empty bound
    and always pass.  When ``out_path`` is given the table is written as
    ``check,params,value,bound,pass``.
    """
    groups = {
        "moments": lambda: _moment_rows(base_seed, moment_samples),
        "factorial": _factorial_rows,
        "concentration": lambda: _concentration_rows(base_seed, trials),
        "leakage": lambda: _leakage_rows(base_seed, trials),
        "golfing": lambda: _golfing_rows(base_seed, trials),
        "minimizer": lambda: _minimizer_rows(base_seed, solver),
    }
    if checks is not None:
        unknown = set(checks) - set(groups)
        if unknown:
            raise ValueError(f"unknown checks: {sorted(unknown)}")
        groups = {k: v for k, v in groups.items() if k in checks}
    rows = []
    for fn in groups.values():
        rows.extend(fn())
    all_pass = all(row.passed for row in rows)
    if out_path:
        lines = [",".join(THEORY_HEADER)]
        for row in rows:
            lines.append(",".join([
                row.check, row.params, repr(row.value), row.bound, _fmt(row.passed),
            ]))
        _atomic_write(out_path, "\n".join(lines) + "\n")
    return rows, all_pass


def read_theory_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != THEORY_HEADER:
            raise CsvSchemaError(path, 1, f"expected header {','.join(THEORY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(THEORY_HEADER):
                raise CsvSchemaError(path, lineno, f"expected {len(THEORY_HEADER)} fields")
            try:
                rows.append(TheoryRow(check=row[0], params=row[1],
                                      value=float(row[2]), bound=row[3],
                                      passed={"true": True, "false": False}[row[4]]))
            except (ValueError, KeyError) as exc:
                raise CsvSchemaError(path, lineno, f"bad field: {exc}") from exc
    return rows


# ---------------------------------------------------------------------------
# Deterministic SVG emission (no plotting dependency, byte-stable output).

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 170, 40, 55


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _svg_document(title, xlabel, ylabel, xlim, ylim, series, logx=False, logy=False):
    """Polyline chart; ``series`` is a list of (label, [(x, y), ...])."""
    x0, x1 = xlim
    y0, y1 = ylim

    def sx(x):
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    def tick_label(v, log):
        return f"1e{v:g}" if log else f"{v:g}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:g}" y="22" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
    ]
    ax = (f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
          f'stroke="black"/>'
          f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>')
    parts.append(ax)
    for tx in _ticks(x0, x1):
        parts.append(
            f'<line x1="{sx(tx):.2f}" y1="{_H - _MB}" x2="{sx(tx):.2f}" '
            f'y2="{_H - _MB + 5}" stroke="black"/>'
            f'<text x="{sx(tx):.2f}" y="{_H - _MB + 20}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{tick_label(tx, logx)}</text>'
        )
    for ty in _ticks(y0, y1):
        parts.append(
            f'<line x1="{_ML - 5}" y1="{sy(ty):.2f}" x2="{_ML}" y2="{sy(ty):.2f}" '
            f'stroke="black"/>'
            f'<text x="{_ML - 9}" y="{sy(ty):.2f}" text-anchor="end" dy="4" '
            f'font-size="11" font-family="sans-serif">{tick_label(ty, logy)}</text>'
        )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:g}" y="{_H - 12}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{xlabel}</text>'
        f'<text x="18" y="{(_MT + _H - _MB) / 2:g}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 18 {(_MT + _H - _MB) / 2:g})">{ylabel}</text>'
    )
    for idx, (label, pts) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.6" '
                         f'fill="{color}"/>')
        ly = _MT + 18 * idx + 10
        parts.append(
            f'<line x1="{_W - _MR + 12}" y1="{ly}" x2="{_W - _MR + 34}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.8"/>'
            f'<text x="{_W - _MR + 40}" y="{ly}" dy="4" font-size="12" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _parse_params(params):
    out = {}
    for item in params.split(";"):
        if "=" in item:
            key, val = item.split("=", 1)
            out[key] = val
    return out


def emit_plot(csv_path, kind, out_path):
    """Render a sweep or decay figure as deterministic SVG.

    ``phase`` expects the trial CSV schema and draws success rate against
    M, one polyline per (n, r).  ``decay`` expects the theory CSV schema
    and draws the median operator deviation against M on log-log axes.
    """
    if kind == "phase":
        records = read_trial_csv(csv_path)
        series = []
        rates = {}
        for rec in records:
            rates.setdefault((rec.n, rec.r), {}).setdefault(rec.M, []).append(rec.success)
        for (n, r), by_m in sorted(rates.items()):
            pts = [(M, sum(v) / len(v)) for M, v in sorted(by_m.items())]
            series.append((f"n={n} r={r}", pts))
        xs = [x for _, pts in series for x, _ in pts] or [0.0, 1.0]
        svg = _svg_document(
            "Recovery success rate vs measurement count",
            "measurements M", "success rate",
            (min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1), (0.0, 1.0),
            series,
        )
    elif kind == "decay":
        rows = read_theory_csv(csv_path)
        pts_by_m = {}
        for row in rows:
            if row.check != "concentration_profile":
                continue
            params = _parse_params(row.params)
            pts_by_m.setdefault(int(params["M"]), []).append(row.value)
        pts = [
            (math.log10(M), math.log10(float(np.median(vals))))
            for M, vals in sorted(pts_by_m.items())
        ]
        series = [("median deviation", pts)] if pts else []
        xs = [x for x, _ in pts] or [0.0, 1.0]
        ys = [y for _, y in pts] or [-1.0, 0.0]
        pad = 0.3
        svg = _svg_document(
            "Sampling-operator deviation vs measurement count",
            "measurements M", "operator deviation",
            (min(xs) - pad, max(xs) + pad), (min(ys) - pad, max(ys) + pad),
            series, logx=True, logy=True,
        )
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    _atomic_write(out_path, svg)


def load_config(path):
    """Parse a flat ``key = value`` config file with ``#`` comments."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def config_to_experiment(raw, command="sweep"):
    """Typed ExperimentConfig from raw string settings (file and/or CLI)."""

    def ints(s):
        return tuple(int(x) for x in str(s).split(",") if str(x).strip())

    def floats(s):
        return tuple(float(x) for x in str(s).split(",") if str(x).strip())

    solver = SolverConfig(
        rho=float(raw.get("rho", 1.0)),
        max_iters=int(raw.get("max_iters", 5000)),
        tol_primal=float(raw.get("tol_primal", 1e-8)),
        tol_dual=float(raw.get("tol_dual", 1e-8)),
        symmetrize=str(raw.get("symmetrize", "true")).lower() != "false",
        rank_tol=float(raw.get("rank_tol", 1e-8)),
    )
    return ExperimentConfig(
        command=command,
        n_list=ints(raw["n_list"]) if "n_list" in raw else (10, 20),
        r_list=ints(raw["r_list"]) if "r_list" in raw else (1, 2),
        m_list=ints(raw["m_list"]) if "m_list" in raw else None,
        m_mults=floats(raw["m_mults"]) if "m_mults" in raw else C.SWEEP_M_MULTIPLES,
        trials=int(raw.get("trials", 20)),
        base_seed=int(raw.get("seed", C.DEFAULT_BASE_SEED)),
        delta=float(raw.get("delta", 1e-4)),
        mode=str(raw.get("mode", "exact")),
        success_tol=float(raw.get("success_tol", C.SUCCESS_TOL)),
        solver=solver,
        output_path=raw.get("out"),
        workers=int(raw.get("workers", 1)),
    )
