"""Trace-norm minimization under bilinear equality constraints.

Solves ``min |X|_nuclear  s.t.  u_i' X v_i = b_i`` by ADMM with an exact
projection onto the affine constraint set, plus a minimum-Frobenius
baseline (the plain least-norm feasible point) for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "GramFactor",
    "GramInfeasibleError",
    "RecoverySolution",
    "SolverConfig",
    "affine_project",
    "gram_factorize",
    "recovery_error",
    "solve_min_frobenius",
    "solve_nuclear_min",
    "svt",
]


class GramInfeasibleError(RuntimeError):
    """The measurement Gram matrix is numerically singular."""


@dataclass
class SolverConfig:
    """ADMM settings.

    ``rho`` is the penalty (fixed unless ``adapt_rho``), tolerances are
    absolute Frobenius thresholds on the split gap and the scaled dual
    update, and ``symmetrize`` averages the final iterate with its
    transpose (Hessians are symmetric).
    """

    rho: float = 1.0
    max_iters: int = 5000
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    symmetrize: bool = True
    rank_tol: float = 1e-8
    adapt_rho: bool = False
    record_history: bool = False

    def __post_init__(self):
        if self.rho <= 0 or self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("rho and tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class RecoverySolution:
    """Recovered matrix plus solver diagnostics.

    ``primal_residual`` is the max constraint violation of the reported
    matrix, |u_i' H_hat v_i - b_i|; ``dual_residual`` the final scaled dual
    update norm; ``history`` (optional) the per-iteration max residual.
    """

    H_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    status: str
    nuclear_norm: float = 0.0
    history: np.ndarray | None = field(default=None, repr=False)


@dataclass
class GramFactor:
    """Cholesky factor of the M x M measurement Gram matrix."""

    cho: tuple
    gram: np.ndarray


def gram_factorize(ms):
    """Factor the Gram matrix G_ij = (u_i' u_j)(v_i' v_j).

    Requires M <= n**2 (beyond that G is singular by dimension count).
    Raises :class:`GramInfeasibleError` when a pivot falls below
    ``1e-12 * trace(G) / M``, which happens for duplicate or near-parallel
    measurement pairs.
    """
    M, n = ms.U.shape
    if M > n * n:
        raise ValueError(f"M={M} exceeds n**2={n * n}; the Gram matrix is singular")
    G = (ms.U @ ms.U.T) * (ms.V @ ms.V.T)
    pivot_floor = 1e-12 * np.trace(G) / M
    try:
        cho = cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GramInfeasibleError(f"Gram Cholesky failed: {exc}") from exc
    pivots = np.diag(cho[0]) ** 2
    if pivots.min() < pivot_floor:
        raise GramInfeasibleError(
            f"Gram pivot {pivots.min():.3e} below floor {pivot_floor:.3e}"
        )
    return GramFactor(cho=cho, gram=G)


def affine_project(X, ms, gram):
    """Closest point to X satisfying every measurement equality.

    Computes ``X + A*(G^-1 (b - A(X)))`` with one refinement pass when the
    first solve leaves violations above 0.5e-10 * (1 + max|b|).
    """
    X = np.asarray(X, dtype=float)
    Z = X + ms.adjoint(cho_solve(gram.cho, ms.b - ms.apply_forward(X)))
    resid = ms.b - ms.apply_forward(Z)
    if np.abs(resid).max() > 0.5e-10 * (1.0 + np.abs(ms.b).max()):
        Z = Z + ms.adjoint(cho_solve(gram.cho, resid))
    return Z


def svt(A, tau):
    """Singular value soft-thresholding, the proximal map of the trace norm."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    A = np.asarray(A, dtype=float)
    if tau == 0.0:
        return A.copy()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (U * s) @ Vt


def _max_violation(ms, X):
    return float(np.abs(ms.apply_forward(X) - ms.b).max())


def _infeasible_solution(ms):
    n = ms.n
    return RecoverySolution(
        H_hat=np.zeros((n, n)),
        iterations=0,
        primal_residual=float("inf"),
        dual_residual=float("inf"),
        status="infeasible_gram",
    )


def solve_nuclear_min(ms, cfg=None):
    """ADMM for trace-norm minimization under the measurement equalities.

    Alternates the trace-norm prox ``svt(Z - W, 1/rho)`` with the exact
    affine projection of ``X + W``, updating the scaled dual ``W``.  The
    reported matrix is the affine-projected iterate (optionally
    symmetrized), so feasibility is limited only by the projection solve.
    """
    cfg = SolverConfig() if cfg is None else cfg
    try:
        gram = gram_factorize(ms)
    except GramInfeasibleError:
        return _infeasible_solution(ms)

    n = ms.n
    Z = affine_project(np.zeros((n, n)), ms, gram)
    W = np.zeros((n, n))
    rho = cfg.rho
    history = [] if cfg.record_history else None
    converged = False
    iterations = cfg.max_iters
    dual = float("inf")

    for k in range(1, cfg.max_iters + 1):
        X = svt(Z - W, 1.0 / rho)
        Z_prev = Z
        Z = affine_project(X + W, ms, gram)
        W = W + X - Z
        gap = float(np.linalg.norm(X - Z))
        dual = rho * float(np.linalg.norm(Z - Z_prev))
        if history is not None:
            history.append(max(gap, dual))
        if gap <= cfg.tol_primal and dual <= cfg.tol_dual:
            converged = True
            iterations = k
            break
        if cfg.adapt_rho and k % 10 == 0:
            if gap > 10.0 * dual:
                rho *= 2.0
                W = W / 2.0
            elif dual > 10.0 * gap:
                rho /= 2.0
                W = W * 2.0

    H_hat = Z.copy()
    if cfg.symmetrize:
        H_hat = 0.5 * (H_hat + H_hat.T)
    s = np.linalg.svd(H_hat, compute_uv=False)
    return RecoverySolution(
        H_hat=H_hat,
        iterations=iterations,
        primal_residual=_max_violation(ms, H_hat),
        dual_residual=dual,
        status="converged" if converged else "max_iters",
        nuclear_norm=float(s.sum()),
        history=None if history is None else np.array(history),
    )


def solve_min_frobenius(ms):
    """Minimum-Frobenius feasible point, in closed form.

    The least-norm solution of the measurement equalities; it does not
    promote low rank and serves as the baseline against the trace-norm
    program.
    """
    try:
        gram = gram_factorize(ms)
    except GramInfeasibleError:
        return _infeasible_solution(ms)
    n = ms.n
    H_hat = affine_project(np.zeros((n, n)), ms, gram)
    s = np.linalg.svd(H_hat, compute_uv=False)
    return RecoverySolution(
        H_hat=H_hat,
        iterations=0,
        primal_residual=_max_violation(ms, H_hat),
        dual_residual=0.0,
        status="converged",
        nuclear_norm=float(s.sum()),
    )


def recovery_error(H_hat, H):
    """Relative Frobenius error |H_hat - H| / max(|H|, tiny)."""
    H_hat = np.asarray(H_hat, dtype=float)
    H = np.asarray(H, dtype=float)
    if H_hat.shape != H.shape:
        raise ValueError("matrices must share a shape")
    return float(np.linalg.norm(H_hat - H) / max(np.linalg.norm(H), 1e-300))
