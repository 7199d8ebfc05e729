"""Numerical verification of the recovery guarantee's ingredients.

Each check here corresponds to one provable fact: the spherical moment law,
the combinatorial factorial bound, concentration of the sampling operator
around the tangent projector, leakage from the tangent space, the golfing
construction of a dual certificate, and the two inequalities satisfied by
trace-norm minimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .matcore import (
    TangentSpace,
    kron_operator,
    matrix_sign,
    schatten_norm,
    tangent_project,
    tangent_project_perp,
)
from .sampling import LowRankInstance, _sphere_block

__all__ = [
    "CertificateReport",
    "ConcentrationReport",
    "ConeCheck",
    "apply_sampler",
    "cone_condition",
    "golfing_certificate",
    "composition_factorial_bound",
    "composition_factorial_max",
    "moment_closed_form",
    "moment_monte_carlo",
    "operator_concentration",
    "minimizer_inequality",
    "tangent_leakage",
]

# Once the certificate residual reaches the float64 cancellation floor the
# halving test is pure rounding noise; treat anything this small as contracted.
CONTRACTION_FLOOR = 1e-12


@dataclass
class ConcentrationReport:
    """Deviation of the sampled operator from the tangent projector."""

    n: int
    r: int
    M: int
    deviation_norm: float
    event_holds: bool
    method: str


@dataclass
class CertificateReport:
    """Outcome of the batched certificate construction.

    ``x_norms[i]`` is the Frobenius norm of the i-th tangent residual
    (``x_norms[0] == sqrt(r)``), ``perp_norm`` the operator norm of the
    certificate's off-tangent part, and ``tangent_gap == x_norms[-1]``.
    """

    L: int
    m: int
    x_norms: np.ndarray
    perp_norm: float
    tangent_gap: float
    success: bool
    batch_perp_terms: np.ndarray = field(repr=False, default=None)
    contracted: np.ndarray = field(repr=False, default=None)
    certificate: np.ndarray = field(repr=False, default=None)
    tangent_residual: np.ndarray = field(repr=False, default=None)


def moment_closed_form(n, p):
    """E[v_1**p] for v uniform on the sphere: (p-1)!! / (n (n+2) ... (n+p-2)).

    Only even p >= 2 is accepted; odd moments vanish by symmetry and callers
    should use 0 directly.
    """
    if n < 2:
        raise ValueError("moment formula needs n >= 2")
    if p < 2 or p % 2:
        raise ValueError("closed form covers even p >= 2 only")
    num = math.prod(range(p - 1, 0, -2))
    den = math.prod(range(n, n + p - 1, 2))
    return float(Fraction(num, den))


def moment_monte_carlo(n, p, samples, rng, _block=100_000):
    """Monte-Carlo mean and standard error of v_1**p over sphere draws."""
    if samples < 1000:
        raise ValueError("need at least 1e3 samples for a stable standard error")
    total = 0.0
    total_sq = 0.0
    left = samples
    while left > 0:
        k = min(left, _block)
        w = _sphere_block(k, n, rng)[:, 0] ** p
        total += w.sum()
        total_sq += (w * w).sum()
        left -= k
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return float(mean), float(np.sqrt(var / samples))


def composition_factorial_bound(r, p):
    """The closed-form cap (100 r)**(p-1) on the composition maximum."""
    return (100 * r) ** (p - 1)


def composition_factorial_max(r, p):
    """Exhaustive maximum of (2p)!/p! * prod (a_i/2)!/a_i! over even
    compositions (a_1..a_r) of 2p, in exact rational arithmetic.

    Returns the maximum as a Fraction plus one maximizing composition.
    Enumeration is refused beyond r=12, p=8 (the verified grid).
    """
    if r < 1 or p < 2:
        raise ValueError("need r >= 1 and p >= 2")
    if r > 12 or p > 8:
        raise ValueError("enumeration too large; supported grid is r<=12, p<=8")
    prefactor = Fraction(math.factorial(2 * p), math.factorial(p))
    # per-part factor for a_i = 2*beta: beta! / (2 beta)!
    part = [
        Fraction(math.factorial(beta), math.factorial(2 * beta))
        for beta in range(p + 1)
    ]
    best = None
    best_alpha = None
    alpha = [0] * r

    def rec(i, remaining, running):
        nonlocal best, best_alpha
        if i == r - 1:
            value = running * part[remaining]
            alpha[i] = 2 * remaining
            if best is None or value > best:
                best = value
                best_alpha = tuple(alpha)
            return
        for beta in range(remaining + 1):
            alpha[i] = 2 * beta
            rec(i + 1, remaining - beta, running * part[beta])

    rec(0, p, prefactor)
    return best, best_alpha


def apply_sampler(U, V, B):
    """Apply the sampling operator: (n**2 / M) sum_i (u_i' B v_i) u_i v_i'."""
    M, n = U.shape
    coeffs = np.einsum("mi,ij,mj->m", U, B, V)
    return (n * n / M) * (U * coeffs[:, None]).T @ V


def _deviation_dense(T, U, V):
    n = T.n
    M = U.shape[0]
    K = kron_operator(T)
    S = np.einsum("mi,mj,mk,ml->ikjl", U, U, V, V).reshape(n * n, n * n)
    S *= n * n / M
    D = K @ S @ K - K
    D = 0.5 * (D + D.T)
    return float(np.abs(np.linalg.eigvalsh(D)).max())


def _deviation_power(T, U, V, max_iters=200, tol=1e-6, block=8):
    """Block power iteration for the deviation operator, restricted to the
    tangent space (the operator vanishes on its complement)."""
    n = T.n

    def op(A):
        PA = tangent_project(T, A)
        return tangent_project(T, apply_sampler(U, V, PA)) - PA

    b = min(block, T.dim)
    rng = np.random.default_rng(0xC0FFEE)
    Q = np.stack([tangent_project(T, rng.standard_normal((n, n))) for _ in range(b)])
    Q = Q.reshape(b, n * n)
    Q, _ = np.linalg.qr(Q.T)
    est = 0.0
    for _ in range(max_iters):
        Z = np.stack([op(Q[:, j].reshape(n, n)).reshape(-1) for j in range(Q.shape[1])], axis=1)
        ritz = np.linalg.eigvalsh(0.5 * (Q.T @ Z + Z.T @ Q))
        new_est = float(np.abs(ritz).max())
        done = abs(new_est - est) <= tol
        est = new_est
        if done:
            break
        nz = np.linalg.norm(Z, axis=0)
        if nz.max() == 0.0:
            return 0.0
        Q, _ = np.linalg.qr(Z)
    return est


def operator_concentration(T, ms, method="auto", dense_cap=16):
    """Operator norm of ``P_T S P_T - P_T`` and the event that it is <= 1/4.

    ``dense_kron`` materializes the n**2 x n**2 operator and takes exact
    eigenvalues; ``power_iteration`` applies the operator matrix-free on the
    tangent space (200 iterations, tolerance 1e-6).
    """
    if method == "auto":
        method = "dense_kron" if T.n <= dense_cap else "power_iteration"
    if method == "dense_kron":
        dev = _deviation_dense(T, ms.U, ms.V)
    elif method == "power_iteration":
        dev = _deviation_power(T, ms.U, ms.V)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ConcentrationReport(
        n=T.n,
        r=T.r,
        M=len(ms),
        deviation_norm=dev,
        event_holds=bool(dev <= 0.25),
        method=method,
    )


def tangent_leakage(T, G, ms):
    """Operator norm of the off-tangent part of the sampled image of G.

    ``G`` must lie in the tangent space (checked at 1e-8 relative)."""
    G = np.asarray(G, dtype=float)
    ng = np.linalg.norm(G)
    if ng == 0.0:
        return 0.0
    if np.linalg.norm(tangent_project_perp(T, G)) > 1e-8 * ng:
        raise ValueError("G does not lie in the tangent space at 1e-8")
    SG = apply_sampler(ms.U, ms.V, G)
    return schatten_norm(tangent_project_perp(T, SG), "operator")


def golfing_certificate(inst, m, rng, L=None, rank_tol=1e-8):
    """Batched construction of a dual certificate for a low-rank instance.

    Draws L independent batches of m measurements.  Batch l maps the current
    tangent residual through the sampling operator; the residual sequence
    should contract geometrically while the accumulated certificate keeps a
    small off-tangent operator norm.

    Success requires the off-tangent norm <= 1/2 and the halving test
    ``x_norms[i] <= x_norms[i-1] / 2`` (with an absolute floor of
    ``CONTRACTION_FLOOR`` absorbing float cancellation noise) on at least
    90% of steps.
    """
    if m < 1:
        raise ValueError("per-batch count m must be >= 1")
    T = inst.T
    n = T.n
    if L is None:
        L = math.ceil(12 * math.log2(n))
    if L < 1:
        raise ValueError("batch count L must be >= 1")

    sign_h = matrix_sign(inst.H, rank_tol)
    X = sign_h.copy()
    Y = np.zeros((n, n))
    x_norms = [float(np.linalg.norm(X))]
    perp_terms = np.empty(L)
    contracted = np.empty(L, dtype=bool)

    for l in range(L):
        pairs = _sphere_block(2 * m, n, rng).reshape(m, 2, n)
        Ub = np.ascontiguousarray(pairs[:, 0, :])
        Vb = np.ascontiguousarray(pairs[:, 1, :])
        Z = apply_sampler(Ub, Vb, tangent_project(T, X))
        Y += Z
        X = sign_h - tangent_project(T, Y)
        x_norms.append(float(np.linalg.norm(X)))
        perp_terms[l] = schatten_norm(tangent_project_perp(T, Z), "operator")
        contracted[l] = x_norms[-1] <= max(0.5 * x_norms[-2], CONTRACTION_FLOOR)

    perp_norm = schatten_norm(tangent_project_perp(T, Y), "operator")
    success = perp_norm <= 0.5 and contracted.mean() >= 0.9
    return CertificateReport(
        L=L,
        m=m,
        x_norms=np.array(x_norms),
        perp_norm=float(perp_norm),
        tangent_gap=x_norms[-1],
        success=bool(success),
        batch_perp_terms=perp_terms,
        contracted=contracted,
        certificate=Y,
        tangent_residual=X,
    )


@dataclass
class ConeCheck:
    """Evaluation of the feasible-deviation cone inequality."""

    lhs: float
    rhs: float
    holds: bool


def cone_condition(T, Delta, tol_primal=1e-8):
    """Check ``|P_T D|_F <= 2 n |P_perp D|_F`` with solver-noise slack.

    The slack ``n * tol_primal * |D|_F`` absorbs the inexactness of a
    converged numerical solve; the inequality itself is only guaranteed
    when the concentration event holds.
    """
    Delta = np.asarray(Delta, dtype=float)
    n = T.n
    lhs = float(np.linalg.norm(tangent_project(T, Delta)))
    rhs = float(2.0 * n * np.linalg.norm(tangent_project_perp(T, Delta)))
    slack = n * tol_primal * float(np.linalg.norm(Delta))
    return ConeCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + slack))


def minimizer_inequality(H, T, H_hat, rank_tol=1e-8):
    """Minimizer inequality: <sign(H), P Delta P> + |perp(Delta)|_nuclear.

    Nonpositive (up to solver noise) whenever ``H_hat`` minimizes the trace
    norm over the measurement equalities; returns the left-hand side.
    """
    H = np.asarray(H, dtype=float)
    H_hat = np.asarray(H_hat, dtype=float)
    delta = H_hat - H
    sign_h = matrix_sign(H, rank_tol)
    P = T.p_u
    pinched = P @ delta @ P
    return float(
        np.tensordot(sign_h, pinched)
        + schatten_norm(tangent_project_perp(T, delta), "nuclear")
    )
