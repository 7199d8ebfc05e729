"""Dense linear-algebra substrate: SVD, Schatten norms, matrix sign, and
tangent-space projectors for low-rank square matrices.

Conventions
-----------
All matrices are dense float64 arrays. ``vec`` is row-major (C order), so a
linear operator on matrices represented as an ``n**2 x n**2`` array ``K``
satisfies ``K @ vec(A) == vec(op(A))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConvergenceError",
    "MAX_KRON_DIM",
    "SvdFactors",
    "TangentSpace",
    "kron_operator",
    "matrix_sign",
    "numerical_rank",
    "power_operator_norm",
    "schatten_norm",
    "svd",
    "tangent_project",
    "tangent_project_perp",
    "unvec",
    "vec",
]

# n**4 doubles: 64**4 * 8 bytes is ~134 MB, the desk limit for dense operators.
MAX_KRON_DIM = 64


class ConvergenceError(RuntimeError):
    """An iterative decomposition exhausted its sweep cap without converging."""


def vec(A):
    """Row-major vectorization of a matrix."""
    return np.asarray(A).reshape(-1)


def unvec(x, n):
    """Inverse of :func:`vec` for an n x n matrix."""
    return np.asarray(x).reshape(n, n)


def _check_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("matrix entries must be finite")
    return A


@dataclass
class SvdFactors:
    """Full singular value decomposition ``A = U @ diag(sigma) @ V.T``.

    ``sigma`` is nonincreasing and nonnegative; ``U`` and ``V`` are square
    orthogonal.  The sign convention (first nonzero entry of each left
    singular vector is nonnegative) makes the factors reproducible.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def _fix_signs(U, V):
    """Flip column pairs so the first non-negligible entry of U is >= 0."""
    for k in range(U.shape[1]):
        col = U[:, k]
        scale = np.abs(col).max()
        if scale == 0.0:
            continue
        nz = np.nonzero(np.abs(col) > 1e-12 * scale)[0]
        if nz.size and col[nz[0]] < 0:
            U[:, k] = -col
            V[:, k] = -V[:, k]
    return U, V


def _complete_basis(U_partial, n):
    """Extend orthonormal columns to a full orthonormal basis of R^n."""
    k = U_partial.shape[1]
    if k == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(U_partial, mode="complete")
    return np.hstack([U_partial, Q[:, k:]])


def _jacobi_svd(A, max_sweeps=60, tol=1e-12):
    """One-sided Jacobi SVD.

    Rotates column pairs until every normalized off-diagonal Gram entry is
    below ``tol``.  Raises :class:`ConvergenceError` after ``max_sweeps``
    sweeps rather than returning unconverged factors.
    """
    n = A.shape[0]
    B = A.copy()
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                bi, bj = B[:, i], B[:, j]
                aii = bi @ bi
                ajj = bj @ bj
                aij = bi @ bj
                denom = np.sqrt(aii * ajj)
                if denom == 0.0 or abs(aij) <= tol * denom:
                    continue
                rotated = True
                theta = 0.5 * np.arctan2(2.0 * aij, aii - ajj)
                c, s = np.cos(theta), np.sin(theta)
                rot = np.array([[c, -s], [s, c]])
                B[:, [i, j]] = B[:, [i, j]] @ rot
                V[:, [i, j]] = V[:, [i, j]] @ rot
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"one-sided Jacobi SVD did not converge in {max_sweeps} sweeps"
        )
    sigma = np.linalg.norm(B, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    B = B[:, order]
    V = V[:, order]
    pos = sigma > 0
    U = np.zeros_like(B)
    U[:, pos] = B[:, pos] / sigma[pos]
    if not pos.all():
        U = _complete_basis(U[:, pos], n)
        # reattach in original column order: zero-sigma columns last already
    return U, sigma, V


def svd(A, method="lapack"):
    """Full SVD with a deterministic sign convention.

    Parameters
    ----------
    A : ndarray
        Square matrix with finite entries.
    method : {"lapack", "jacobi"}
        "lapack" uses numpy's driver; "jacobi" runs the one-sided Jacobi
        reference implementation (slower, dependency-free math).

    Returns
    -------
    SvdFactors
    """
    A = _check_square(A)
    if method == "lapack":
        try:
            U, sigma, Vt = np.linalg.svd(A)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
            raise ConvergenceError(f"LAPACK SVD did not converge: {exc}") from exc
        V = Vt.T.copy()
        U = U.copy()
    elif method == "jacobi":
        U, sigma, V = _jacobi_svd(A)
    else:
        raise ValueError(f"unknown SVD method {method!r}")
    U, V = _fix_signs(U, V)
    return SvdFactors(U=U, sigma=sigma, V=V)


def matrix_sign(A, rank_tol=1e-8):
    """Polar sign of a matrix: singular values above threshold map to 1.

    Singular values at or below ``rank_tol * sigma_max`` are treated as
    exact zeros, so the result is ``U_r @ V_r.T`` on the numerical-rank-r
    subspace.  The zero matrix maps to the zero matrix.
    """
    if not 0.0 < rank_tol < 1.0:
        raise ValueError("rank_tol must lie in (0, 1)")
    A = _check_square(A)
    f = svd(A)
    smax = f.sigma[0] if f.sigma.size else 0.0
    if smax == 0.0:
        return np.zeros_like(A)
    keep = f.sigma > rank_tol * smax
    return f.U[:, keep] @ f.V[:, keep].T


@dataclass
class TangentSpace:
    """Tangent space of rank-r matrices with column space span(U).

    Membership: ``A`` is in the space iff ``(I - P) A (I - P) == 0`` with
    ``P = U @ U.T``.  ``U`` must have orthonormal columns (checked at 1e-10).
    """

    U: np.ndarray
    p_u: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or not 1 <= U.shape[1] <= U.shape[0]:
            raise ValueError(f"basis must be n x r with 1 <= r <= n, got {U.shape}")
        gram = U.T @ U
        if np.abs(gram - np.eye(U.shape[1])).max() > 1e-10:
            raise ValueError("basis columns are not orthonormal at 1e-10")
        self.U = U
        self.p_u = U @ U.T

    @property
    def n(self):
        return self.U.shape[0]

    @property
    def r(self):
        return self.U.shape[1]

    @property
    def dim(self):
        """Dimension of the space: 2nr - r**2."""
        return 2 * self.n * self.r - self.r * self.r


def tangent_project(T, A):
    """Orthogonal projection onto the tangent space: PA + AP - PAP."""
    A = np.asarray(A, dtype=float)
    if A.shape != (T.n, T.n):
        raise ValueError(f"matrix shape {A.shape} does not match dimension {T.n}")
    P = T.p_u
    PA = P @ A
    return PA + A @ P - PA @ P


def tangent_project_perp(T, A):
    """Projection onto the orthogonal complement of the tangent space."""
    A = np.asarray(A, dtype=float)
    return A - tangent_project(T, A)


def kron_operator(T, cap=MAX_KRON_DIM):
    """Dense ``n**2 x n**2`` matrix of the tangent projector.

    Acts on row-major vectorizations: ``K @ vec(A) == vec(project(A))``.
    Refuses n above ``cap`` since the result has n**4 entries.
    """
    if T.n > cap:
        raise ValueError(f"n={T.n} exceeds the dense-operator cap {cap}")
    P = T.p_u
    eye = np.eye(T.n)
    return np.kron(P, eye) + np.kron(eye, P) - np.kron(P, P)


def schatten_norm(A, which):
    """Schatten norm of a matrix.

    Parameters
    ----------
    which : {"operator", "frobenius", "nuclear"}
        Largest singular value, root-sum-square, or sum of singular values.
    """
    A = _check_square(A)
    if which == "frobenius":
        return float(np.linalg.norm(A))
    s = np.linalg.svd(A, compute_uv=False)
    if which == "operator":
        return float(s[0]) if s.size else 0.0
    if which == "nuclear":
        return float(s.sum())
    raise ValueError(f"unknown Schatten norm {which!r}")


def numerical_rank(A, tol=1e-8):
    """Number of singular values above ``tol * sigma_max``."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s > tol * s[0]).sum())


def power_operator_norm(apply_fn, apply_t_fn, dim, tol=1e-8, max_iters=500, seed=0):
    """Largest singular value of an abstract linear operator.

    Power iteration on ``A* A`` with a fixed seeded start vector, so the
    result is deterministic for fixed inputs.  ``apply_fn``/``apply_t_fn``
    map flat vectors of length ``dim``.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    nx = np.linalg.norm(x)
    if nx == 0.0:  # pragma: no cover - measure-zero draw
        x = np.ones(dim)
        nx = np.sqrt(dim)
    x /= nx
    est = 0.0
    for _ in range(max_iters):
        y = apply_fn(x)
        ny = np.linalg.norm(y)  # sigma estimate: ||A x|| on unit x
        if ny == 0.0:
            return 0.0
        z = apply_t_fn(y / ny)
        nz = np.linalg.norm(z)
        if abs(ny - est) <= tol * max(ny, 1e-30):
            return float(ny)
        est = ny
        if nz == 0.0:  # pragma: no cover
            return float(est)
        x = z / nz
    return float(est)
