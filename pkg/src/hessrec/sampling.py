"""Measurement generation: unit-sphere direction pairs, exact bilinear probes
``u' H v``, the 4-point finite-difference stencil for black-box functions,
and synthetic low-rank test instances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .matcore import TangentSpace, numerical_rank

__all__ = [
    "FunctionOracle",
    "LowRankInstance",
    "Measurement",
    "MeasurementError",
    "MeasurementSet",
    "build_measurement_set",
    "builtin_function",
    "instance_from_basis",
    "make_instance",
    "measure_exact",
    "measure_fd",
    "sample_sphere",
    "splitmix64",
]

_MASK64 = (1 << 64) - 1


def splitmix64(z):
    """SplitMix64 hash; used for deriving per-trial seeds."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class MeasurementError(RuntimeError):
    """A finite-difference probe produced a non-finite value."""


@dataclass
class Measurement:
    """One bilinear probe: unit directions u, v and the scalar b = u' H v."""

    u: np.ndarray
    v: np.ndarray
    b: float


class MeasurementSet:
    """An ordered batch of M bilinear measurements of one n x n matrix.

    Stored column-major as arrays ``U`` (M x n), ``V`` (M x n), ``b`` (M,).
    ``source`` is "exact" or "fd"; ``delta`` records the stencil width for
    finite-difference data.
    """

    def __init__(self, U, V, b, source="exact", delta=None):
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        b = np.asarray(b, dtype=float)
        if U.ndim != 2 or U.shape != V.shape or b.shape != (U.shape[0],):
            raise ValueError("U, V must be M x n and b length M")
        if U.shape[0] < 1:
            raise ValueError("a measurement set needs at least one record")
        for name, W in (("u", U), ("v", V)):
            norms = np.linalg.norm(W, axis=1)
            if np.abs(norms - 1.0).max() > 1e-12:
                raise ValueError(f"{name} directions are not unit vectors at 1e-12")
        if not np.isfinite(b).all():
            raise ValueError("measurement values must be finite")
        if source not in ("exact", "fd"):
            raise ValueError(f"unknown source {source!r}")
        self.U = U
        self.V = V
        self.b = b
        self.source = source
        self.delta = None if delta is None else float(delta)

    @property
    def n(self):
        return self.U.shape[1]

    def __len__(self):
        return self.U.shape[0]

    def __getitem__(self, i):
        return Measurement(u=self.U[i], v=self.V[i], b=float(self.b[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def apply_forward(self, X):
        """All M probe values of a candidate matrix: (u_i' X v_i)_i."""
        return np.einsum("mi,ij,mj->m", self.U, X, self.V)

    def adjoint(self, y):
        """Adjoint of :meth:`apply_forward`: sum_i y_i u_i v_i'."""
        return (self.U * y[:, None]).T @ self.V

    def to_csv(self, path):
        """Write records as ``i,b,u_0..u_{n-1},v_0..v_{n-1}`` (round-trip floats)."""
        n = self.n
        header = (
            ["i", "b"]
            + [f"u_{k}" for k in range(n)]
            + [f"v_{k}" for k in range(n)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(len(self)):
                row = [str(i), repr(float(self.b[i]))]
                row += [repr(float(x)) for x in self.U[i]]
                row += [repr(float(x)) for x in self.V[i]]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path, source="exact", delta=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[:2] != ["i", "b"] or (len(header) - 2) % 2:
                raise ValueError(f"{path}: not a measurement CSV header")
            n = (len(header) - 2) // 2
            U, V, b = [], [], []
            for row in reader:
                if len(row) != 2 + 2 * n:
                    raise ValueError(f"{path}: bad record of width {len(row)}")
                b.append(float(row[1]))
                U.append([float(x) for x in row[2 : 2 + n]])
                V.append([float(x) for x in row[2 + n :]])
        return cls(np.array(U), np.array(V), np.array(b), source=source, delta=delta)


class FunctionOracle:
    """Black-box scalar function with an evaluation counter.

    ``hessian`` is an optional callable returning the analytic Hessian at a
    point; builtins provide it so recovered matrices can be scored.
    """

    def __init__(self, dimension, fn, hessian=None, name="custom"):
        self.dimension = int(dimension)
        self._fn = fn
        self.hessian = hessian
        self.name = name
        self.eval_count = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a point of dimension {self.dimension}")
        self.eval_count += 1
        return float(self._fn(x))

    def clone(self):
        """Fresh counter over the same function (one oracle per worker)."""
        return FunctionOracle(self.dimension, self._fn, self.hessian, self.name)


@dataclass
class LowRankInstance:
    """Symmetric rank-r ground truth ``H = U diag(spectrum) U'``."""

    H: np.ndarray
    T: TangentSpace
    spectrum: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        nh = np.linalg.norm(H)
        if nh > 0 and np.linalg.norm(H - H.T) > 1e-12 * nh:
            raise ValueError("instance matrix is not symmetric at 1e-12")
        r = len(self.spectrum)
        if numerical_rank(H, tol=1e-8) != r:
            raise ValueError(f"instance is not numerically rank {r} at 1e-8")
        self.H = H

    @property
    def n(self):
        return self.H.shape[0]

    @property
    def r(self):
        return len(self.spectrum)


def sample_sphere(n, rng):
    """One point uniform on the unit sphere in R^n (normalized Gaussian)."""
    if n < 2:
        raise ValueError("sphere sampling needs n >= 2")
    while True:
        x = rng.standard_normal(n)
        nx = np.linalg.norm(x)
        if nx > 0.0:
            return x / nx


def _sphere_block(count, n, rng):
    """``count`` unit vectors; consumes the stream like repeated single draws."""
    X = rng.standard_normal((count, n))
    norms = np.linalg.norm(X, axis=1)
    while (norms == 0.0).any():  # pragma: no cover - measure-zero event
        bad = norms == 0.0
        X[bad] = rng.standard_normal((int(bad.sum()), n))
        norms = np.linalg.norm(X, axis=1)
    return X / norms[:, None]


def measure_exact(H, u, v):
    """Exact bilinear probe b = u' H v."""
    H = np.asarray(H, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if H.shape != (u.size, v.size):
        raise ValueError("dimension mismatch between matrix and directions")
    return Measurement(u=u, v=v, b=float(u @ H @ v))


def measure_fd(oracle, x, u, v, delta):
    """4-point central-difference probe of the bilinear form u' H(x) v.

    Consumes exactly four oracle evaluations:
    ``(f(x+dv+du) - f(x-dv+du) - f(x+dv-du) + f(x-dv-du)) / (4 d**2)``.
    """
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("evaluation point must be finite")
    du = delta * np.asarray(u, dtype=float)
    dv = delta * np.asarray(v, dtype=float)
    fpp = oracle(x + dv + du)
    fmp = oracle(x - dv + du)
    fpm = oracle(x + dv - du)
    fmm = oracle(x - dv - du)
    b = (fpp - fmp - fpm + fmm) / (4.0 * delta * delta)
    if not np.isfinite(b):
        raise MeasurementError(
            f"non-finite stencil value at delta={delta}: "
            f"f values ({fpp}, {fmp}, {fpm}, {fmm})"
        )
    return Measurement(u=np.asarray(u, float), v=np.asarray(v, float), b=float(b))


def build_measurement_set(source, M, rng, x=None, delta=None):
    """Draw M direction pairs and fill in probe values.

    Parameters
    ----------
    source : LowRankInstance or ndarray or FunctionOracle
        A known matrix gives exact probes; a function oracle gives the
        finite-difference stencil (requires ``x`` and ``delta``).
    M : int
        Number of measurements (>= 1).
    rng : numpy Generator
        Direction pairs are drawn as (u_1, v_1, u_2, v_2, ...) from this
        stream, so replaying the seed reproduces the set bit for bit.
    """
    if M < 1:
        raise ValueError("measurement count M must be >= 1")
    if isinstance(source, LowRankInstance):
        H, oracle = source.H, None
    elif isinstance(source, FunctionOracle):
        H, oracle = None, source
    else:
        H, oracle = np.asarray(source, dtype=float), None

    n = oracle.dimension if oracle is not None else H.shape[0]
    pairs = _sphere_block(2 * M, n, rng).reshape(M, 2, n)
    U = np.ascontiguousarray(pairs[:, 0, :])
    V = np.ascontiguousarray(pairs[:, 1, :])

    if oracle is None:
        b = np.einsum("mi,ij,mj->m", U, H, V)
        return MeasurementSet(U, V, b, source="exact")

    if delta is None:
        raise ValueError("finite-difference source requires delta")
    x = np.zeros(n) if x is None else np.asarray(x, dtype=float)
    b = np.empty(M)
    for i in range(M):
        b[i] = measure_fd(oracle, x, U[i], V[i], delta).b
    return MeasurementSet(U, V, b, source="fd", delta=delta)


def instance_from_basis(U, spectrum):
    """Instance with a caller-chosen orthonormal basis (coherent bases allowed)."""
    spectrum = np.asarray(spectrum, dtype=float)
    if (spectrum == 0.0).any():
        raise ValueError("spectrum entries must be nonzero")
    U = np.asarray(U, dtype=float)
    H = (U * spectrum) @ U.T
    H = 0.5 * (H + H.T)
    return LowRankInstance(H=H, T=TangentSpace(U), spectrum=spectrum)


def make_instance(n, r, rng, spectrum=None):
    """Random symmetric rank-r instance.

    The basis is the QR orthonormalization of a Gaussian n x r matrix; no
    coherence control is applied.  Default spectrum: r values with random
    signs and magnitudes uniform in [1, 2].
    """
    if not 1 <= r <= n:
        raise ValueError("rank must satisfy 1 <= r <= n")
    W = rng.standard_normal((n, r))
    Q, _ = np.linalg.qr(W)
    if spectrum is None:
        mags = rng.uniform(1.0, 2.0, size=r)
        signs = 2.0 * rng.integers(0, 2, size=r) - 1.0
        spectrum = signs * mags
    return instance_from_basis(Q, spectrum)


def _log_cosh(t):
    # |t| + log1p(exp(-2|t|)) - log 2, stable for large |t|
    at = np.abs(t)
    return at + np.log1p(np.exp(-2.0 * at)) - np.log(2.0)


def builtin_function(name, n, r=None, rng=None, ridge_eps=1e-3):
    """Named smooth test functions with (approximately) rank-r Hessians.

    - ``quadratic_lowrank``: f = x' H x / 2 for a random rank-r instance;
      the Hessian is exactly H everywhere.
    - ``ridge_composite``: f = sum_j log cosh(w_j' x) + ridge_eps |x|^2 / 2;
      the Hessian is a rank-r part plus ridge_eps * I.
    - ``logistic_composite``: f = sum_j log(1 + exp(w_j' x)) over r weight
      vectors; the Hessian has rank at most r.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if name == "quadratic_lowrank":
        if r is None:
            raise ValueError("quadratic_lowrank requires a rank r")
        inst = make_instance(n, r, rng)
        H = inst.H

        oracle = FunctionOracle(
            n, lambda x: 0.5 * float(x @ (H @ x)), hessian=lambda x: H, name=name
        )
        oracle.instance = inst
        return oracle

    if name == "ridge_composite":
        if r is None:
            raise ValueError("ridge_composite requires a rank r")
        W = rng.standard_normal((r, n)) / np.sqrt(n)

        def fn(x):
            return float(_log_cosh(W @ x).sum() + 0.5 * ridge_eps * (x @ x))

        def hess(x):
            t = W @ x
            gains = 1.0 / np.cosh(t) ** 2
            return (W.T * gains) @ W + ridge_eps * np.eye(n)

        oracle = FunctionOracle(n, fn, hessian=hess, name=name)
        oracle.weights = W
        oracle.ridge_eps = ridge_eps
        return oracle

    if name == "logistic_composite":
        if r is None:
            raise ValueError("logistic_composite requires a rank r")
        W = rng.standard_normal((r, n)) / np.sqrt(n)

        def fn(x):
            return float(np.logaddexp(0.0, W @ x).sum())

        def hess(x):
            sig = 1.0 / (1.0 + np.exp(-(W @ x)))
            gains = sig * (1.0 - sig)
            return (W.T * gains) @ W

        oracle = FunctionOracle(n, fn, hessian=hess, name=name)
        oracle.weights = W
        return oracle

    raise ValueError(f"unknown builtin function {name!r}")
